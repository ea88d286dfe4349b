#include "metasynth/contamination.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "metasynth/error.hpp"
#include "metasynth/text.hpp"

namespace metasynth::contamination {
namespace {

class Vocabulary {
 public:
  std::vector<std::uint32_t> encode(const std::string& doc) {
    std::vector<std::uint32_t> out;
    for (auto& t : text::normalized_tokens(doc)) {
      auto [it, _] = ids_.emplace(std::move(t), static_cast<std::uint32_t>(ids_.size()));
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
};

using Gram = std::u32string;

Gram gram_at(const std::vector<std::uint32_t>& ids, std::size_t start, std::size_t n) {
  Gram g(n, U'\0');
  for (std::size_t k = 0; k < n; ++k) g[k] = static_cast<char32_t>(ids[start + k]);
  return g;
}

struct Encoded {
  std::vector<std::vector<std::uint32_t>> refs;
  std::vector<std::vector<std::uint32_t>> targets;
};

Encoded encode_all(const std::vector<std::string>& references, const std::vector<std::string>& targets) {
  Vocabulary vocab;
  Encoded e;
  for (const auto& t : targets) e.targets.push_back(vocab.encode(t));
  for (const auto& r : references) e.refs.push_back(vocab.encode(r));
  return e;
}

std::vector<bool> flags_for(const Encoded& e, std::size_t n) {
  std::unordered_set<Gram> index;
  for (const auto& t : e.targets) {
    for (std::size_t i = 0; i + n <= t.size(); ++i) index.insert(gram_at(t, i, n));
  }
  std::vector<bool> out(e.refs.size(), false);
  if (index.empty()) return out;
  for (std::size_t r = 0; r < e.refs.size(); ++r) {
    const auto& ids = e.refs[r];
    for (std::size_t i = 0; i + n <= ids.size(); ++i) {
      if (index.count(gram_at(ids, i, n))) {
        out[r] = true;
        break;
      }
    }
  }
  return out;
}

void check_inputs(const std::vector<std::string>& references, const std::vector<std::string>& targets) {
  if (references.empty() || targets.empty()) throw PreconditionError("contamination check needs both corpora nonempty");
}

}  // namespace

nlohmann::json ContaminationReport::to_json() const {
  nlohmann::json j{{"n_reference", n_reference}, {"normalization", normalization}};
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    j["EM-" + std::to_string(n_values[i])] = fractions[i];
  }
  j["warnings"] = warnings;
  return j;
}

ContaminationReport em_overlap(const std::vector<std::string>& references, const std::vector<std::string>& targets,
                               const std::vector<std::size_t>& n_values) {
  check_inputs(references, targets);
  if (n_values.empty()) throw PreconditionError("no n values requested");
  for (auto n : n_values) {
    if (n < 1 || n > 50) throw PreconditionError("n values must lie in [1, 50]");
  }
  const auto enc = encode_all(references, targets);
  ContaminationReport report;
  report.n_reference = references.size();
  for (auto n : n_values) {
    const auto flags = flags_for(enc, n);
    std::size_t hits = 0;
    std::size_t short_refs = 0;
    for (std::size_t r = 0; r < flags.size(); ++r) {
      hits += flags[r] ? 1 : 0;
      if (enc.refs[r].size() < n) ++short_refs;
    }
    if (short_refs > 0) {
      report.warnings.push_back(std::to_string(short_refs) + " reference(s) shorter than " + std::to_string(n) +
                                " tokens skipped for EM-" + std::to_string(n));
    }
    report.n_values.push_back(n);
    report.contaminated.push_back(hits);
    report.fractions.push_back(static_cast<double>(hits) / static_cast<double>(references.size()));
  }
  return report;
}

std::vector<bool> contaminated_flags(const std::vector<std::string>& references,
                                     const std::vector<std::string>& targets, std::size_t n) {
  check_inputs(references, targets);
  if (n < 1) throw PreconditionError("n must be at least 1");
  return flags_for(encode_all(references, targets), n);
}

}  // namespace metasynth::contamination
