#include "metasynth/diversity.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "metasynth/error.hpp"
#include "metasynth/numeric.hpp"
#include "metasynth/text.hpp"

namespace metasynth::diversity {
namespace {

std::string concat(const std::vector<std::string>& corpus) {
  std::size_t total = corpus.empty() ? 0 : corpus.size() - 1;
  for (const auto& d : corpus) total += d.size();
  std::string out;
  out.reserve(total);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (i) out.push_back('\n');
    out += corpus[i];
  }
  return out;
}

std::vector<std::uint32_t> token_ids(const std::vector<std::string>& tokens) {
  std::unordered_map<std::string_view, std::uint32_t> ids;
  std::vector<std::uint32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto [it, _] = ids.emplace(t, static_cast<std::uint32_t>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

double ngram_diversity_tokens(const std::vector<std::uint32_t>& ids, std::size_t n) {
  if (n < 1) throw PreconditionError("n-gram order must be at least 1");
  if (ids.size() < n) throw PreconditionError("corpus has fewer tokens than the n-gram order");
  const std::size_t total = ids.size() - n + 1;
  std::unordered_set<std::u32string> unique;
  unique.reserve(total);
  std::u32string key(n, U'\0');
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t k = 0; k < n; ++k) key[k] = static_cast<char32_t>(ids[i + k]);
    unique.insert(key);
  }
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

void check_vectors(const std::vector<Vector>& v, std::size_t min_count, const char* what) {
  if (v.size() < min_count) {
    throw PreconditionError(std::string(what) + " needs at least " + std::to_string(min_count) + " vectors");
  }
  for (const auto& x : v) {
    if (x.size() != v.front().size()) throw PreconditionError(std::string(what) + ": dimension mismatch");
  }
}

// Per-row mean distance to all N vectors (i = j included) and minimum
// distance to the others.
struct RowStats {
  std::vector<double> mean_all;
  std::vector<double> min_other;
  std::vector<double> mean_other;
};

RowStats row_stats(const std::vector<Vector>& v) {
  const auto n = v.size();
  RowStats s{std::vector<double>(n, 0.0), std::vector<double>(n, std::numeric_limits<double>::infinity()),
             std::vector<double>(n, 0.0)};
  std::vector<double> row_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = cosine_distance(v[i], v[j]);
      row_sum[i] += d;
      row_sum[j] += d;
      s.min_other[i] = std::min(s.min_other[i], d);
      s.min_other[j] = std::min(s.min_other[j], d);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    // Self-distance is exactly zero by definition.
    s.mean_all[i] = row_sum[i] / static_cast<double>(n);
    s.mean_other[i] = row_sum[i] / static_cast<double>(n - 1);
  }
  return s;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::size_t gzip_size(std::string_view data, int level) {
  z_stream zs{};
  if (deflateInit2(&zs, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error("deflateInit2 failed");
  }
  std::vector<unsigned char> out(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto size = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("deflate did not finish");
  return static_cast<std::size_t>(size);
}

double compression_ratio(const std::vector<std::string>& corpus, int level) {
  if (corpus.empty()) throw PreconditionError("compression ratio of an empty corpus");
  const auto joined = concat(corpus);
  return static_cast<double>(joined.size()) / static_cast<double>(gzip_size(joined, level));
}

double ngram_diversity(const std::vector<std::string>& corpus, std::size_t n) {
  return ngram_diversity_tokens(token_ids(text::lexical_tokens(concat(corpus))), n);
}

double ngd_sum(const std::vector<std::string>& corpus) {
  const auto ids = token_ids(text::lexical_tokens(concat(corpus)));
  double s = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) s += ngram_diversity_tokens(ids, n);
  return s;
}

double remote_clique(const std::vector<Vector>& v) {
  check_vectors(v, 2, "remote_clique");
  return mean_of(row_stats(v).mean_all);
}

double chamfer(const std::vector<Vector>& v) {
  check_vectors(v, 2, "chamfer");
  return mean_of(row_stats(v).min_other);
}

double task2vec_coefficient(const std::vector<Vector>& v) {
  check_vectors(v, 2, "task2vec_coefficient");
  const auto m = v.size();
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) s += cosine_distance(v[i], v[j]);
  }
  return 2.0 * s / (static_cast<double>(m) * static_cast<double>(m - 1));
}

void ReferenceFrequencies::add(std::string token, std::uint64_t count) {
  counts[std::move(token)] += count;
  total_tokens += count;
}

ReferenceFrequencies ReferenceFrequencies::from_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open reference frequencies " + path.string());
  ReferenceFrequencies ref;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>count");
    }
    try {
      std::size_t used = 0;
      const auto count = std::stoull(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing characters");
      ref.add(text::to_lower_ascii(line.substr(0, tab)), count);
    } catch (const std::logic_error&) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": bad count");
    }
  }
  return ref;
}

ReferenceFrequencies ReferenceFrequencies::from_corpus(const std::vector<std::string>& corpus) {
  ReferenceFrequencies ref;
  for (const auto& d : corpus) {
    for (auto& t : text::lexical_tokens(d)) ref.add(std::move(t), 1);
  }
  return ref;
}

double mif_document(std::string_view doc, const ReferenceFrequencies& ref) {
  if (ref.total_tokens == 0) throw PreconditionError("reference frequencies are empty");
  const auto tokens = text::lexical_tokens(doc);
  if (tokens.empty()) return 0.0;
  const double total = static_cast<double>(ref.total_tokens);
  double s = 0.0;
  for (const auto& t : tokens) {
    const auto it = ref.counts.find(t);
    const double c = it == ref.counts.end() ? 0.0 : static_cast<double>(it->second);
    s += std::log(total / (1.0 + c));
  }
  return s / static_cast<double>(tokens.size());
}

double mif(const std::vector<std::string>& corpus, const ReferenceFrequencies& ref) {
  if (corpus.empty()) throw PreconditionError("MIF of an empty corpus");
  double s = 0.0;
  for (const auto& d : corpus) s += mif_document(d, ref);
  return s / static_cast<double>(corpus.size());
}

std::map<std::size_t, std::size_t> length_histogram(const std::vector<std::string>& corpus, std::size_t bin_width) {
  if (corpus.empty()) throw PreconditionError("length histogram of an empty corpus");
  if (bin_width == 0) throw PreconditionError("bin width must be positive");
  std::map<std::size_t, std::size_t> bins;
  for (const auto& d : corpus) ++bins[text::count_words(d) / bin_width * bin_width];
  return bins;
}

nlohmann::json DiversityReport::to_json() const {
  nlohmann::json metrics_json = nlohmann::json::object();
  for (const auto& m : metrics) {
    metrics_json[m.name] = {{"point_estimate", m.point_estimate},
                            {"ci_low", m.ci_low},
                            {"ci_high", m.ci_high},
                            {"full_sample", m.full_sample},
                            {"n_resamples", m.n_resamples},
                            {"level", m.level},
                            {"direction", m.direction == Direction::higher_better ? "higher_better" : "lower_better"}};
  }
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [start, count] : length_histogram) hist.push_back({{"bin_start", start}, {"count", count}});
  return {{"corpus_id", corpus_id},
          {"order_hash", order_hash},
          {"n_documents", n_documents},
          {"metrics", metrics_json},
          {"length_histogram", hist}};
}

std::string DiversityReport::csv_header() const {
  std::string out = "corpus_id,n_documents,order_hash";
  for (const auto& m : metrics) out += "," + m.name + "," + m.name + "_ci_low," + m.name + "_ci_high";
  return out;
}

std::string DiversityReport::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << '"' << text::replace_all(corpus_id, "\"", "\"\"") << '"' << ',' << n_documents << ',' << order_hash;
  for (const auto& m : metrics) os << ',' << m.point_estimate << ',' << m.ci_low << ',' << m.ci_high;
  return os.str();
}

DiversityReport measure(const MeasureInput& input, const MeasureOptions& options) {
  if (input.texts.size() < 2) throw PreconditionError("measure needs at least 2 documents");
  DiversityReport report;
  report.corpus_id = input.corpus_id;
  report.n_documents = input.texts.size();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : input.texts) h = text::fnv1a64(t + '\n', h);
  report.order_hash = text::hex64(h);
  report.length_histogram = length_histogram(input.texts);

  std::uint64_t stream = 0;
  auto add = [&](std::string name, Direction dir, double full, BootstrapResult b) {
    report.metrics.push_back({std::move(name), b.mean, b.lo, b.hi, full, b.n_resamples, b.level, dir});
  };
  auto corpus_stat = [&](std::function<double(const std::vector<std::string>&)> f) -> Statistic {
    return [&input, f = std::move(f)](const std::vector<std::size_t>& idx) {
      std::vector<std::string> sample;
      sample.reserve(idx.size());
      for (auto i : idx) sample.push_back(input.texts[i]);
      return f(sample);
    };
  };
  auto boot = [&](const Statistic& s, std::size_t n) {
    return bootstrap_ci(n, s, options.n_resamples, options.level, options.rng_seed + stream++);
  };

  add("compression_ratio", Direction::lower_better, compression_ratio(input.texts),
      boot(corpus_stat([](const auto& c) { return compression_ratio(c); }), input.texts.size()));

  const auto n_tokens = text::lexical_tokens(concat(input.texts)).size();
  if (n_tokens >= 1) {
    add("1-GD", Direction::higher_better, ngram_diversity(input.texts, 1),
        boot(corpus_stat([](const auto& c) { return ngram_diversity(c, 1); }), input.texts.size()));
  }
  if (n_tokens >= 4) {
    // A resample of short documents can hold fewer than four tokens; such
    // a resample has no repeated 4-grams and scores as fully diverse.
    add("4-GD", Direction::higher_better, ngram_diversity(input.texts, 4),
        boot(corpus_stat([](const auto& c) {
               try {
                 return ngram_diversity(c, 4);
               } catch (const PreconditionError&) {
                 return 1.0;
               }
             }),
             input.texts.size()));
    add("ngd_sum", Direction::higher_better, ngd_sum(input.texts),
        boot(corpus_stat([](const auto& c) {
               try {
                 return ngd_sum(c);
               } catch (const PreconditionError&) {
                 return 4.0;
               }
             }),
             input.texts.size()));
  }

  auto per_item = [&](std::string name, Direction dir, const std::vector<double>& values) {
    add(std::move(name), dir, mean_of(values), bootstrap_ci(values, options.n_resamples, options.level,
                                                            options.rng_seed + stream++));
  };
  if (input.embeddings) {
    if (input.embeddings->size() != input.texts.size()) {
      throw PreconditionError("embedding count does not match document count");
    }
    check_vectors(*input.embeddings, 2, "embeddings");
    const auto rs = row_stats(*input.embeddings);
    per_item("remote_clique", Direction::higher_better, rs.mean_all);
    per_item("chamfer", Direction::higher_better, rs.min_other);
  }
  if (input.reference) {
    std::vector<double> scores;
    for (const auto& t : input.texts) scores.push_back(mif_document(t, *input.reference));
    per_item("mif", Direction::higher_better, scores);
  }
  if (input.task2vec_batches) {
    check_vectors(*input.task2vec_batches, 2, "task2vec batches");
    per_item("task2vec_coefficient", Direction::higher_better, row_stats(*input.task2vec_batches).mean_other);
  }
  return report;
}

std::vector<Vector> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings " + path.string());
  std::vector<Vector> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).at("embedding").get<Vector>());
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace metasynth::diversity
