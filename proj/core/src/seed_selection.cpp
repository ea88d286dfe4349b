#include "metasynth/seed_selection.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_set>

#include "metasynth/meta_engine.hpp"
#include "metasynth/numeric.hpp"
#include "metasynth/prompts.hpp"
#include "metasynth/text.hpp"

namespace metasynth::seeds {
namespace {

std::vector<std::string> parse_keyword_reply(std::string_view reply) {
  const auto open = reply.find('[');
  if (open != std::string_view::npos) {
    const auto close = reply.find(']', open);
    return text::parse_list(reply.substr(open, close == std::string_view::npos ? close : close - open + 1));
  }
  return text::parse_list(reply);
}

void merge_keywords(std::vector<std::string>& into, const std::vector<std::string>& items, std::size_t count) {
  for (const auto& raw : items) {
    if (into.size() >= count) return;
    auto k = text::to_lower_ascii(text::trim(raw));
    if (k.empty()) continue;
    if (std::find(into.begin(), into.end(), k) == into.end()) into.push_back(std::move(k));
  }
}

std::string normalize_label(std::string_view reply) {
  auto s = text::trim(reply);
  if (const auto nl = s.find('\n'); nl != std::string_view::npos) s = text::trim(s.substr(0, nl));
  auto strip = [](std::string_view v) {
    while (!v.empty() && std::string_view("\"'`*.").find(v.front()) != std::string_view::npos) v.remove_prefix(1);
    while (!v.empty() && std::string_view("\"'`*.").find(v.back()) != std::string_view::npos) v.remove_suffix(1);
    return text::trim(v);
  };
  s = strip(s);
  if (text::to_lower_ascii(s.substr(0, std::min<std::size_t>(s.size(), 6))) == "topic:") s = strip(s.substr(6));
  return text::to_lower_ascii(s);
}

}  // namespace

KeywordSeeds random_keyword_seeds(std::string_view domain, std::size_t count, llm::Provider& provider) {
  if (count < 1) throw PreconditionError("keyword count must be at least 1");
  KeywordSeeds out;
  auto reply = provider.complete(llm::user_request(prompts::keyword_generation_prompt(domain, count, {}))).content;
  merge_keywords(out.keywords, parse_keyword_reply(reply), count);
  if (out.keywords.size() < count) {
    reply = provider.complete(llm::user_request(prompts::keyword_generation_prompt(domain, count - out.keywords.size(),
                                                                                   out.keywords)))
                .content;
    merge_keywords(out.keywords, parse_keyword_reply(reply), count);
  }
  if (out.keywords.size() < count) {
    out.warnings.push_back("keyword agent produced " + std::to_string(out.keywords.size()) + " distinct keywords, " +
                           std::to_string(count) + " requested");
  }
  return out;
}

std::string label_topic(const Document& doc, llm::Provider& provider) {
  if (text::trim(doc.text).empty()) throw PreconditionError("cannot label an empty document");
  const std::string name = "Topic Labeling Expert";
  const auto reply = provider
                         .complete(meta::render_expert_prompt(name, prompts::topic_label_prompt(doc.text),
                                                              llm::kJudgeTemperature, prompts::expert_guidance(name)))
                         .content;
  auto label = normalize_label(reply);
  if (label.empty()) throw ParseError("Topic Labeling Expert returned an empty label for " + doc.id);
  return label;
}

Pool load_pool(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open seed pool " + path.string());
  Pool pool;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PoolEntry e;
      e.id = j.at("id").get<std::string>();
      e.text = j.value("text", std::string{});
      e.topic = text::to_lower_ascii(text::trim(j.at("topic").get<std::string>()));
      e.embedding = j.at("embedding").get<llm::Embedding>();
      if (!ids.insert(e.id).second) throw ValidationError("duplicate id " + e.id);
      if (!pool.empty() && pool.front().embedding.size() != e.embedding.size()) {
        throw ValidationError("embedding dimension differs from the first entry");
      }
      pool.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const ValidationError& ex) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return pool;
}

std::vector<Neighbor> nearest_neighbors(const llm::Embedding& query, const Pool& pool, std::size_t k) {
  if (k > pool.size()) throw PreconditionError("k exceeds pool size");
  std::vector<Neighbor> all;
  all.reserve(pool.size());
  for (const auto& e : pool) {
    if (e.embedding.size() != query.size()) throw PreconditionError("embedding dimension mismatch for " + e.id);
    all.push_back({e.id, cosine_distance(query, e.embedding)});
  }
  auto less = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
  all.resize(k);
  return all;
}

RefreshResult refresh_seeds(SeedPoolState& state, const std::vector<llm::Embedding>& queries) {
  if (!state.pool || state.pool->empty()) throw PreconditionError("seed pool is empty");
  if (queries.empty()) throw PreconditionError("refresh needs at least one synthesized document");
  const auto& pool = *state.pool;
  std::map<std::string, const PoolEntry*> by_id;
  for (const auto& e : pool) by_id[e.id] = &e;
  std::unordered_set<std::string> banned;
  for (const auto& t : state.recent_topics) banned.insert(text::to_lower_ascii(text::trim(t)));
  const std::size_t required = std::max<std::size_t>(1, state.current_seeds.size());

  RefreshResult result;
  std::size_t k = std::max<std::size_t>(1, std::min(state.k, pool.size()));
  while (true) {
    result.attempted_k.push_back(k);
    // Best (smallest) distance from any synthesized document, per candidate.
    std::map<std::string, double> best;
    for (const auto& q : queries) {
      for (const auto& n : nearest_neighbors(q, pool, k)) {
        auto [it, inserted] = best.emplace(n.id, n.distance);
        if (!inserted) it->second = std::min(it->second, n.distance);
      }
    }
    std::vector<Neighbor> qualifying;
    for (const auto& [id, d] : best) {
      if (!banned.count(by_id.at(id)->topic)) qualifying.push_back({id, d});
    }
    std::sort(qualifying.begin(), qualifying.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
    });
    if (qualifying.size() >= required || k >= pool.size()) {
      if (qualifying.empty()) {
        throw TopicSaturationError("every pool document shares a topic with the recently synthesized documents");
      }
      if (qualifying.size() < required) {
        result.warnings.push_back("only " + std::to_string(qualifying.size()) + " of " + std::to_string(required) +
                                  " seeds found with fresh topics");
      }
      for (std::size_t i = 0; i < qualifying.size() && i < required; ++i) result.seeds.push_back(qualifying[i].id);
      break;
    }
    ++k;
  }
  state.current_seeds = result.seeds;
  state.k = kInitialNeighbors;
  state.recent_topics.clear();
  return result;
}

RefreshResult refresh_seeds(SeedPoolState& state, const std::vector<Document>& synthesized, llm::Provider& embedder) {
  if (synthesized.size() != state.refresh_period) {
    throw PreconditionError("refresh expects exactly " + std::to_string(state.refresh_period) +
                            " synthesized documents, got " + std::to_string(synthesized.size()));
  }
  std::vector<std::string> texts;
  for (const auto& d : synthesized) texts.push_back(d.text);
  return refresh_seeds(state, embedder.embed(texts));
}

}  // namespace metasynth::seeds
