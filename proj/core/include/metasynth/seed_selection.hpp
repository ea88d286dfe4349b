#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "metasynth/corpus.hpp"
#include "metasynth/llm_gateway.hpp"

namespace metasynth::seeds {

struct KeywordSeeds {
  std::vector<std::string> keywords;
  std::vector<std::string> warnings;
};

/// Asks a keyword agent for `count` random domain keywords. Keywords are
/// lowercased and deduplicated; a short list triggers one re-prompt, after
/// which whatever exists is returned with a warning.
KeywordSeeds random_keyword_seeds(std::string_view domain, std::size_t count, llm::Provider& provider);

/// Short lowercase topic label from a Topic Labeling Expert (temperature 0).
std::string label_topic(const Document& doc, llm::Provider& provider);

struct PoolEntry {
  std::string id;
  std::string text;
  std::string topic;
  llm::Embedding embedding;
};

/// Read-only after load; share one instance across workers.
using Pool = std::vector<PoolEntry>;

/// Loads a JSONL pool of {id, text, topic, embedding}. Topics are
/// lowercased; all embeddings must share one dimension.
Pool load_pool(const std::filesystem::path& path);

struct Neighbor {
  std::string id;
  double distance = 0.0;
};

/// Exact k nearest neighbours by cosine distance; ties by ascending id.
std::vector<Neighbor> nearest_neighbors(const llm::Embedding& query, const Pool& pool, std::size_t k);

struct SeedPoolState {
  std::shared_ptr<const Pool> pool;
  std::vector<std::string> current_seeds;
  std::size_t k = 5;
  std::size_t refresh_period = 50;
  /// Topic labels of the documents synthesized since the last refresh.
  std::vector<std::string> recent_topics;
};

inline constexpr std::size_t kInitialNeighbors = 5;

struct RefreshResult {
  std::vector<std::string> seeds;
  /// Every k tried, in order.
  std::vector<std::size_t> attempted_k;
  std::vector<std::string> warnings;
};

/// Topic-aware adaptive kNN refresh from precomputed embeddings of the
/// synthesized documents. On success the state's seeds are replaced, k is
/// reset to 5 and recent_topics cleared. Throws TopicSaturationError when
/// the whole pool yields no candidate with a fresh topic.
RefreshResult refresh_seeds(SeedPoolState& state, const std::vector<llm::Embedding>& synthesized_embeddings);

/// As above, embedding the synthesized documents first. Requires exactly
/// refresh_period documents.
RefreshResult refresh_seeds(SeedPoolState& state, const std::vector<Document>& synthesized, llm::Provider& embedder);

}  // namespace metasynth::seeds
