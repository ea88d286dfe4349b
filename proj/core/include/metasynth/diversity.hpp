#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace metasynth::diversity {

using Vector = std::vector<double>;

/// DEFLATE level used for every compression ratio in the project.
inline constexpr int kCompressionLevel = 9;

/// Size of the gzip container (header + DEFLATE stream + trailer).
std::size_t gzip_size(std::string_view data, int level = kCompressionLevel);

/// Byte length of the "\n"-joined corpus over its gzip size. Order matters.
double compression_ratio(const std::vector<std::string>& corpus, int level = kCompressionLevel);

/// Unique over total token n-grams of the "\n"-joined corpus.
double ngram_diversity(const std::vector<std::string>& corpus, std::size_t n);

/// Sum of n-gram diversity for n = 1..4.
double ngd_sum(const std::vector<std::string>& corpus);

/// (1/N^2) * sum over all ordered pairs (i, j) of cosine distance.
double remote_clique(const std::vector<Vector>& embeddings);

/// (1/N) * sum_i min_{j != i} cosine distance.
double chamfer(const std::vector<Vector>& embeddings);

/// 2 / (M(M-1)) * sum_{i<j} cosine distance between batch embeddings.
double task2vec_coefficient(const std::vector<Vector>& batch_embeddings);

struct ReferenceFrequencies {
  std::unordered_map<std::string, std::uint64_t> counts;
  std::uint64_t total_tokens = 0;

  void add(std::string token, std::uint64_t count);
  /// Token TSV: "token<TAB>count" per line.
  static ReferenceFrequencies from_tsv(const std::filesystem::path& path);
  static ReferenceFrequencies from_corpus(const std::vector<std::string>& corpus);
};

/// Mean inverse frequency of one document: mean of ln(total / (1 + count)).
/// Documents without tokens score 0.
double mif_document(std::string_view doc, const ReferenceFrequencies& ref);

/// Mean of the per-document scores.
double mif(const std::vector<std::string>& corpus, const ReferenceFrequencies& ref);

struct BootstrapResult {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n_resamples = 0;
  double level = 0.0;
};

/// Index-multiset statistic used by the closure form of bootstrap_ci.
using Statistic = std::function<double(const std::vector<std::size_t>& indices)>;

/// Percentile bootstrap over `n_items` items. Reports the mean of the
/// resample statistics and the (1-level)/2 and 1-(1-level)/2 percentiles
/// (linear interpolation); the interval is widened if needed so that
/// lo <= mean <= hi. Deterministic in rng_seed.
BootstrapResult bootstrap_ci(std::size_t n_items, const Statistic& statistic, std::size_t n_resamples, double level,
                             std::uint64_t rng_seed);

/// Bootstrap of the sample mean.
BootstrapResult bootstrap_ci(const std::vector<double>& values, std::size_t n_resamples, double level,
                             std::uint64_t rng_seed);

/// Linear-interpolation quantile of sorted data (type 7).
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Word-count histogram keyed by bin start (0, 50, 100, ...).
std::map<std::size_t, std::size_t> length_histogram(const std::vector<std::string>& corpus,
                                                    std::size_t bin_width = 50);

enum class Direction { higher_better, lower_better };

struct MetricEstimate {
  std::string name;
  double point_estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  /// The metric on the unresampled corpus.
  double full_sample = 0.0;
  std::size_t n_resamples = 0;
  double level = 0.0;
  Direction direction = Direction::higher_better;
};

struct DiversityReport {
  std::string corpus_id;
  /// Fingerprint of the document order (compression ratio depends on it).
  std::string order_hash;
  std::size_t n_documents = 0;
  std::vector<MetricEstimate> metrics;
  std::map<std::size_t, std::size_t> length_histogram;

  nlohmann::json to_json() const;
  std::string csv_header() const;
  std::string csv_row() const;
};

struct MeasureInput {
  std::string corpus_id;
  std::vector<std::string> texts;
  /// One per text, for remote-clique and Chamfer.
  std::optional<std::vector<Vector>> embeddings;
  /// Externally produced per-batch Task2Vec embeddings.
  std::optional<std::vector<Vector>> task2vec_batches;
  std::optional<ReferenceFrequencies> reference;
};

struct MeasureOptions {
  std::size_t n_resamples = 1000;
  double level = 0.95;
  std::uint64_t rng_seed = 0;
};

/// Computes every metric the input supports, each with a bootstrap interval.
DiversityReport measure(const MeasureInput& input, const MeasureOptions& options = {});

/// Reads a JSONL file of {"embedding": [...]} (other fields ignored).
std::vector<Vector> load_embeddings(const std::filesystem::path& path);

}  // namespace metasynth::diversity
