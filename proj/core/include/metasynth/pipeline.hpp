#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metasynth/corpus.hpp"
#include "metasynth/llm_gateway.hpp"
#include "metasynth/meta_engine.hpp"

namespace metasynth::pipeline {

enum class Mode { metasynth_docs, template_docs, instructions, responses, measure, contaminate };
enum class SeedSource { keywords, documents };

const char* to_string(Mode m) noexcept;
Mode parse_mode(std::string_view s);

struct SeedConfig {
  SeedSource source = SeedSource::keywords;
  /// Fixed keywords; when empty, a keyword agent invents keyword_count.
  std::vector<std::string> keywords;
  std::size_t keyword_count = 10;
  /// Documents JSONL used as seeds (documents source, template baseline).
  std::string path;
  std::size_t per_worker = 5;
  /// Optional embedded pool ({id, text, topic, embedding}) for topic-aware
  /// refresh between seed sets.
  std::string pool;
};

struct RunConfig {
  std::string domain = "finance";
  Mode mode = Mode::metasynth_docs;
  std::size_t workers = 64;
  /// Threads running workers at once; 0 means one per worker.
  std::size_t max_parallel = 0;
  std::size_t docs_per_seed_set = 50;
  std::size_t seed_sets_per_worker = 1;
  llm::ProviderConfig provider;
  std::optional<llm::ProviderConfig> embedder;
  std::optional<llm::ProviderConfig> judge;
  SeedConfig seeds;
  meta::EngineConfig engine = meta::EngineConfig::for_documents();
  std::uint64_t rng_seed = 0;
  std::string output_dir = "runs";
  /// Hard stop on total tokens across workers; 0 = unlimited.
  std::int64_t token_budget = 0;
  LengthWindow window{};
  // Instruction runs.
  std::string documents_path;
  std::string task_preset = "complex-questions";
  std::string task_description;
  std::size_t max_instructions_per_doc = 5;
  // Response runs.
  std::string instructions_path;
  bool run_judges = false;
  std::vector<std::string> categories;
};

/// Every problem with the config, for reporting all at once.
std::vector<std::string> check(const RunConfig& config);

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Replaces ${VAR} in every string value with the environment variable.
/// Unset variables are reported together as a ConfigError.
nlohmann::json interpolate_env(const nlohmann::json& j);

/// Reads a JSON config file and interpolates environment variables.
nlohmann::json load_config_json(const std::filesystem::path& path);

/// Parses and validates; throws ConfigError listing every problem.
RunConfig parse_config(const nlohmann::json& j);

/// Hash of the canonical config, excluding output_dir.
std::string config_hash(const RunConfig& config);
std::string run_id_for(const RunConfig& config);

enum class WorkerStatus { pending, running, completed, discarded, incomplete };

const char* to_string(WorkerStatus s) noexcept;
WorkerStatus parse_worker_status(std::string_view s);

struct WorkerRecord {
  std::size_t index = 0;
  WorkerStatus status = WorkerStatus::pending;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double wall_seconds = 0.0;
  bool resumed = false;
  std::string error;
  /// ProviderError kind name when the worker failed on the provider.
  std::string provider_error;
};

struct RunManifest {
  std::string run_id;
  std::string config_hash;
  Mode mode = Mode::metasynth_docs;
  bool finished = false;
  std::vector<WorkerRecord> workers;
  double wall_seconds = 0.0;

  std::size_t total_accepted() const;
  std::size_t total_rejected() const;
  std::int64_t total_tokens() const;
  bool all_completed() const;
  bool any_provider_error() const;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

RunManifest read_manifest(const std::filesystem::path& run_dir);

struct RunOptions {
  /// Test hook: terminate the process right after this many workers have
  /// finished and the manifest has been updated.
  std::optional<std::size_t> crash_after;
  /// Called (serialized) when a worker finishes.
  std::function<void(const WorkerRecord&)> on_worker_done;
};

/// Creates output_dir/run_id and runs every worker. Fails if the run
/// directory already exists (use resume).
RunManifest run(const RunConfig& config, const RunOptions& options = {});

/// Re-runs the workers of an existing run that did not complete.
RunManifest resume(const std::filesystem::path& run_dir, const RunOptions& options = {});

std::filesystem::path worker_dir(const std::filesystem::path& run_dir, std::size_t index);

/// Main output file name for a mode ("accepted.jsonl", "instructions.jsonl", ...).
std::string primary_output(Mode mode);

/// Concatenation of one output file across workers, in worker order.
std::vector<std::string> collect_lines(const std::filesystem::path& run_dir, const std::string& file_name);

}  // namespace metasynth::pipeline
