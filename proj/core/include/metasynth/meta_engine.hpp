#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "metasynth/llm_gateway.hpp"

namespace metasynth::meta {

enum class EntryKind { initial_task, meta_output, expert_result, injected_instruction, error };

const char* to_string(EntryKind k) noexcept;
EntryKind parse_entry_kind(std::string_view s);

struct HistoryEntry {
  EntryKind kind = EntryKind::initial_task;
  std::string content;
  std::size_t round = 1;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

void to_json(nlohmann::json& j, const HistoryEntry& e);
void from_json(const nlohmann::json& j, HistoryEntry& e);

/// The meta model's transcript. Append-only; the first entry is always the
/// initial task and the round never exceeds the limit.
class ExecutionHistory {
 public:
  ExecutionHistory(std::string initial_task, std::size_t round_limit);

  const std::vector<HistoryEntry>& entries() const noexcept { return entries_; }
  std::size_t round() const noexcept { return round_; }
  std::size_t round_limit() const noexcept { return round_limit_; }
  std::size_t total_chars() const noexcept { return chars_; }

  void append(EntryKind kind, std::string content);
  /// Moves to the next round. Returns false (and stays put) at the limit.
  bool advance_round();

  /// Chat request for the meta model: the initial task and non-meta entries
  /// become user turns, meta outputs become assistant turns; adjacent turns
  /// with the same role are merged.
  llm::ChatRequest to_request(double temperature) const;

 private:
  std::vector<HistoryEntry> entries_;
  std::size_t round_ = 1;
  std::size_t round_limit_;
  std::size_t chars_ = 0;
};

struct EngineConfig {
  std::size_t round_limit = 256;
  int max_error_retries = 3;
  std::vector<std::string> required_expert_names;
  /// Tags whose payloads constitute a final answer, e.g. "document".
  std::vector<std::string> answer_tags{"document"};
  std::string end_token = "<END>";
  /// Extra expert names accepted besides the "... Expert" grammar.
  std::vector<std::string> expert_aliases;
  /// History size (characters) that triggers a context-overflow stop; 0 = off.
  std::size_t max_history_chars = 0;
  double meta_temperature = llm::kGenerationTemperature;
  double expert_temperature = llm::kGenerationTemperature;

  static EngineConfig for_documents();
  static EngineConfig for_instructions();
};

std::vector<std::string> check(const EngineConfig& config);
void to_json(nlohmann::json& j, const EngineConfig& c);
void from_json(const nlohmann::json& j, EngineConfig& c);

struct ExpertCall {
  std::string name;
  std::string instruction;
  /// Further calls in the same output; they are not executed.
  std::size_t ignored_calls = 0;
};

struct FinalAnswer {
  std::vector<std::string> payloads;
  /// The end token appeared alongside the answer; the run ends next round.
  bool end_follows = false;
};

struct End {};

struct FormatError {
  std::string reason;
};

using MetaAction = std::variant<ExpertCall, FinalAnswer, End, FormatError>;

/// Seeds the history with one initial-task entry holding the system prompt,
/// meta prompt, task description and seed block, in that order.
ExecutionHistory init_history(std::string_view system_prompt, std::string_view meta_prompt,
                              std::string_view task_description, std::string_view seeds,
                              std::size_t round_limit);

/// Total: never throws. Text inside triple-quoted blocks is ignored when
/// looking for answer tags and the end token.
MetaAction parse_meta_output(std::string_view text, const EngineConfig& config);

/// True if `name` fits the expert-name grammar or one of `aliases`.
bool is_expert_name(std::string_view name, const std::vector<std::string>& aliases = {});

/// The isolated request an expert receives. Depends only on the arguments.
/// `guidance` (derived from the expert name) is appended to the role framing.
llm::ChatRequest render_expert_prompt(std::string_view expert_name, std::string_view instruction,
                                      double temperature = llm::kGenerationTemperature,
                                      std::string_view guidance = {});

/// How an expert reply is recorded in the meta history.
std::string format_expert_result(std::string_view expert_name, std::string_view reply);

std::string format_error_message(std::string_view reason, const EngineConfig& config);

enum class RunStatus { running, completed, discarded, incomplete, context_overflow };

const char* to_string(RunStatus s) noexcept;

/// Produces an expert's reply given only its name and instruction.
using ExpertDispatcher = std::function<std::string(const std::string& name, const std::string& instruction)>;

/// Optional text injected at the start of each round.
using InjectionHook = std::function<std::optional<std::string>(const ExecutionHistory&)>;

using EntryObserver = std::function<void(const HistoryEntry&)>;

/// Dispatcher that renders the isolated expert prompt (with name-derived
/// format guidance) and calls `provider`.
ExpertDispatcher provider_dispatcher(std::shared_ptr<llm::Provider> provider,
                                     double temperature = llm::kGenerationTemperature);

struct RoundResult {
  std::vector<std::string> payloads;
  RunStatus status = RunStatus::running;
};

/// One meta-prompting run. Single-threaded; owns its history.
class MetaEngine {
 public:
  MetaEngine(ExecutionHistory history, EngineConfig config, std::shared_ptr<llm::Provider> meta_model,
             ExpertDispatcher dispatcher, InjectionHook injection = {});

  /// Executes one round. Provider failures propagate.
  RoundResult run_round();

  /// Runs rounds until a terminal status, handing answer payloads to `sink`.
  RunStatus run(const std::function<void(const std::vector<std::string>&)>& sink);

  const ExecutionHistory& history() const noexcept { return history_; }
  RunStatus status() const noexcept { return status_; }
  const EngineConfig& config() const noexcept { return config_; }

  void set_entry_observer(EntryObserver observer);

 private:
  void append(EntryKind kind, std::string content);
  void finish_round();

  ExecutionHistory history_;
  EngineConfig config_;
  std::shared_ptr<llm::Provider> meta_model_;
  ExpertDispatcher dispatcher_;
  InjectionHook injection_;
  EntryObserver observer_;
  RunStatus status_ = RunStatus::running;
  int consecutive_errors_ = 0;
  bool end_pending_ = false;
};

void write_transcript(const std::filesystem::path& path, const std::vector<HistoryEntry>& entries);
std::vector<HistoryEntry> read_transcript(const std::filesystem::path& path);

}  // namespace metasynth::meta
