#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metasynth/corpus.hpp"
#include "metasynth/llm_gateway.hpp"
#include "metasynth/meta_engine.hpp"

namespace metasynth::instruct {

struct InstructRunConfig {
  std::string task_description;
  /// Soft target stated to the agents; the hard filter is kInstructionWordLimit.
  std::size_t max_words = 100;
  std::size_t max_instructions = 5;
  std::string id_prefix = "run";
  meta::EngineConfig engine = meta::EngineConfig::for_instructions();
};

std::vector<std::string> check(const InstructRunConfig& config);

struct FilteredQuestion {
  std::string text;
  std::string reason;
};

struct InstructRunResult {
  std::vector<Instruction> instructions;
  std::vector<FilteredQuestion> filtered;
  std::vector<meta::HistoryEntry> transcript;
  meta::RunStatus status = meta::RunStatus::running;
};

/// Evolves instructions from one document through the meta engine.
InstructRunResult synthesize_instructions(const Document& doc, const InstructRunConfig& config,
                                          std::shared_ptr<llm::Provider> meta_model,
                                          std::shared_ptr<llm::Provider> experts,
                                          const meta::EntryObserver& on_entry = {});

/// Every well-formed <question>...</question> payload, trimmed, in order.
/// An opening tag followed by another opening tag before its close is
/// skipped (and reported through `warnings` when given).
std::vector<std::string> parse_questions(std::string_view text, std::vector<std::string>* warnings = nullptr);

/// The banned phrase a question contains, if any.
std::optional<std::string> banned_phrase(std::string_view question);

struct PromptItem {
  std::string instruction_id;
  PromptFormat format = PromptFormat::free_form;
  std::optional<int> word_limit;
};

struct ResponsePrompt {
  std::string prompt;
  std::vector<PromptItem> items;
};

/// Assigns each instruction one format uniformly at random (constrained CoT
/// gets a word limit in {50, 100, ..., 500}) and groups the reformatted
/// instructions, each exactly once, into prompts of one to three behind the
/// context. Pure in (context, instructions, rng_seed).
std::vector<ResponsePrompt> build_response_prompts(const Document& context,
                                                   const std::vector<Instruction>& instructions,
                                                   std::uint64_t rng_seed);

/// One response record per prompt item. Multi-instruction prompts ask for
/// <answer> blocks in order; if the count does not match, every item gets
/// the full reply.
std::vector<ResponseRecord> synthesize_responses(const std::vector<ResponsePrompt>& prompts, llm::Provider& provider);

enum class JudgeKind { accuracy, relevance, category, winrate };

const char* to_string(JudgeKind k) noexcept;

struct JudgeVerdict {
  JudgeKind kind = JudgeKind::accuracy;
  /// "0"/"1", a category name, or "A"/"B"/"C".
  std::string value;
};

/// Strict parse of a judge reply; nullopt when it does not conform.
std::optional<std::string> parse_judge_reply(JudgeKind kind, std::string_view reply,
                                             const std::vector<std::string>& categories = {});

// Judge calls run at temperature 0 and re-ask once on a malformed reply;
// a second malformed reply raises ParseError.
JudgeVerdict judge_accuracy(std::string_view context, std::string_view instruction, std::string_view response,
                            llm::Provider& judge);
JudgeVerdict judge_relevance(std::string_view context, std::string_view instruction, std::string_view response,
                             llm::Provider& judge);
JudgeVerdict judge_category(const std::vector<std::string>& categories, std::string_view instruction,
                            std::string_view response, llm::Provider& judge);
/// A single winrate judgement with response_a shown first.
JudgeVerdict judge_winrate(std::string_view instruction, std::string_view response_a, std::string_view response_b,
                           llm::Provider& judge);

/// Judges a pair twice with positions swapped. 'A' or 'B' only when both
/// orders agree; otherwise 'C' (tie).
char judge_pair(std::string_view instruction, std::string_view response_a, std::string_view response_b,
                llm::Provider& judge);

struct WinrateReport {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t tie = 0;
  double frac_a = 0.0;
  double frac_b = 0.0;
  /// 1 - (frac_a + frac_b), so the three fractions sum to exactly 1.
  double frac_tie = 0.0;
};

/// Aggregates outcomes 'A', 'B' and 'C'.
WinrateReport winrate_report(const std::vector<char>& outcomes);

}  // namespace metasynth::instruct
