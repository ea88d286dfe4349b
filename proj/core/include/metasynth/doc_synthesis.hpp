#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metasynth/corpus.hpp"
#include "metasynth/llm_gateway.hpp"
#include "metasynth/meta_engine.hpp"

namespace metasynth::docs {

struct ExpansionEvent {
  std::size_t round = 0;
  /// Keywords actually added; empty for a no-op expansion.
  std::vector<std::string> added;
};

struct SeedState {
  std::vector<std::string> keywords;
  std::vector<Document> seed_documents;
  std::size_t generation = 0;
  std::vector<ExpansionEvent> expansion_log;
};

/// Adds `suggested` keywords not already present (case-insensitive), keeping
/// the first casing seen. Always logs one event, empty when nothing was new.
SeedState expand_seeds(SeedState state, const std::vector<std::string>& suggested, std::size_t round = 0);

struct MemoryRow {
  std::string instance_id;
  std::string summary;
  std::string category;
};

/// The instance classification table: one row per accepted document.
struct InstanceMemory {
  std::vector<MemoryRow> rows;

  std::string render() const;
};

struct DocRunConfig {
  std::size_t n_documents = 50;
  std::string domain = "finance";
  std::size_t target_words = 400;
  LengthWindow window{};
  /// Contiguous words shared with a seed document that count as copying.
  std::size_t copy_guard_words = 50;
  std::size_t max_expansions_per_draft = 3;
  /// Prefix for generated ids, e.g. "w3" gives "w3-doc-0001".
  std::string id_prefix = "run";
  meta::EngineConfig engine = meta::EngineConfig::for_documents();
};

std::vector<std::string> check(const DocRunConfig& config);

struct DocCallbacks {
  std::function<void(const Document&)> on_accepted;
  std::function<void(const RejectedDraft&)> on_rejected;
  meta::EntryObserver on_entry;
};

struct DocRunResult {
  std::vector<Document> accepted;
  std::vector<RejectedDraft> rejected;
  std::vector<meta::HistoryEntry> transcript;
  meta::RunStatus status = meta::RunStatus::running;
  SeedState seeds;
  InstanceMemory memory;
};

/// Conditional instance generation through the meta engine. `meta_model`
/// drives the loop; `experts` answers the isolated expert calls (the two
/// may be the same provider). Partial results are returned for runs that
/// end discarded or incomplete.
DocRunResult synthesize_documents(SeedState seeds, const DocRunConfig& config,
                                  std::shared_ptr<llm::Provider> meta_model,
                                  std::shared_ptr<llm::Provider> experts, const DocCallbacks& callbacks = {});

/// Asks a Summarizer Expert for a three-line summary.
std::string summarize_instance(std::string_view doc_text, llm::Provider& provider);

/// True if `text` shares a run of at least `min_words` whitespace tokens
/// with any of `sources`.
bool copies_source(std::string_view text, const std::vector<std::string>& sources, std::size_t min_words);

struct TemplateConfig {
  std::string domain = "finance";
  std::size_t n_documents = 1;
  std::size_t copy_guard_words = 50;
  LengthWindow window{};
  std::string id_prefix = "run";
  double temperature = llm::kGenerationTemperature;
};

struct TemplateResult {
  std::vector<Document> documents;
  std::vector<RejectedDraft> rejected;
  std::vector<std::string> warnings;
};

/// Template-prompting baseline. Each call carries the five seed texts and
/// every document generated so far. An output that copies a seed or misses
/// the length window is regenerated once; if the retry also fails, the slot
/// is skipped with a warning. Output without a <document> tag is re-asked
/// once, then raises ParseError.
TemplateResult template_generate(const std::vector<Document>& seed_docs, const TemplateConfig& config,
                                 llm::Provider& provider, const DocCallbacks& callbacks = {});

}  // namespace metasynth::docs
