#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace metasynth {

enum class DocumentSource { metasynth, template_prompting, real };

struct LengthWindow {
  std::size_t min = 200;
  std::size_t max = 520;
};

/// Instructions may exceed the 100-word prompt target up to this slack.
inline constexpr std::size_t kInstructionWordLimit = 120;

struct Document {
  std::string id;
  std::string text;
  std::size_t word_count = 0;
  DocumentSource source = DocumentSource::metasynth;
  std::string domain;
  std::vector<std::string> seed_snapshot;
  std::optional<std::string> summary;
  std::optional<std::string> category;
  std::size_t created_round = 0;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Builds a document with word_count derived from the text.
Document make_document(std::string id, std::string text, DocumentSource source, std::string domain);

struct EvolutionStep {
  std::string expert;
  std::string action;

  friend bool operator==(const EvolutionStep&, const EvolutionStep&) = default;
};

struct Instruction {
  std::string id;
  std::string text;
  std::string parent_document_id;
  std::optional<std::string> persona;
  std::vector<EvolutionStep> evolution_trace;
  std::size_t word_count = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

enum class PromptFormat { free_form, cot, constrained_cot };

struct ResponseRecord {
  std::string instruction_id;
  PromptFormat prompt_format = PromptFormat::free_form;
  std::optional<int> word_limit;
  std::string response_text;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

/// A draft the agents declined, with the feedback that rejected it.
struct RejectedDraft {
  Document draft;
  std::string reason;
  std::string feedback;

  friend bool operator==(const RejectedDraft&, const RejectedDraft&) = default;
};

/// One judge decision, persisted to judgements.jsonl.
struct JudgementRecord {
  std::string instruction_id;
  std::string kind;
  std::string value;

  friend bool operator==(const JudgementRecord&, const JudgementRecord&) = default;
};

const char* to_string(DocumentSource s) noexcept;
const char* to_string(PromptFormat f) noexcept;
DocumentSource parse_document_source(std::string_view s);
PromptFormat parse_prompt_format(std::string_view s);

void to_json(nlohmann::json& j, const Document& d);
void from_json(const nlohmann::json& j, Document& d);
void to_json(nlohmann::json& j, const EvolutionStep& s);
void from_json(const nlohmann::json& j, EvolutionStep& s);
void to_json(nlohmann::json& j, const Instruction& i);
void from_json(const nlohmann::json& j, Instruction& i);
void to_json(nlohmann::json& j, const ResponseRecord& r);
void from_json(const nlohmann::json& j, ResponseRecord& r);
void to_json(nlohmann::json& j, const RejectedDraft& r);
void from_json(const nlohmann::json& j, RejectedDraft& r);
void to_json(nlohmann::json& j, const JudgementRecord& r);
void from_json(const nlohmann::json& j, JudgementRecord& r);

// Invariant checks. Each throws ValidationError naming the violated rule.
void validate(const Document& d, const LengthWindow& window = {});
void validate(const Instruction& i);
void validate(const ResponseRecord& r);
void validate(const RejectedDraft& r);
void validate(const JudgementRecord& r);

/// Throws ValidationError if any instruction's parent is not in `documents`.
void validate_parent_links(const std::vector<Instruction>& instructions,
                           const std::vector<Document>& documents);

struct LengthCheck {
  std::size_t count = 0;
  bool pass = false;
};

LengthCheck validate_length(std::string_view text, std::size_t target_words, LengthWindow window);

/// Reader-side record kinds.
enum class RecordKind { document, instruction, response, rejected_draft, judgement };

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename Record>
struct Corpus {
  std::vector<Record> records;
  std::filesystem::path path;
};

template <typename Record>
struct LoadResult {
  Corpus<Record> corpus;
  std::vector<LineError> errors;
};

struct LoadOptions {
  bool strict = false;
  LengthWindow window{};
  /// Documents: enforce the length window for generated sources.
  bool check_length_window = true;
};

/// Reads a JSONL corpus. Malformed lines are collected with their line
/// numbers unless `strict`, in which case the first one throws.
template <typename Record>
LoadResult<Record> load_corpus(const std::filesystem::path& path, const LoadOptions& options = {});

extern template LoadResult<Document> load_corpus(const std::filesystem::path&, const LoadOptions&);
extern template LoadResult<Instruction> load_corpus(const std::filesystem::path&, const LoadOptions&);
extern template LoadResult<ResponseRecord> load_corpus(const std::filesystem::path&, const LoadOptions&);
extern template LoadResult<RejectedDraft> load_corpus(const std::filesystem::path&, const LoadOptions&);
extern template LoadResult<JudgementRecord> load_corpus(const std::filesystem::path&, const LoadOptions&);

/// Loads any JSONL file and returns the "text" field of each line.
std::vector<std::string> load_texts(const std::filesystem::path& path, std::string_view field = "text");

using AnyRecord = std::variant<Document, Instruction, ResponseRecord, RejectedDraft, JudgementRecord>;

/// Append-only JSONL writer. One sink per file per process; appends from
/// many threads are serialized and each record lands as one whole line.
class CorpusSink {
 public:
  struct Options {
    LengthWindow window{};
    bool check_length_window = true;
    /// Truncate instead of appending to existing content.
    bool truncate = false;
  };

  explicit CorpusSink(std::filesystem::path path);
  CorpusSink(std::filesystem::path path, Options options);
  ~CorpusSink();

  CorpusSink(const CorpusSink&) = delete;
  CorpusSink& operator=(const CorpusSink&) = delete;

  /// Validates, then writes and flushes one line. Duplicate ids are rejected.
  void append(const AnyRecord& record);

  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  Options options_;
  mutable std::mutex mu_;
  std::FILE* file_ = nullptr;
  std::unordered_set<std::string> ids_;
  std::size_t lines_ = 0;
};

struct CorpusMeta {
  std::string domain;
  std::string generator_config_hash;
  std::string created_at;  // ISO-8601 UTC
};

std::filesystem::path meta_path_for(const std::filesystem::path& corpus_path);
void write_corpus_meta(const std::filesystem::path& corpus_path, const CorpusMeta& meta);
CorpusMeta read_corpus_meta(const std::filesystem::path& corpus_path);

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

/// Writes `content` to a temp file next to `path` and renames over it.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace metasynth
