#include "metasynth/corpus.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "metasynth/error.hpp"
#include "metasynth/text.hpp"

namespace metasynth {

using nlohmann::json;

Document make_document(std::string id, std::string text, DocumentSource source, std::string domain) {
  Document d;
  d.id = std::move(id);
  d.word_count = text::count_words(text);
  d.text = std::move(text);
  d.source = source;
  d.domain = std::move(domain);
  return d;
}

const char* to_string(DocumentSource s) noexcept {
  switch (s) {
    case DocumentSource::metasynth:
      return "metasynth";
    case DocumentSource::template_prompting:
      return "template";
    case DocumentSource::real:
      return "real";
  }
  return "?";
}

const char* to_string(PromptFormat f) noexcept {
  switch (f) {
    case PromptFormat::free_form:
      return "free_form";
    case PromptFormat::cot:
      return "cot";
    case PromptFormat::constrained_cot:
      return "constrained_cot";
  }
  return "?";
}

DocumentSource parse_document_source(std::string_view s) {
  if (s == "metasynth") return DocumentSource::metasynth;
  if (s == "template") return DocumentSource::template_prompting;
  if (s == "real") return DocumentSource::real;
  throw ValidationError("unknown document source '" + std::string(s) + "'");
}

PromptFormat parse_prompt_format(std::string_view s) {
  if (s == "free_form") return PromptFormat::free_form;
  if (s == "cot") return PromptFormat::cot;
  if (s == "constrained_cot") return PromptFormat::constrained_cot;
  throw ValidationError("unknown prompt format '" + std::string(s) + "'");
}

namespace {

template <typename T>
void optional_to_json(json& j, const char* key, const std::optional<T>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

template <typename T>
std::optional<T> optional_from_json(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

void to_json(json& j, const Document& d) {
  j = json{{"id", d.id},
           {"text", d.text},
           {"word_count", d.word_count},
           {"source", to_string(d.source)},
           {"domain", d.domain},
           {"seed_snapshot", d.seed_snapshot}};
  optional_to_json(j, "summary", d.summary);
  optional_to_json(j, "category", d.category);
  j["created_round"] = d.created_round;
}

void from_json(const json& j, Document& d) {
  d.id = j.at("id").get<std::string>();
  d.text = j.at("text").get<std::string>();
  d.word_count = j.at("word_count").get<std::size_t>();
  d.source = parse_document_source(j.at("source").get<std::string>());
  d.domain = j.value("domain", std::string{});
  d.seed_snapshot = j.value("seed_snapshot", std::vector<std::string>{});
  d.summary = optional_from_json<std::string>(j, "summary");
  d.category = optional_from_json<std::string>(j, "category");
  d.created_round = j.value("created_round", std::size_t{0});
}

void to_json(json& j, const EvolutionStep& s) { j = json::array({s.expert, s.action}); }

void from_json(const json& j, EvolutionStep& s) {
  if (j.is_array() && j.size() == 2) {
    s.expert = j[0].get<std::string>();
    s.action = j[1].get<std::string>();
  } else {
    s.expert = j.at("expert").get<std::string>();
    s.action = j.at("action").get<std::string>();
  }
}

void to_json(json& j, const Instruction& i) {
  j = json{{"id", i.id}, {"text", i.text}, {"parent_document_id", i.parent_document_id}};
  optional_to_json(j, "persona", i.persona);
  j["evolution_trace"] = i.evolution_trace;
  j["word_count"] = i.word_count;
}

void from_json(const json& j, Instruction& i) {
  i.id = j.at("id").get<std::string>();
  i.text = j.at("text").get<std::string>();
  i.parent_document_id = j.at("parent_document_id").get<std::string>();
  i.persona = optional_from_json<std::string>(j, "persona");
  i.evolution_trace = j.value("evolution_trace", std::vector<EvolutionStep>{});
  i.word_count = j.at("word_count").get<std::size_t>();
}

void to_json(json& j, const ResponseRecord& r) {
  j = json{{"instruction_id", r.instruction_id}, {"prompt_format", to_string(r.prompt_format)}};
  optional_to_json(j, "word_limit", r.word_limit);
  j["response_text"] = r.response_text;
}

void from_json(const json& j, ResponseRecord& r) {
  r.instruction_id = j.at("instruction_id").get<std::string>();
  r.prompt_format = parse_prompt_format(j.at("prompt_format").get<std::string>());
  r.word_limit = optional_from_json<int>(j, "word_limit");
  r.response_text = j.at("response_text").get<std::string>();
}

void to_json(json& j, const RejectedDraft& r) {
  to_json(j, r.draft);
  j["reason"] = r.reason;
  j["feedback"] = r.feedback;
}

void from_json(const json& j, RejectedDraft& r) {
  from_json(j, r.draft);
  r.reason = j.value("reason", std::string{});
  r.feedback = j.value("feedback", std::string{});
}

void to_json(json& j, const JudgementRecord& r) {
  j = json{{"instruction_id", r.instruction_id}, {"kind", r.kind}, {"value", r.value}};
}

void from_json(const json& j, JudgementRecord& r) {
  r.instruction_id = j.at("instruction_id").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.value = j.at("value").get<std::string>();
}

void validate(const Document& d, const LengthWindow& window) {
  if (d.id.empty()) throw ValidationError("document id is empty");
  const auto measured = text::count_words(d.text);
  if (measured != d.word_count) {
    throw ValidationError("document " + d.id + ": word_count " + std::to_string(d.word_count) +
                          " does not match text (" + std::to_string(measured) + " words)");
  }
  if (d.source != DocumentSource::real && (measured < window.min || measured > window.max)) {
    throw ValidationError("document " + d.id + ": " + std::to_string(measured) +
                          " words outside acceptance window [" + std::to_string(window.min) + ", " +
                          std::to_string(window.max) + "]");
  }
}

void validate(const Instruction& i) {
  if (i.id.empty()) throw ValidationError("instruction id is empty");
  if (i.parent_document_id.empty()) throw ValidationError("instruction " + i.id + " has no parent document");
  const auto measured = text::count_words(i.text);
  if (measured != i.word_count) {
    throw ValidationError("instruction " + i.id + ": word_count does not match text");
  }
  if (measured > kInstructionWordLimit) {
    throw ValidationError("instruction " + i.id + ": " + std::to_string(measured) + " words exceeds " +
                          std::to_string(kInstructionWordLimit));
  }
}

void validate(const ResponseRecord& r) {
  if (r.instruction_id.empty()) throw ValidationError("response has no instruction id");
  const bool constrained = r.prompt_format == PromptFormat::constrained_cot;
  if (constrained != r.word_limit.has_value()) {
    throw ValidationError("response for " + r.instruction_id +
                          ": word_limit must be present exactly for constrained_cot");
  }
  if (r.word_limit && (*r.word_limit < 50 || *r.word_limit > 500 || *r.word_limit % 50 != 0)) {
    throw ValidationError("response for " + r.instruction_id + ": word_limit " + std::to_string(*r.word_limit) +
                          " is not a multiple of 50 in [50, 500]");
  }
}

void validate(const RejectedDraft& r) {
  if (r.draft.id.empty()) throw ValidationError("rejected draft id is empty");
  if (text::count_words(r.draft.text) != r.draft.word_count) {
    throw ValidationError("rejected draft " + r.draft.id + ": word_count does not match text");
  }
}

void validate(const JudgementRecord& r) {
  if (r.instruction_id.empty() || r.kind.empty()) throw ValidationError("judgement is missing fields");
}

void validate_parent_links(const std::vector<Instruction>& instructions, const std::vector<Document>& documents) {
  std::unordered_set<std::string> ids;
  for (const auto& d : documents) ids.insert(d.id);
  for (const auto& i : instructions) {
    if (!ids.count(i.parent_document_id)) {
      throw ValidationError("instruction " + i.id + " refers to unknown document " + i.parent_document_id);
    }
  }
}

LengthCheck validate_length(std::string_view text_in, std::size_t target_words, LengthWindow window) {
  if (window.min > target_words || target_words > window.max) {
    throw PreconditionError("length target must lie inside the window");
  }
  const auto n = text::count_words(text_in);
  return {n, n >= window.min && n <= window.max};
}

namespace {

template <typename Record>
const std::string* record_id(const Record& r) {
  if constexpr (std::is_same_v<Record, Document> || std::is_same_v<Record, Instruction>) {
    return &r.id;
  } else if constexpr (std::is_same_v<Record, RejectedDraft>) {
    return &r.draft.id;
  } else {
    return nullptr;
  }
}

template <typename Record>
void validate_for_io(const Record& r, const LengthWindow& window, bool check_window) {
  if constexpr (std::is_same_v<Record, Document>) {
    if (check_window) {
      validate(r, window);
    } else {
      validate(r, LengthWindow{0, static_cast<std::size_t>(-1)});
    }
  } else {
    validate(r);
  }
}

}  // namespace

template <typename Record>
LoadResult<Record> load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  LoadResult<Record> result;
  result.corpus.path = path;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      Record r = json::parse(line).get<Record>();
      validate_for_io(r, options.window, options.check_length_window);
      if (const auto* id = record_id(r); id && !seen.insert(*id).second) {
        throw ValidationError("duplicate id '" + *id + "'");
      }
      result.corpus.records.push_back(std::move(r));
    } catch (const json::parse_error& e) {
      if (options.strict) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      result.errors.push_back({lineno, e.what()});
    } catch (const std::exception& e) {
      if (options.strict) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      result.errors.push_back({lineno, e.what()});
    }
  }
  return result;
}

template LoadResult<Document> load_corpus(const std::filesystem::path&, const LoadOptions&);
template LoadResult<Instruction> load_corpus(const std::filesystem::path&, const LoadOptions&);
template LoadResult<ResponseRecord> load_corpus(const std::filesystem::path&, const LoadOptions&);
template LoadResult<RejectedDraft> load_corpus(const std::filesystem::path&, const LoadOptions&);
template LoadResult<JudgementRecord> load_corpus(const std::filesystem::path&, const LoadOptions&);

std::vector<std::string> load_texts(const std::filesystem::path& path, std::string_view field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line).at(std::string(field)).get<std::string>());
    } catch (const std::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::mutex& registry_mutex() {
  static std::mutex mu;
  return mu;
}

std::set<std::string>& open_sinks() {
  static std::set<std::string> paths;
  return paths;
}

std::string sink_key(const std::filesystem::path& p) {
  return std::filesystem::weakly_canonical(std::filesystem::absolute(p)).string();
}

}  // namespace

CorpusSink::CorpusSink(std::filesystem::path path) : CorpusSink(std::move(path), Options{}) {}

CorpusSink::CorpusSink(std::filesystem::path path, Options options)
    : path_(std::move(path)), options_(options) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  {
    std::lock_guard lock(registry_mutex());
    if (!open_sinks().insert(sink_key(path_)).second) {
      throw PreconditionError("a corpus sink is already open for " + path_.string());
    }
  }
  if (!options_.truncate && std::filesystem::exists(path_)) {
    // Pick up existing ids so appends keep ids unique across sessions.
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      ++lines_;
      try {
        const auto j = json::parse(line);
        if (j.contains("id") && j["id"].is_string()) ids_.insert(j["id"].get<std::string>());
      } catch (const std::exception&) {
      }
    }
  }
  file_ = std::fopen(path_.c_str(), options_.truncate ? "wb" : "ab");
  if (!file_) {
    std::lock_guard lock(registry_mutex());
    open_sinks().erase(sink_key(path_));
    throw IoError("cannot open " + path_.string() + " for appending");
  }
}

CorpusSink::~CorpusSink() {
  if (file_) std::fclose(file_);
  std::lock_guard lock(registry_mutex());
  open_sinks().erase(sink_key(path_));
}

void CorpusSink::append(const AnyRecord& record) {
  std::string line;
  const std::string* id = nullptr;
  std::visit(
      [&](const auto& r) {
        validate_for_io(r, options_.window, options_.check_length_window);
        id = record_id(r);
        json j = r;
        line = j.dump();
      },
      record);
  line.push_back('\n');

  std::lock_guard lock(mu_);
  if (id && ids_.count(*id)) throw ValidationError("duplicate id '" + *id + "' in " + path_.string());
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw IoError("write failed for " + path_.string());
  }
  if (id) ids_.insert(*id);
  ++lines_;
}

std::size_t CorpusSink::size() const {
  std::lock_guard lock(mu_);
  return lines_;
}

std::filesystem::path meta_path_for(const std::filesystem::path& corpus_path) {
  auto p = corpus_path;
  p += ".meta.json";
  return p;
}

void write_corpus_meta(const std::filesystem::path& corpus_path, const CorpusMeta& meta) {
  const json j{{"domain", meta.domain},
               {"generator_config_hash", meta.generator_config_hash},
               {"created_at", meta.created_at}};
  write_file_atomic(meta_path_for(corpus_path), j.dump(2) + "\n");
}

CorpusMeta read_corpus_meta(const std::filesystem::path& corpus_path) {
  std::ifstream in(meta_path_for(corpus_path));
  if (!in) throw IoError("missing corpus metadata for " + corpus_path.string());
  const auto j = json::parse(in);
  return {j.value("domain", ""), j.value("generator_config_hash", ""), j.value("created_at", "")};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace metasynth
