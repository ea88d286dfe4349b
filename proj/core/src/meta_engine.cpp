#include "metasynth/meta_engine.hpp"

#include <fstream>

#include "metasynth/corpus.hpp"
#include "metasynth/prompts.hpp"
#include "metasynth/text.hpp"

namespace metasynth::meta {

using nlohmann::json;

const char* to_string(EntryKind k) noexcept {
  switch (k) {
    case EntryKind::initial_task:
      return "initial_task";
    case EntryKind::meta_output:
      return "meta_output";
    case EntryKind::expert_result:
      return "expert_result";
    case EntryKind::injected_instruction:
      return "injected_instruction";
    case EntryKind::error:
      return "error";
  }
  return "?";
}

EntryKind parse_entry_kind(std::string_view s) {
  for (auto k : {EntryKind::initial_task, EntryKind::meta_output, EntryKind::expert_result,
                 EntryKind::injected_instruction, EntryKind::error}) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown history entry kind '" + std::string(s) + "'");
}

void to_json(json& j, const HistoryEntry& e) {
  j = json{{"round", e.round}, {"kind", to_string(e.kind)}, {"content", e.content}};
}

void from_json(const json& j, HistoryEntry& e) {
  e.round = j.at("round").get<std::size_t>();
  e.kind = parse_entry_kind(j.at("kind").get<std::string>());
  e.content = j.at("content").get<std::string>();
}

ExecutionHistory::ExecutionHistory(std::string initial_task, std::size_t round_limit) : round_limit_(round_limit) {
  if (round_limit == 0) throw PreconditionError("round limit must be positive");
  chars_ = initial_task.size();
  entries_.push_back({EntryKind::initial_task, std::move(initial_task), 1});
}

void ExecutionHistory::append(EntryKind kind, std::string content) {
  if (kind == EntryKind::initial_task) throw PreconditionError("only the first entry may be the initial task");
  chars_ += content.size();
  entries_.push_back({kind, std::move(content), round_});
}

bool ExecutionHistory::advance_round() {
  if (round_ >= round_limit_) return false;
  ++round_;
  return true;
}

llm::ChatRequest ExecutionHistory::to_request(double temperature) const {
  llm::ChatRequest req;
  req.temperature = temperature;
  for (const auto& e : entries_) {
    const auto role = e.kind == EntryKind::meta_output ? llm::Role::assistant : llm::Role::user;
    if (!req.messages.empty() && req.messages.back().role == role) {
      req.messages.back().content += "\n\n" + e.content;
    } else {
      req.messages.push_back({role, e.content});
    }
  }
  return req;
}

EngineConfig EngineConfig::for_documents() {
  EngineConfig c;
  c.round_limit = 256;
  c.answer_tags = {"document"};
  c.required_expert_names = {"Seed Keyword Extraction Expert", "Summarizer Expert", "Content Analyst Expert",
                             "Seed Keyword Expansion Expert", "Domain Expert"};
  return c;
}

EngineConfig EngineConfig::for_instructions() {
  EngineConfig c;
  c.round_limit = 128;
  c.answer_tags = {"questions"};
  c.required_expert_names = {"Document Transformation Expert", "Persona Suggestion Expert",
                             "Question Generation Expert",     "Evaluation Expert",
                             "Complexity Expert",              "Question Editor Expert"};
  return c;
}

std::vector<std::string> check(const EngineConfig& c) {
  std::vector<std::string> problems;
  if (c.round_limit == 0) problems.push_back("engine.round_limit must be positive");
  if (c.max_error_retries < 1) problems.push_back("engine.max_error_retries must be at least 1");
  if (c.answer_tags.empty()) problems.push_back("engine.answer_tags must not be empty");
  if (c.end_token.empty()) problems.push_back("engine.end_token must not be empty");
  return problems;
}

void to_json(json& j, const EngineConfig& c) {
  j = json{{"round_limit", c.round_limit},
           {"max_error_retries", c.max_error_retries},
           {"required_expert_names", c.required_expert_names},
           {"answer_tags", c.answer_tags},
           {"end_token", c.end_token},
           {"expert_aliases", c.expert_aliases},
           {"max_history_chars", c.max_history_chars},
           {"meta_temperature", c.meta_temperature},
           {"expert_temperature", c.expert_temperature}};
}

void from_json(const json& j, EngineConfig& c) {
  c.round_limit = j.value("round_limit", c.round_limit);
  c.max_error_retries = j.value("max_error_retries", c.max_error_retries);
  c.required_expert_names = j.value("required_expert_names", c.required_expert_names);
  c.answer_tags = j.value("answer_tags", c.answer_tags);
  c.end_token = j.value("end_token", c.end_token);
  c.expert_aliases = j.value("expert_aliases", c.expert_aliases);
  c.max_history_chars = j.value("max_history_chars", c.max_history_chars);
  c.meta_temperature = j.value("meta_temperature", c.meta_temperature);
  c.expert_temperature = j.value("expert_temperature", c.expert_temperature);
}

ExecutionHistory init_history(std::string_view system_prompt, std::string_view meta_prompt,
                              std::string_view task_description, std::string_view seeds, std::size_t round_limit) {
  if (text::trim(system_prompt).empty() || text::trim(meta_prompt).empty() || text::trim(task_description).empty() ||
      text::trim(seeds).empty()) {
    throw PreconditionError("init_history requires nonempty system prompt, meta prompt, task and seeds");
  }
  std::string content;
  content.append(system_prompt).append("\n\n");
  content.append(meta_prompt).append("\n\n");
  content.append(task_description).append("\n\n");
  content.append(seeds);
  return ExecutionHistory(std::move(content), round_limit);
}

namespace {

constexpr std::string_view kTripleQuote = "\"\"\"";

struct QuotedBlock {
  std::size_t open = 0;   // index of opening quotes
  std::size_t close = 0;  // index of closing quotes, npos if unterminated
};

std::vector<QuotedBlock> quoted_blocks(std::string_view text) {
  std::vector<QuotedBlock> out;
  std::size_t pos = 0;
  while (true) {
    const auto a = text.find(kTripleQuote, pos);
    if (a == std::string_view::npos) break;
    const auto b = text.find(kTripleQuote, a + kTripleQuote.size());
    out.push_back({a, b});
    if (b == std::string_view::npos) break;
    pos = b + kTripleQuote.size();
  }
  return out;
}

std::string outside_quotes(std::string_view text, const std::vector<QuotedBlock>& blocks) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& b : blocks) {
    out.append(text.substr(pos, b.open - pos));
    out.push_back('\n');
    if (b.close == std::string_view::npos) return out;
    pos = b.close + kTripleQuote.size();
  }
  out.append(text.substr(pos));
  return out;
}

bool name_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '/' || c == ' ';
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    out.push_back(c);
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

bool ends_with_icase(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && text::iequals(s.substr(s.size() - suffix.size()), suffix);
}

// Finds the expert name written before a triple-quoted block: the text on
// the same line (or the previous nonblank line) ending in ':'.
std::optional<std::string> name_before(std::string_view text, std::size_t open,
                                       const std::vector<std::string>& aliases) {
  auto before = text.substr(0, open);
  auto nl = before.rfind('\n');
  auto segment = text::trim(nl == std::string_view::npos ? before : before.substr(nl + 1));
  // The name may sit alone on an earlier line.
  while (segment.empty() && nl != std::string_view::npos) {
    before = before.substr(0, nl);
    nl = before.rfind('\n');
    segment = text::trim(nl == std::string_view::npos ? before : before.substr(nl + 1));
  }
  while (!segment.empty() && (segment.back() == '*' || segment.back() == ' ')) segment.remove_suffix(1);
  if (segment.empty() || segment.back() != ':') return std::nullopt;
  segment.remove_suffix(1);
  while (!segment.empty() && (segment.back() == '*' || segment.back() == ' ')) segment.remove_suffix(1);

  for (const auto& alias : aliases) {
    if (!alias.empty() && ends_with_icase(segment, alias)) return alias;
  }
  std::size_t start = segment.size();
  while (start > 0 && name_char(segment[start - 1])) --start;
  auto name = collapse_spaces(text::trim(segment.substr(start)));
  if (!is_expert_name(name)) return std::nullopt;
  return name;
}

}  // namespace

bool is_expert_name(std::string_view name, const std::vector<std::string>& aliases) {
  for (const auto& a : aliases) {
    if (text::iequals(name, a)) return true;
  }
  constexpr std::string_view kSuffix = " Expert";
  if (name.size() <= kSuffix.size() || !ends_with_icase(name, kSuffix)) return false;
  bool has_letter = false;
  for (char c : name.substr(0, name.size() - kSuffix.size())) {
    if (!name_char(c)) return false;
    if (c != ' ' && c != '/') has_letter = true;
  }
  return has_letter;
}

MetaAction parse_meta_output(std::string_view text_in, const EngineConfig& config) {
  const auto blocks = quoted_blocks(text_in);
  const auto outside = outside_quotes(text_in, blocks);

  std::vector<std::string> payloads;
  for (const auto& tag : config.answer_tags) {
    for (auto& p : text::extract_tagged(outside, tag)) {
      auto trimmed = std::string(text::trim(p));
      if (!trimmed.empty()) payloads.push_back(std::move(trimmed));
    }
  }
  const bool has_end = !config.end_token.empty() && text::icontains(outside, config.end_token);
  if (has_end && payloads.empty()) return End{};
  if (!payloads.empty()) return FinalAnswer{std::move(payloads), has_end};

  std::vector<ExpertCall> calls;
  bool unterminated = false;
  bool empty_instruction = false;
  for (const auto& b : blocks) {
    if (b.close == std::string_view::npos) {
      unterminated = true;
      break;
    }
    auto name = name_before(text_in, b.open, config.expert_aliases);
    if (!name) continue;
    const auto body = text_in.substr(b.open + kTripleQuote.size(), b.close - b.open - kTripleQuote.size());
    auto instruction = std::string(text::trim(body));
    if (instruction.empty()) {
      empty_instruction = true;
      continue;
    }
    calls.push_back({std::move(*name), std::move(instruction), 0});
  }
  if (!calls.empty()) {
    auto first = std::move(calls.front());
    first.ignored_calls = calls.size() - 1;
    return first;
  }
  if (empty_instruction) return FormatError{"expert call has an empty instruction"};
  if (unterminated) return FormatError{"unterminated triple-quoted block"};
  return FormatError{"no expert call, final answer or end token found"};
}

llm::ChatRequest render_expert_prompt(std::string_view expert_name, std::string_view instruction, double temperature,
                                      std::string_view guidance) {
  if (text::trim(expert_name).empty() || text::trim(instruction).empty()) {
    throw PreconditionError("expert prompts need a name and an instruction");
  }
  std::string system = "You are " + std::string(text::trim(expert_name)) +
                       ". You have no memory of earlier conversations; everything you need is in the message "
                       "below. Respond to it directly and completely.";
  if (!guidance.empty()) system.append("\n").append(guidance);
  return llm::user_request(std::string(instruction), temperature, std::move(system));
}

std::string format_expert_result(std::string_view expert_name, std::string_view reply) {
  std::string out(expert_name);
  out.append("'s output:\n\"\"\"\n").append(reply).append("\n\"\"\"");
  return out;
}

std::string format_error_message(std::string_view reason, const EngineConfig& config) {
  std::string tags;
  for (const auto& t : config.answer_tags) tags += "<" + t + ">...</" + t + "> ";
  return "Error: " + std::string(reason) +
         ". Either call exactly one expert using the format Expert Name: \"\"\"detailed instructions\"\"\", "
         "present a confirmed answer as " +
         tags + "or output " + config.end_token + " when all answers have been presented.";
}

const char* to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::running:
      return "running";
    case RunStatus::completed:
      return "completed";
    case RunStatus::discarded:
      return "discarded";
    case RunStatus::incomplete:
      return "incomplete";
    case RunStatus::context_overflow:
      return "context_overflow";
  }
  return "?";
}

ExpertDispatcher provider_dispatcher(std::shared_ptr<llm::Provider> provider, double temperature) {
  return [provider = std::move(provider), temperature](const std::string& name, const std::string& instruction) {
    return provider->complete(render_expert_prompt(name, instruction, temperature, prompts::expert_guidance(name))).content;
  };
}

MetaEngine::MetaEngine(ExecutionHistory history, EngineConfig config, std::shared_ptr<llm::Provider> meta_model,
                       ExpertDispatcher dispatcher, InjectionHook injection)
    : history_(std::move(history)),
      config_(std::move(config)),
      meta_model_(std::move(meta_model)),
      dispatcher_(std::move(dispatcher)),
      injection_(std::move(injection)) {
  if (const auto problems = check(config_); !problems.empty()) throw ConfigError(problems);
  if (history_.round_limit() != config_.round_limit) {
    throw PreconditionError("history round limit does not match engine config");
  }
}

void MetaEngine::set_entry_observer(EntryObserver observer) {
  observer_ = std::move(observer);
  if (observer_) {
    for (const auto& e : history_.entries()) observer_(e);
  }
}

void MetaEngine::append(EntryKind kind, std::string content) {
  history_.append(kind, std::move(content));
  if (observer_) observer_(history_.entries().back());
}

void MetaEngine::finish_round() {
  if (status_ != RunStatus::running) return;
  if (!history_.advance_round()) status_ = end_pending_ ? RunStatus::completed : RunStatus::incomplete;
}

RoundResult MetaEngine::run_round() {
  RoundResult result;
  if (status_ != RunStatus::running) {
    result.status = status_;
    return result;
  }
  if (end_pending_) {
    status_ = RunStatus::completed;
    result.status = status_;
    return result;
  }

  if (injection_) {
    if (auto injected = injection_(history_); injected && !injected->empty()) {
      append(EntryKind::injected_instruction, std::move(*injected));
    }
  }
  if (history_.entries().back().kind == EntryKind::meta_output) {
    append(EntryKind::injected_instruction, "Continue with the next step.");
  }
  if (config_.max_history_chars > 0 && history_.total_chars() > config_.max_history_chars) {
    status_ = RunStatus::context_overflow;
    result.status = status_;
    return result;
  }

  auto output = meta_model_->complete(history_.to_request(config_.meta_temperature)).content;
  auto action = parse_meta_output(output, config_);
  append(EntryKind::meta_output, std::move(output));

  if (auto* call = std::get_if<ExpertCall>(&action)) {
    consecutive_errors_ = 0;
    auto reply = dispatcher_(call->name, call->instruction);
    append(EntryKind::expert_result, format_expert_result(call->name, reply));
    if (call->ignored_calls > 0) {
      append(EntryKind::injected_instruction,
             "Note: only the first expert call (" + call->name + ") was executed; " +
                 std::to_string(call->ignored_calls) +
                 " further call(s) were ignored. Interact with one expert at a time.");
    }
  } else if (auto* answer = std::get_if<FinalAnswer>(&action)) {
    consecutive_errors_ = 0;
    result.payloads = std::move(answer->payloads);
    end_pending_ = answer->end_follows;
  } else if (std::holds_alternative<End>(action)) {
    status_ = RunStatus::completed;
  } else {
    const auto& err = std::get<FormatError>(action);
    append(EntryKind::error, format_error_message(err.reason, config_));
    if (++consecutive_errors_ >= config_.max_error_retries) status_ = RunStatus::discarded;
  }

  finish_round();
  result.status = status_;
  return result;
}

RunStatus MetaEngine::run(const std::function<void(const std::vector<std::string>&)>& sink) {
  while (status_ == RunStatus::running) {
    auto r = run_round();
    if (!r.payloads.empty() && sink) sink(r.payloads);
  }
  return status_;
}

void write_transcript(const std::filesystem::path& path, const std::vector<HistoryEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += json(e).dump() + "\n";
  write_file_atomic(path, out);
}

std::vector<HistoryEntry> read_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open transcript " + path.string());
  std::vector<HistoryEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(json::parse(line).get<HistoryEntry>());
  }
  return out;
}

}  // namespace metasynth::meta
