#include "metasynth/instruction_synthesis.hpp"

#include <cstdio>
#include <limits>
#include <random>
#include <unordered_set>

#include "metasynth/numeric.hpp"
#include "metasynth/prompts.hpp"
#include "metasynth/text.hpp"

namespace metasynth::instruct {
namespace {

constexpr std::string_view kOpen = "<question>";
constexpr std::string_view kClose = "</question>";

bool ends_with_icase(std::string_view s, std::string_view suffix) {
  s = text::trim(s);
  return s.size() >= suffix.size() && text::iequals(s.substr(s.size() - suffix.size()), suffix);
}

std::string action_for(std::string_view name, std::string_view reply) {
  if (ends_with_icase(name, "Document Transformation Expert")) return "transform";
  if (ends_with_icase(name, "Persona Suggestion Expert")) return "suggest_personas";
  if (ends_with_icase(name, "Question Generation Expert")) return "generate";
  if (ends_with_icase(name, "Complexity Expert")) return "complicate";
  if (ends_with_icase(name, "Question Editor Expert")) return "edit";
  if (ends_with_icase(name, "Evaluation Expert")) {
    const auto lower = text::to_lower_ascii(reply);
    const auto pos = lower.rfind("verdict:");
    if (pos != std::string::npos) {
      const auto rest = text::trim(std::string_view(lower).substr(pos + 8));
      if (rest.rfind("accept", 0) == 0) return "evaluate:accept";
      if (rest.rfind("reject", 0) == 0) return "evaluate:reject";
    }
    return "evaluate";
  }
  return "consult";
}

std::vector<std::string> parse_personas(std::string_view reply) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    auto nl = reply.find('\n', pos);
    auto line = text::trim(reply.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    if (line.size() > 2 && (line.substr(0, 2) == "- " || line.substr(0, 2) == "* ")) {
      auto p = std::string(text::trim(line.substr(2)));
      if (!p.empty()) out.push_back(std::move(p));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (out.empty()) {
    for (auto& p : text::parse_list(reply)) {
      if (text::count_words(p) <= 6) out.push_back(std::move(p));
    }
  }
  return out;
}

std::string numbered_id(const std::string& prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", n);
  return prefix + "-ins-" + buf;
}

class InstructController {
 public:
  InstructController(const Document& doc, const InstructRunConfig& config, std::shared_ptr<llm::Provider> experts)
      : doc_(doc), config_(config), experts_(std::move(experts)) {}

  std::string dispatch(const std::string& name, const std::string& instruction) {
    auto reply = experts_
                     ->complete(meta::render_expert_prompt(name, instruction, config_.engine.expert_temperature,
                                                           prompts::expert_guidance(name)))
                     .content;
    const auto action = action_for(name, reply);
    cycle_.push_back({name, action});
    called_.insert(std::string(text::trim(name)));
    if (action == "suggest_personas") {
      for (auto& p : parse_personas(reply)) personas_.push_back(std::move(p));
    } else if (action == "generate") {
      for (const auto& p : personas_) {
        if (text::icontains(instruction, p)) {
          current_persona_ = p;
          break;
        }
      }
    }
    return reply;
  }

  std::optional<std::string> inject(const meta::ExecutionHistory&) {
    std::string out = "Questions accepted so far: " + std::to_string(result_.instructions.size()) + " (at most " +
                      std::to_string(config_.max_instructions) + ").";
    for (const auto& n : notes_) out += "\n" + n;
    notes_.clear();
    if (result_.instructions.size() >= config_.max_instructions) {
      out += "\nEnough questions have been accepted for this document. Output " + config_.engine.end_token + ".";
    }
    return out;
  }

  void on_payloads(const std::vector<std::string>& payloads) {
    for (const auto& block : payloads) {
      std::vector<std::string> warnings;
      const auto questions = parse_questions(block, &warnings);
      for (auto& w : warnings) notes_.push_back(std::move(w));
      for (const auto& q : questions) consider(q);
    }
    cycle_.clear();
  }

  InstructRunResult finish(meta::RunStatus status, std::vector<meta::HistoryEntry> transcript) {
    result_.status = status;
    result_.transcript = std::move(transcript);
    return std::move(result_);
  }

 private:
  std::optional<std::string> names_mentioned(std::string_view q) const {
    for (const auto& n : called_) {
      if (text::icontains(q, n)) return n;
    }
    for (const auto& p : personas_) {
      if (text::icontains(q, p)) return p;
    }
    return std::nullopt;
  }

  bool evolved() const {
    std::size_t i = 0;
    while (i < cycle_.size() && cycle_[i].action != "evaluate:reject") ++i;
    if (i == cycle_.size()) return true;
    while (i < cycle_.size() && cycle_[i].action != "complicate") ++i;
    while (i < cycle_.size() && cycle_[i].action != "edit") ++i;
    return i < cycle_.size();
  }

  void consider(const std::string& q) {
    std::string reason;
    const auto words = text::count_words(q);
    if (!seen_.insert(q).second) {
      reason = "duplicate question";
    } else if (auto phrase = banned_phrase(q)) {
      reason = "contains banned phrase \"" + *phrase + "\"";
    } else if (auto name = names_mentioned(q)) {
      reason = "mentions expert or persona name \"" + *name + "\"";
    } else if (words > kInstructionWordLimit) {
      reason = std::to_string(words) + " words exceeds " + std::to_string(kInstructionWordLimit);
    } else if (!evolved()) {
      reason = "rejected by the Evaluation Expert without a Complexity Expert and Question Editor Expert revision";
    } else if (result_.instructions.size() >= config_.max_instructions) {
      reason = "instruction limit for this document reached";
    }
    if (!reason.empty()) {
      result_.filtered.push_back({q, reason});
      notes_.push_back("A presented question was not accepted: " + reason + ".");
      return;
    }
    Instruction ins;
    ins.id = numbered_id(config_.id_prefix, result_.instructions.size() + 1);
    ins.text = q;
    ins.parent_document_id = doc_.id;
    ins.persona = current_persona_;
    ins.evolution_trace = cycle_;
    ins.word_count = words;
    validate(ins);
    result_.instructions.push_back(std::move(ins));
  }

  const Document& doc_;
  const InstructRunConfig& config_;
  std::shared_ptr<llm::Provider> experts_;
  InstructRunResult result_;
  std::vector<EvolutionStep> cycle_;
  std::unordered_set<std::string> called_;
  std::vector<std::string> personas_;
  std::optional<std::string> current_persona_;
  std::unordered_set<std::string> seen_;
  std::vector<std::string> notes_;
};

std::string format_instruction(const Instruction& ins, PromptFormat f, std::optional<int> limit) {
  switch (f) {
    case PromptFormat::free_form:
      return prompts::free_form_template(ins.text);
    case PromptFormat::cot:
      return prompts::cot_template(ins.text);
    case PromptFormat::constrained_cot:
      return prompts::constrained_cot_template(ins.text, *limit);
  }
  return ins.text;
}

llm::ChatResponse ask_judge(const llm::ChatRequest& request, llm::Provider& judge, JudgeKind kind,
                            const std::vector<std::string>& categories, std::string& value) {
  auto first = judge.complete(request);
  if (auto v = parse_judge_reply(kind, first.content, categories)) {
    value = *v;
    return first;
  }
  auto retry = request;
  retry.messages.push_back({llm::Role::assistant, first.content});
  retry.messages.push_back({llm::Role::user, "Your reply did not follow the required output format. Reply again, "
                                              "giving only the verdict in the required format."});
  auto second = judge.complete(retry);
  if (auto v = parse_judge_reply(kind, second.content, categories)) {
    value = *v;
    return second;
  }
  throw ParseError(std::string(to_string(kind)) + " judge reply unparseable after re-ask: '" + second.content + "'");
}

JudgeVerdict run_judge(JudgeKind kind, const llm::ChatRequest& request, llm::Provider& judge,
                       const std::vector<std::string>& categories = {}) {
  JudgeVerdict v{kind, {}};
  ask_judge(request, judge, kind, categories, v.value);
  return v;
}

}  // namespace

std::vector<std::string> check(const InstructRunConfig& c) {
  auto problems = meta::check(c.engine);
  if (text::trim(c.task_description).empty()) problems.push_back("task_description must not be empty");
  if (c.max_instructions < 1) problems.push_back("max_instructions must be at least 1");
  if (c.id_prefix.empty()) problems.push_back("id_prefix must not be empty");
  return problems;
}

std::vector<std::string> parse_questions(std::string_view s, std::vector<std::string>* warnings) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto a = s.find(kOpen, pos);
    if (a == std::string_view::npos) break;
    const auto body = a + kOpen.size();
    const auto c = s.find(kClose, body);
    if (c == std::string_view::npos) {
      if (warnings) warnings->push_back("unclosed <question> tag skipped");
      break;
    }
    const auto n = s.find(kOpen, body);
    if (n != std::string_view::npos && n < c) {
      if (warnings) warnings->push_back("<question> tag opened inside another question; outer tag skipped");
      pos = a + 1;
      continue;
    }
    auto q = std::string(text::trim(s.substr(body, c - body)));
    if (!q.empty()) out.push_back(std::move(q));
    pos = c + kClose.size();
  }
  return out;
}

std::optional<std::string> banned_phrase(std::string_view question) {
  const auto lower = text::to_lower_ascii(question);
  for (const char* phrase : {"based on the document", "according to the document"}) {
    if (lower.find(phrase) != std::string::npos) return std::string(phrase);
  }
  // "As a ..." / "As an ..." opening any sentence.
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (lower.compare(i, 3, "as ") != 0) continue;
    std::size_t j = i;
    while (j > 0 && (lower[j - 1] == ' ' || lower[j - 1] == '\t' || lower[j - 1] == '\n' || lower[j - 1] == '\r' ||
                     lower[j - 1] == '"' || lower[j - 1] == '(')) {
      --j;
    }
    const bool sentence_start = j == 0 || lower[j - 1] == '.' || lower[j - 1] == '?' || lower[j - 1] == '!' ||
                                lower[j - 1] == ':' || (j < i && lower.find('\n', j) < i);
    if (!sentence_start) continue;
    const auto rest = std::string_view(lower).substr(i + 3);
    if (rest.rfind("a ", 0) == 0 || rest.rfind("an ", 0) == 0) return std::string("As a");
  }
  return std::nullopt;
}

InstructRunResult synthesize_instructions(const Document& doc, const InstructRunConfig& config,
                                          std::shared_ptr<llm::Provider> meta_model,
                                          std::shared_ptr<llm::Provider> experts, const meta::EntryObserver& on_entry) {
  if (const auto problems = check(config); !problems.empty()) throw ConfigError(problems);
  validate(doc, LengthWindow{0, std::numeric_limits<std::size_t>::max()});
  if (text::trim(doc.text).empty()) throw PreconditionError("document " + doc.id + " has no text");

  auto history = meta::init_history(prompts::instruction_system_prompt(),
                                    prompts::instruction_meta_prompt(config.task_description),
                                    prompts::instruction_task(doc.text),
                                    "<max-questions>" + std::to_string(config.max_instructions) + "</max-questions>",
                                    config.engine.round_limit);
  InstructController controller(doc, config, std::move(experts));
  meta::MetaEngine engine(
      std::move(history), config.engine, std::move(meta_model),
      [&controller](const std::string& n, const std::string& i) { return controller.dispatch(n, i); },
      [&controller](const meta::ExecutionHistory& h) { return controller.inject(h); });
  if (on_entry) engine.set_entry_observer(on_entry);
  const auto status = engine.run([&controller](const std::vector<std::string>& p) { controller.on_payloads(p); });
  return controller.finish(status, engine.history().entries());
}

std::vector<ResponsePrompt> build_response_prompts(const Document& context, const std::vector<Instruction>& instructions,
                                                   std::uint64_t rng_seed) {
  if (instructions.empty()) throw PreconditionError("build_response_prompts needs at least one instruction");
  std::mt19937_64 rng(rng_seed);
  std::vector<PromptItem> items;
  std::vector<std::string> formatted;
  for (const auto& ins : instructions) {
    PromptItem item{ins.id, static_cast<PromptFormat>(uniform_below(rng, 3)), std::nullopt};
    if (item.format == PromptFormat::constrained_cot) item.word_limit = 50 * static_cast<int>(1 + uniform_below(rng, 10));
    formatted.push_back(format_instruction(ins, item.format, item.word_limit));
    items.push_back(std::move(item));
  }
  std::vector<std::size_t> order(instructions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  portable_shuffle(order, rng);

  const std::string head = "<context>\n" + context.text + "\n</context>\n\n";
  std::vector<ResponsePrompt> out;
  std::size_t pos = 0;
  while (pos < order.size()) {
    const auto size = std::min<std::size_t>(order.size() - pos, 1 + uniform_below(rng, 3));
    ResponsePrompt p;
    p.prompt = head;
    if (size == 1) {
      p.prompt += formatted[order[pos]];
      p.items.push_back(items[order[pos]]);
    } else {
      p.prompt += "Respond to each of the following instructions in order. Wrap each response in "
                  "<answer></answer> tags.";
      for (std::size_t k = 0; k < size; ++k) {
        p.prompt += "\n\n" + std::to_string(k + 1) + ". " + formatted[order[pos + k]];
        p.items.push_back(items[order[pos + k]]);
      }
    }
    out.push_back(std::move(p));
    pos += size;
  }
  return out;
}

std::vector<ResponseRecord> synthesize_responses(const std::vector<ResponsePrompt>& prompts_in,
                                                 llm::Provider& provider) {
  std::vector<ResponseRecord> out;
  for (const auto& p : prompts_in) {
    const auto reply = provider.complete(llm::user_request(p.prompt)).content;
    std::vector<std::string> parts;
    if (p.items.size() > 1) {
      for (auto& a : text::extract_tagged(reply, "answer")) parts.emplace_back(text::trim(a));
    }
    for (std::size_t i = 0; i < p.items.size(); ++i) {
      ResponseRecord r;
      r.instruction_id = p.items[i].instruction_id;
      r.prompt_format = p.items[i].format;
      r.word_limit = p.items[i].word_limit;
      r.response_text = parts.size() == p.items.size() ? parts[i] : std::string(text::trim(reply));
      validate(r);
      out.push_back(std::move(r));
    }
  }
  return out;
}

const char* to_string(JudgeKind k) noexcept {
  switch (k) {
    case JudgeKind::accuracy:
      return "accuracy";
    case JudgeKind::relevance:
      return "relevance";
    case JudgeKind::category:
      return "category";
    case JudgeKind::winrate:
      return "winrate";
  }
  return "?";
}

std::optional<std::string> parse_judge_reply(JudgeKind kind, std::string_view reply,
                                             const std::vector<std::string>& categories) {
  const auto t = text::trim(reply);
  switch (kind) {
    case JudgeKind::accuracy:
    case JudgeKind::relevance:
      if (t == "0" || t == "1") return std::string(t);
      return std::nullopt;
    case JudgeKind::winrate: {
      std::optional<std::string> found;
      for (const char* v : {"A", "B", "C"}) {
        if (reply.find(std::string("[[") + v + "]]") != std::string_view::npos) {
          if (found) return std::nullopt;
          found = v;
        }
      }
      return found;
    }
    case JudgeKind::category: {
      auto c = t;
      while (!c.empty() && c.back() == '.') c.remove_suffix(1);
      c = text::trim(c);
      for (const auto& cat : categories) {
        if (text::iequals(c, cat)) return cat;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

JudgeVerdict judge_accuracy(std::string_view context, std::string_view instruction, std::string_view response,
                            llm::Provider& judge) {
  return run_judge(JudgeKind::accuracy,
                   llm::user_request(prompts::accuracy_prompt(context, instruction, response), llm::kJudgeTemperature),
                   judge);
}

JudgeVerdict judge_relevance(std::string_view context, std::string_view instruction, std::string_view response,
                             llm::Provider& judge) {
  return run_judge(JudgeKind::relevance,
                   llm::user_request(prompts::relevance_prompt(context, instruction, response), llm::kJudgeTemperature),
                   judge);
}

JudgeVerdict judge_category(const std::vector<std::string>& categories, std::string_view instruction,
                            std::string_view response, llm::Provider& judge) {
  if (categories.empty()) throw PreconditionError("category judge needs a nonempty category list");
  return run_judge(JudgeKind::category,
                   llm::user_request(prompts::category_prompt(categories, instruction, response), llm::kJudgeTemperature),
                   judge, categories);
}

JudgeVerdict judge_winrate(std::string_view instruction, std::string_view response_a, std::string_view response_b,
                           llm::Provider& judge) {
  return run_judge(JudgeKind::winrate,
                   llm::user_request(prompts::winrate_prompt(instruction, response_a, response_b),
                                     llm::kJudgeTemperature, prompts::winrate_system_prompt()),
                   judge);
}

char judge_pair(std::string_view instruction, std::string_view response_a, std::string_view response_b,
                llm::Provider& judge) {
  const auto first = judge_winrate(instruction, response_a, response_b, judge).value;
  const auto second = judge_winrate(instruction, response_b, response_a, judge).value;
  if (first == "A" && second == "B") return 'A';
  if (first == "B" && second == "A") return 'B';
  return 'C';
}

WinrateReport winrate_report(const std::vector<char>& outcomes) {
  if (outcomes.empty()) throw PreconditionError("winrate report needs at least one outcome");
  WinrateReport r;
  for (char c : outcomes) {
    if (c == 'A') {
      ++r.a;
    } else if (c == 'B') {
      ++r.b;
    } else if (c == 'C') {
      ++r.tie;
    } else {
      throw PreconditionError(std::string("unknown winrate outcome '") + c + "'");
    }
  }
  const auto n = static_cast<double>(outcomes.size());
  r.frac_a = static_cast<double>(r.a) / n;
  r.frac_b = static_cast<double>(r.b) / n;
  r.frac_tie = 1.0 - (r.frac_a + r.frac_b);
  return r;
}

}  // namespace metasynth::instruct
