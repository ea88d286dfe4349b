#include "metasynth/doc_synthesis.hpp"

#include <cstdio>
#include <unordered_set>

#include "metasynth/prompts.hpp"
#include "metasynth/text.hpp"

namespace metasynth::docs {
namespace {

enum class ExpertRole { extraction, expansion, summarizer, analyst, topic, writer };

bool ends_with_icase(std::string_view s, std::string_view suffix) {
  s = text::trim(s);
  return s.size() >= suffix.size() && text::iequals(s.substr(s.size() - suffix.size()), suffix);
}

ExpertRole classify(std::string_view name) {
  if (ends_with_icase(name, "Seed Keyword Extraction Expert")) return ExpertRole::extraction;
  if (ends_with_icase(name, "Seed Keyword Expansion Expert")) return ExpertRole::expansion;
  if (ends_with_icase(name, "Summarizer Expert")) return ExpertRole::summarizer;
  if (ends_with_icase(name, "Content Analyst Expert")) return ExpertRole::analyst;
  if (ends_with_icase(name, "Topic Labeling Expert")) return ExpertRole::topic;
  return ExpertRole::writer;
}

std::string numbered_id(const std::string& prefix, std::string_view kind, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", n);
  return prefix + "-" + std::string(kind) + "-" + buf;
}

std::string normalize_ws(std::string_view s) {
  std::string out;
  for (auto t : text::split_whitespace(s)) {
    if (!out.empty()) out.push_back(' ');
    out.append(t);
  }
  return out;
}

std::vector<std::string> parse_keywords(std::string_view reply) {
  auto tagged = text::extract_tagged(reply, "seed keywords");
  if (!tagged.empty()) return text::parse_list(tagged.back());
  const auto open = reply.find('[');
  if (open == std::string_view::npos) return {};
  const auto close = reply.find(']', open);
  return text::parse_list(reply.substr(open, close == std::string_view::npos ? close : close - open + 1));
}

enum class Verdict { none, distinct, rewrite };

Verdict parse_verdict(std::string_view reply) {
  const auto lower = text::to_lower_ascii(reply);
  const auto pos = lower.rfind("verdict:");
  if (pos == std::string::npos) return Verdict::none;
  const auto rest = text::trim(std::string_view(lower).substr(pos + 8));
  if (rest.rfind("distinct", 0) == 0) return Verdict::distinct;
  if (rest.rfind("rewrite", 0) == 0) return Verdict::rewrite;
  return Verdict::none;
}

std::string lower_trimmed(std::string_view s) { return text::to_lower_ascii(text::trim(s)); }

struct Draft {
  std::string text;
  std::string writer;
  std::optional<std::string> summary;
  Verdict verdict = Verdict::none;
  std::string category;
  std::string feedback;
  bool closed = false;
};

class DocController {
 public:
  DocController(SeedState seeds, const DocRunConfig& config, std::shared_ptr<llm::Provider> experts,
                const DocCallbacks& callbacks)
      : config_(config), experts_(std::move(experts)), callbacks_(callbacks) {
    result_.seeds = std::move(seeds);
  }

  std::string dispatch(const std::string& name, const std::string& instruction) {
    const auto role = classify(name);
    if (!result_.seeds.seed_documents.empty() && !extraction_done_ && role != ExpertRole::extraction) {
      return "This call was not executed. The Seed Keyword Extraction Expert must be consulted first, "
             "with the full texts of all seed documents.";
    }
    switch (role) {
      case ExpertRole::extraction:
        return on_extraction(name, instruction);
      case ExpertRole::expansion:
        return on_expansion(name, instruction);
      case ExpertRole::summarizer:
        return on_summarizer(name, instruction);
      case ExpertRole::analyst:
        return on_analyst(name, instruction);
      case ExpertRole::topic:
        return call(name, instruction);
      case ExpertRole::writer:
        return on_writer(name, instruction);
    }
    return {};
  }

  std::optional<std::string> inject(const meta::ExecutionHistory& history) {
    round_ = history.round();
    std::string out = "Documents presented and accepted so far: " + std::to_string(result_.accepted.size()) +
                      " of " + std::to_string(config_.n_documents) + ".";
    if (!result_.memory.rows.empty()) out += "\nInstance classification table:\n" + result_.memory.render();
    for (auto& note : notes_) out += "\n" + note;
    notes_.clear();
    if (result_.accepted.size() >= config_.n_documents) {
      out += "\nAll requested documents have been presented. Output " + config_.engine.end_token + ".";
    }
    return out;
  }

  void on_payloads(const std::vector<std::string>& payloads) {
    for (const auto& p : payloads) present(p);
  }

  DocRunResult finish(meta::RunStatus status, std::vector<meta::HistoryEntry> transcript) {
    result_.status = status;
    result_.transcript = std::move(transcript);
    return std::move(result_);
  }

 private:
  std::string call(const std::string& name, const std::string& instruction) {
    return experts_
        ->complete(meta::render_expert_prompt(name, instruction, config_.engine.expert_temperature,
                                              prompts::expert_guidance(name)))
        .content;
  }

  std::string on_extraction(const std::string& name, std::string instruction) {
    for (const auto& d : result_.seeds.seed_documents) {
      if (instruction.find(d.text) == std::string::npos) instruction += "\n\n<seed document>\n" + d.text + "\n</seed document>";
    }
    auto reply = call(name, instruction);
    extraction_done_ = true;
    add_keywords(parse_keywords(reply));
    return reply;
  }

  std::string on_expansion(const std::string& name, const std::string& instruction) {
    auto reply = call(name, instruction);
    if (expansions_this_draft_ >= config_.max_expansions_per_draft) {
      notes_.push_back("Seed keyword expansion limit for this draft reached; the suggestions were not added.");
      return reply;
    }
    ++expansions_this_draft_;
    result_.seeds = expand_seeds(std::move(result_.seeds), parse_keywords(reply), round_);
    return reply;
  }

  std::string on_summarizer(const std::string& name, const std::string& instruction) {
    auto reply = call(name, instruction);
    Draft* target = nullptr;
    for (auto it = drafts_.rbegin(); it != drafts_.rend(); ++it) {
      if (!it->closed && instruction.find(std::string(text::trim(it->text))) != std::string::npos) {
        target = &*it;
        break;
      }
    }
    if (!target) target = latest_open();
    const auto summary = std::string(text::trim(reply));
    if (target && !summary.empty()) target->summary = summary;
    return reply;
  }

  std::string on_analyst(const std::string& name, std::string instruction) {
    // Accepted documents are compared by summary only.
    for (std::size_t i = 0; i < result_.accepted.size(); ++i) {
      const auto& full = result_.accepted[i].text;
      if (!full.empty() && instruction.find(full) != std::string::npos) {
        instruction = text::replace_all(std::move(instruction), full, result_.memory.rows[i].summary);
      }
    }
    std::string missing;
    for (const auto& row : result_.memory.rows) {
      if (instruction.find(row.summary) == std::string::npos) missing += "\n- " + row.instance_id + ": " + row.summary;
    }
    if (!missing.empty()) instruction += "\n\nThree-line summaries of the previously accepted documents:" + missing;

    auto reply = call(name, instruction);
    Draft* target = nullptr;
    for (auto it = drafts_.rbegin(); it != drafts_.rend(); ++it) {
      if (!it->closed && it->summary && instruction.find(*it->summary) != std::string::npos) {
        target = &*it;
        break;
      }
    }
    if (!target) target = latest_open();
    if (!target) return reply;

    target->feedback = std::string(text::trim(reply));
    const auto cats = text::extract_tagged(reply, "category");
    if (!cats.empty()) target->category = lower_trimmed(cats.back());
    target->verdict = parse_verdict(reply);
    if (target->verdict == Verdict::rewrite) {
      pending_feedback_ = target->feedback;
      reject(*target, "not sufficiently distinct from previously accepted documents");
    }
    return reply;
  }

  std::string on_writer(const std::string& name, std::string instruction) {
    if (!pending_feedback_.empty()) {
      if (instruction.find(pending_feedback_) == std::string::npos) {
        instruction += "\n\nFeedback from the Content Analyst Expert on the previous draft:\n" + pending_feedback_;
      }
      pending_feedback_.clear();
    }
    auto reply = call(name, instruction);
    const auto trimmed = std::string(text::trim(reply));
    if (!trimmed.empty()) {
      drafts_.push_back({trimmed, name, std::nullopt, Verdict::none, {}, {}, false});
      expansions_this_draft_ = 0;
    }
    return reply;
  }

  Draft* latest_open() {
    for (auto it = drafts_.rbegin(); it != drafts_.rend(); ++it) {
      if (!it->closed) return &*it;
    }
    return nullptr;
  }

  void add_keywords(const std::vector<std::string>& kws) {
    std::unordered_set<std::string> seen;
    for (const auto& k : result_.seeds.keywords) seen.insert(text::to_lower_ascii(k));
    for (const auto& k : kws) {
      if (seen.insert(text::to_lower_ascii(k)).second) result_.seeds.keywords.push_back(k);
    }
  }

  Document make_doc(const std::string& id, const std::string& body) const {
    auto d = make_document(id, body, DocumentSource::metasynth, config_.domain);
    d.seed_snapshot = result_.seeds.keywords;
    d.created_round = round_;
    return d;
  }

  void reject(Draft& draft, std::string reason) {
    draft.closed = true;
    RejectedDraft r{make_doc(numbered_id(config_.id_prefix, "rej", result_.rejected.size() + 1), draft.text),
                    std::move(reason), draft.feedback};
    r.draft.summary = draft.summary;
    if (!draft.category.empty()) r.draft.category = draft.category;
    result_.rejected.push_back(r);
    if (callbacks_.on_rejected) callbacks_.on_rejected(r);
  }

  void present(const std::string& payload) {
    if (result_.accepted.size() >= config_.n_documents) {
      notes_.push_back("A document was presented after all requested documents were accepted; it was ignored.");
      return;
    }
    const auto norm = normalize_ws(payload);
    Draft* match = nullptr;
    for (auto it = drafts_.rbegin(); it != drafts_.rend() && !match; ++it) {
      if (it->text == payload) match = &*it;
    }
    for (auto it = drafts_.rbegin(); it != drafts_.rend() && !match; ++it) {
      if (normalize_ws(it->text) == norm) match = &*it;
    }
    Draft adhoc{payload, "Meta-Expert", std::nullopt, Verdict::none, {}, {}, false};
    Draft& draft = match ? *match : adhoc;

    std::string reason;
    const auto words = text::count_words(payload);
    std::vector<std::string> seeds;
    for (const auto& d : result_.seeds.seed_documents) seeds.push_back(d.text);
    if (!match) {
      reason = "the presented text does not match any draft reviewed by the experts";
    } else if (draft.closed) {
      reason = "the presented draft was already rejected or accepted";
    } else if (draft.verdict != Verdict::distinct) {
      reason = "no DISTINCT verdict from the Content Analyst Expert";
    } else if (!draft.summary) {
      reason = "no three-line summary from the Summarizer Expert";
    } else if (words < config_.window.min || words > config_.window.max) {
      reason = std::to_string(words) + " words is outside the acceptance window [" +
               std::to_string(config_.window.min) + ", " + std::to_string(config_.window.max) + "]";
    } else if (copies_source(payload, seeds, config_.copy_guard_words)) {
      reason = "copies at least " + std::to_string(config_.copy_guard_words) + " consecutive words of a seed document";
    }

    if (!reason.empty()) {
      if (match && draft.closed) {
        notes_.push_back("The document presented in round " + std::to_string(round_) + " was not accepted: " + reason + ".");
        return;
      }
      draft.text = payload;
      reject(draft, reason);
      notes_.push_back("The document presented in round " + std::to_string(round_) + " was not accepted: " + reason + ".");
      return;
    }

    draft.closed = true;
    auto doc = make_doc(numbered_id(config_.id_prefix, "doc", result_.accepted.size() + 1), payload);
    doc.summary = draft.summary;
    doc.category = draft.category.empty() ? std::string("uncategorized") : draft.category;
    validate(doc, config_.window);
    result_.memory.rows.push_back({doc.id, *doc.summary, *doc.category});
    result_.accepted.push_back(doc);
    ++result_.seeds.generation;
    if (callbacks_.on_accepted) callbacks_.on_accepted(doc);
  }

  const DocRunConfig& config_;
  std::shared_ptr<llm::Provider> experts_;
  const DocCallbacks& callbacks_;
  DocRunResult result_;
  std::vector<Draft> drafts_;
  std::vector<std::string> notes_;
  std::string pending_feedback_;
  std::size_t expansions_this_draft_ = 0;
  std::size_t round_ = 1;
  bool extraction_done_ = false;
};

}  // namespace

SeedState expand_seeds(SeedState state, const std::vector<std::string>& suggested, std::size_t round) {
  std::unordered_set<std::string> seen;
  for (const auto& k : state.keywords) seen.insert(text::to_lower_ascii(text::trim(k)));
  ExpansionEvent event{round, {}};
  for (const auto& raw : suggested) {
    const auto k = std::string(text::trim(raw));
    if (k.empty()) continue;
    if (seen.insert(text::to_lower_ascii(k)).second) {
      state.keywords.push_back(k);
      event.added.push_back(k);
    }
  }
  state.expansion_log.push_back(std::move(event));
  return state;
}

std::string InstanceMemory::render() const {
  std::string out;
  for (const auto& r : rows) {
    auto summary = text::replace_all(r.summary, "\n", " / ");
    if (!out.empty()) out += "\n";
    out += "- " + r.instance_id + " [" + r.category + "]: " + summary;
  }
  return out;
}

std::vector<std::string> check(const DocRunConfig& c) {
  auto problems = meta::check(c.engine);
  if (c.n_documents < 1) problems.push_back("n_documents must be at least 1");
  if (c.window.min > c.target_words || c.target_words > c.window.max) {
    problems.push_back("target_words must lie inside the length window");
  }
  if (c.copy_guard_words < 1) problems.push_back("copy_guard_words must be at least 1");
  if (c.id_prefix.empty()) problems.push_back("id_prefix must not be empty");
  return problems;
}

DocRunResult synthesize_documents(SeedState seeds, const DocRunConfig& config,
                                  std::shared_ptr<llm::Provider> meta_model, std::shared_ptr<llm::Provider> experts,
                                  const DocCallbacks& callbacks) {
  if (const auto problems = check(config); !problems.empty()) throw ConfigError(problems);
  if (seeds.keywords.empty() && seeds.seed_documents.empty()) {
    throw PreconditionError("document synthesis needs at least one seed keyword or seed document");
  }
  std::vector<std::string> seed_texts;
  for (const auto& d : seeds.seed_documents) seed_texts.push_back(d.text);
  auto history = meta::init_history(prompts::document_system_prompt(), prompts::document_meta_prompt(),
                                    prompts::document_task(config.domain, config.n_documents),
                                    prompts::seed_block(seeds.keywords, seed_texts), config.engine.round_limit);

  DocController controller(std::move(seeds), config, std::move(experts), callbacks);
  meta::MetaEngine engine(
      std::move(history), config.engine, std::move(meta_model),
      [&controller](const std::string& n, const std::string& i) { return controller.dispatch(n, i); },
      [&controller](const meta::ExecutionHistory& h) { return controller.inject(h); });
  if (callbacks.on_entry) engine.set_entry_observer(callbacks.on_entry);
  const auto status = engine.run([&controller](const std::vector<std::string>& p) { controller.on_payloads(p); });
  return controller.finish(status, engine.history().entries());
}

std::string summarize_instance(std::string_view doc_text, llm::Provider& provider) {
  if (text::trim(doc_text).empty()) throw PreconditionError("cannot summarize an empty document");
  const std::string name = "Summarizer Expert";
  auto reply = provider
                   .complete(meta::render_expert_prompt(name, prompts::summarizer_instruction(doc_text),
                                                        llm::kGenerationTemperature, prompts::expert_guidance(name)))
                   .content;
  auto summary = std::string(text::trim(reply));
  if (summary.empty()) throw ParseError("Summarizer Expert returned an empty summary");
  return summary;
}

bool copies_source(std::string_view body, const std::vector<std::string>& sources, std::size_t min_words) {
  if (min_words == 0) throw PreconditionError("copy guard needs a positive word count");
  const auto words = text::split_whitespace(body);
  if (words.size() < min_words) return false;
  auto window_key = [min_words](const std::vector<std::string_view>& w, std::size_t start) {
    std::string key;
    for (std::size_t i = start; i < start + min_words; ++i) {
      key.append(w[i]);
      key.push_back('\x1f');
    }
    return key;
  };
  std::unordered_set<std::string> windows;
  for (const auto& s : sources) {
    const auto sw = text::split_whitespace(s);
    for (std::size_t i = 0; i + min_words <= sw.size(); ++i) windows.insert(window_key(sw, i));
  }
  if (windows.empty()) return false;
  for (std::size_t i = 0; i + min_words <= words.size(); ++i) {
    if (windows.count(window_key(words, i))) return true;
  }
  return false;
}

TemplateResult template_generate(const std::vector<Document>& seed_docs, const TemplateConfig& config,
                                 llm::Provider& provider, const DocCallbacks& callbacks) {
  if (seed_docs.size() != 5) throw PreconditionError("template prompting needs exactly 5 seed documents");
  if (config.n_documents < 1) throw PreconditionError("n_documents must be at least 1");
  std::vector<std::string> seed_texts;
  for (const auto& d : seed_docs) seed_texts.push_back(d.text);

  TemplateResult result;
  std::vector<std::string> previous;
  auto ask = [&](const std::string& prompt) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      auto reply = provider.complete(llm::user_request(prompt, config.temperature)).content;
      for (auto& p : text::extract_tagged(reply, "document")) {
        auto trimmed = std::string(text::trim(p));
        if (!trimmed.empty()) return trimmed;
      }
    }
    throw ParseError("template prompting output had no <document> tag after one re-ask");
  };

  for (std::size_t k = 1; k <= config.n_documents; ++k) {
    const auto prompt = prompts::template_prompt(config.domain, seed_texts, previous);
    bool produced = false;
    for (int attempt = 0; attempt < 2 && !produced; ++attempt) {
      auto body = ask(prompt);
      const auto words = text::count_words(body);
      std::string reason;
      if (copies_source(body, seed_texts, config.copy_guard_words)) {
        reason = "copies at least " + std::to_string(config.copy_guard_words) + " consecutive words of a seed document";
      } else if (words < config.window.min || words > config.window.max) {
        reason = std::to_string(words) + " words is outside the acceptance window";
      }
      if (!reason.empty()) {
        RejectedDraft r{make_document(numbered_id(config.id_prefix, "tpl-rej", result.rejected.size() + 1), body,
                                      DocumentSource::template_prompting, config.domain),
                        reason, {}};
        r.draft.created_round = k;
        result.rejected.push_back(r);
        if (callbacks.on_rejected) callbacks.on_rejected(r);
        continue;
      }
      auto doc = make_document(numbered_id(config.id_prefix, "tpl", result.documents.size() + 1), body,
                               DocumentSource::template_prompting, config.domain);
      doc.created_round = k;
      validate(doc, config.window);
      previous.push_back(body);
      result.documents.push_back(doc);
      if (callbacks.on_accepted) callbacks.on_accepted(doc);
      produced = true;
    }
    if (!produced) result.warnings.push_back("slot " + std::to_string(k) + " skipped: regeneration also failed");
  }
  return result;
}

}  // namespace metasynth::docs
