#include <gtest/gtest.h>

#include <map>
#include <random>
#include <regex>
#include <set>

#include "metasynth/error.hpp"
#include "metasynth/instruction_synthesis.hpp"
#include "test_support.hpp"

using namespace metasynth;
using namespace metasynth::instruct;
using testsupport::expert_call;
using testsupport::words;

namespace {

std::shared_ptr<llm::ScriptedProvider> scripted(const std::vector<std::string>& s) {
  return std::make_shared<llm::ScriptedProvider>(llm::script_of(s));
}

Document source_doc() {
  return make_document("src-doc-0001", "Genetically modified crops and the gut microbiome. " + words(200, "g"),
                       DocumentSource::metasynth, "biomedicine");
}

InstructRunConfig config(std::size_t max_instructions = 5) {
  InstructRunConfig c;
  c.task_description = "Write complex questions about the document.";
  c.max_instructions = max_instructions;
  c.id_prefix = "src-doc-0001";
  return c;
}

std::string present(const std::vector<std::string>& questions, bool end = true) {
  std::string out = "<questions>\n";
  for (const auto& q : questions) out += "<question>" + q + "</question>\n";
  out += "</questions>";
  if (end) out += "\n<END>";
  return out;
}

std::vector<Instruction> make_instructions(std::size_t n) {
  std::vector<Instruction> out;
  for (std::size_t i = 0; i < n; ++i) {
    Instruction ins;
    ins.id = "x-ins-" + std::to_string(1000 + i);
    ins.text = "Explain item " + std::to_string(i) + " in detail.";
    ins.parent_document_id = "x";
    ins.word_count = 5;
    out.push_back(ins);
  }
  return out;
}

std::string oracle_trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \n");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \n") - a + 1);
}

std::vector<std::string> oracle_questions(const std::string& s) {
  static const std::regex re("<question>((?:(?!<question>|</question>)[\\s\\S])*)</question>");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    auto q = oracle_trim((*it)[1].str());
    if (!q.empty()) out.push_back(q);
  }
  return out;
}

}  // namespace

TEST(SynthesizeInstructions, WorkflowReplayEvolvesTheQuestion) {
  const auto replay = testsupport::instruction_workflow();
  auto p = scripted(replay.script);
  const auto r = synthesize_instructions(source_doc(), config(), p, p);
  EXPECT_EQ(r.status, meta::RunStatus::completed);
  ASSERT_EQ(r.instructions.size(), 1u);
  const auto& ins = r.instructions[0];
  EXPECT_EQ(ins.text, replay.final_question);
  EXPECT_EQ(ins.id, "src-doc-0001-ins-0001");
  EXPECT_EQ(ins.parent_document_id, "src-doc-0001");
  EXPECT_EQ(ins.persona, std::optional<std::string>("public health professional"));
  EXPECT_LE(ins.word_count, kInstructionWordLimit);
  std::vector<std::string> actions;
  for (const auto& s : ins.evolution_trace) actions.push_back(s.action);
  const auto c = std::find(actions.begin(), actions.end(), "complicate");
  ASSERT_NE(c, actions.end());
  EXPECT_NE(std::find(c, actions.end(), "edit"), actions.end());
  EXPECT_EQ(actions.front(), "transform");
  EXPECT_EQ(std::count(actions.begin(), actions.end(), "consult"), 2);
  EXPECT_TRUE(r.filtered.empty());
  EXPECT_EQ(p->remaining(), 0u);
}

TEST(SynthesizeInstructions, RejectedWithoutRevisionIsFiltered) {
  const std::string q = "How do crop rotations affect long-term soil carbon across climates?";
  auto p = scripted({
      expert_call("Question Generation Expert", "Write a question."),
      "<question>" + q + "</question>",
      expert_call("Evaluation Expert", "Complex enough?"),
      "VERDICT: REJECT",
      present({q}),
  });
  const auto r = synthesize_instructions(source_doc(), config(), p, p);
  EXPECT_TRUE(r.instructions.empty());
  ASSERT_EQ(r.filtered.size(), 1u);
  EXPECT_NE(r.filtered[0].reason.find("without a Complexity Expert"), std::string::npos);
}

TEST(SynthesizeInstructions, FiltersApplyInOrder) {
  const std::string good = "Compare three approaches to measuring microbiome diversity and their tradeoffs.";
  auto p = scripted({
      expert_call("Agriculture Expert", "Background please."),
      "Background.",
      present({good, good, "Based on the document, what is discussed?", "What would the Agriculture Expert say here?",
               words(121, "long"), "A second valid question about yield variance across regions?"}),
  });
  const auto r = synthesize_instructions(source_doc(), config(1), p, p);
  ASSERT_EQ(r.instructions.size(), 1u);
  EXPECT_EQ(r.instructions[0].text, good);
  std::vector<std::string> reasons;
  for (const auto& f : r.filtered) reasons.push_back(f.reason);
  ASSERT_EQ(reasons.size(), 5u);
  EXPECT_EQ(reasons[0], "duplicate question");
  EXPECT_NE(reasons[1].find("banned phrase"), std::string::npos);
  EXPECT_NE(reasons[2].find("Agriculture Expert"), std::string::npos);
  EXPECT_NE(reasons[3].find("121 words"), std::string::npos);
  EXPECT_NE(reasons[4].find("limit"), std::string::npos);
}

TEST(SynthesizeInstructions, InvalidConfigIsRejected) {
  auto p = scripted({});
  auto c = config();
  c.task_description = " ";
  EXPECT_THROW(synthesize_instructions(source_doc(), c, p, p), ConfigError);
  EXPECT_EQ(p->calls(), 0u);
}

TEST(BannedPhrase, CatchesEveryPlantedViolation) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> plants = {"Based on the document, ", "According to the document, ",
                                           "As a regulator, ", "As an investor, ", "based on the document "};
  const std::vector<std::string> openers = {"", "Given rising rates. ", "Consider this? ", "Context:\n"};
  std::size_t caught = 0;
  const std::size_t trials = 500;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto q = openers[rng() % openers.size()] + plants[rng() % plants.size()] + "what changes?";
    if (banned_phrase(q)) ++caught;
  }
  EXPECT_EQ(caught, trials);
  EXPECT_FALSE(banned_phrase("How has a regulator responded, as a rule?"));
  EXPECT_FALSE(banned_phrase("Compare bonds and equities."));
  EXPECT_FALSE(banned_phrase("Treat the document as authoritative."));
}

TEST(ParseQuestions, MatchesRegexOracleOnRandomMarkup) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> parts = {"<question>", "</question>", "alpha", "beta", " ", "\n", "<q>", "?"};
  for (int t = 0; t < 2000; ++t) {
    std::string s;
    const auto n = rng() % 14;
    for (std::size_t i = 0; i < n; ++i) s += parts[rng() % parts.size()];
    ASSERT_EQ(parse_questions(s), oracle_questions(s)) << s;
  }
}

TEST(ParseQuestions, WarnsOnNestedAndUnclosedTags) {
  std::vector<std::string> w;
  EXPECT_EQ(parse_questions("<question>a<question>b</question> <question>c", &w), (std::vector<std::string>{"b"}));
  EXPECT_EQ(w.size(), 2u);
}

TEST(BuildResponsePrompts, LimitsAndCoverageOverManySamples) {
  std::mt19937_64 rng(3);
  const auto doc = source_doc();
  std::set<PromptFormat> formats;
  std::set<int> limits;
  for (int t = 0; t < 1000; ++t) {
    const auto instructions = make_instructions(1 + rng() % 7);
    const auto seed = rng();
    const auto prompts = build_response_prompts(doc, instructions, seed);
    std::map<std::string, int> seen;
    for (const auto& p : prompts) {
      ASSERT_GE(p.items.size(), 1u);
      ASSERT_LE(p.items.size(), 3u);
      ASSERT_NE(p.prompt.find(doc.text), std::string::npos);
      for (const auto& item : p.items) {
        ++seen[item.instruction_id];
        formats.insert(item.format);
        if (item.format == PromptFormat::constrained_cot) {
          ASSERT_TRUE(item.word_limit);
          ASSERT_GE(*item.word_limit, 50);
          ASSERT_LE(*item.word_limit, 500);
          ASSERT_EQ(*item.word_limit % 50, 0);
          limits.insert(*item.word_limit);
        } else {
          ASSERT_FALSE(item.word_limit);
        }
      }
    }
    for (const auto& ins : instructions) {
      ASSERT_EQ(seen[ins.id], 1) << ins.id;
      bool in_prompt = false;
      for (const auto& p : prompts) in_prompt |= p.prompt.find(ins.text) != std::string::npos;
      ASSERT_TRUE(in_prompt);
    }
    ASSERT_EQ(seen.size(), instructions.size());
    const auto again = build_response_prompts(doc, instructions, seed);
    ASSERT_EQ(again.size(), prompts.size());
    for (std::size_t i = 0; i < again.size(); ++i) ASSERT_EQ(again[i].prompt, prompts[i].prompt);
  }
  EXPECT_EQ(formats.size(), 3u);
  EXPECT_EQ(limits.size(), 10u);
  EXPECT_THROW(build_response_prompts(doc, {}, 1), PreconditionError);
}

TEST(SynthesizeResponses, SplitsAnswerBlocksOrFallsBackToFullReply) {
  ResponsePrompt multi{"p", {{"a", PromptFormat::free_form, std::nullopt}, {"b", PromptFormat::cot, std::nullopt}}};
  llm::ScriptedProvider ok(llm::script_of({"<answer> one </answer><answer>two</answer>", "only one block"}));
  auto r = synthesize_responses({multi, multi}, ok);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[0].response_text, "one");
  EXPECT_EQ(r[1].response_text, "two");
  EXPECT_EQ(r[1].prompt_format, PromptFormat::cot);
  EXPECT_EQ(r[2].response_text, "only one block");
  EXPECT_EQ(r[3].response_text, "only one block");
}

TEST(Judges, StrictParseWithOneReask) {
  llm::ScriptedProvider j(llm::script_of({"1", "The answer is correct: 1", "0", "maybe", "still no"}));
  EXPECT_EQ(judge_accuracy("ctx", "ins", "resp", j).value, "1");
  EXPECT_EQ(judge_relevance("ctx", "ins", "resp", j).value, "0");
  EXPECT_EQ(j.calls(), 3u);
  EXPECT_THROW(judge_accuracy("ctx", "ins", "resp", j), ParseError);
  for (const auto& req : j.captured()) EXPECT_EQ(req.temperature, 0.0);
  const auto reask = j.captured()[2];
  EXPECT_EQ(reask.messages.size(), 3u);
}

TEST(Judges, CategoryMustBeListed) {
  llm::ScriptedProvider j(llm::script_of({"risk management.", "Sports", "Sports"}));
  const std::vector<std::string> cats = {"Risk Management", "Banking"};
  EXPECT_EQ(judge_category(cats, "i", "r", j).value, "Risk Management");
  EXPECT_THROW(judge_category(cats, "i", "r", j), ParseError);
  EXPECT_THROW(judge_category({}, "i", "r", j), PreconditionError);
}

TEST(Judges, ParseJudgeReplyIsStrict) {
  EXPECT_EQ(parse_judge_reply(JudgeKind::accuracy, " 1\n"), std::optional<std::string>("1"));
  EXPECT_FALSE(parse_judge_reply(JudgeKind::accuracy, "10"));
  EXPECT_EQ(parse_judge_reply(JudgeKind::winrate, "Verdict: [[B]]"), std::optional<std::string>("B"));
  EXPECT_FALSE(parse_judge_reply(JudgeKind::winrate, "[[A]] or [[B]]"));
  EXPECT_FALSE(parse_judge_reply(JudgeKind::winrate, "A"));
}

TEST(Winrate, CountsScriptedVerdicts) {
  std::vector<std::string> replies;
  for (int i = 0; i < 40; ++i) replies.push_back("[[A]]");
  for (int i = 0; i < 35; ++i) replies.push_back("[[B]]");
  for (int i = 0; i < 25; ++i) replies.push_back("[[C]]");
  llm::ScriptedProvider j(llm::script_of(replies));
  std::vector<char> outcomes;
  for (int i = 0; i < 100; ++i) outcomes.push_back(judge_winrate("i", "a", "b", j).value[0]);
  const auto r = winrate_report(outcomes);
  EXPECT_EQ(r.a, 40u);
  EXPECT_EQ(r.b, 35u);
  EXPECT_EQ(r.tie, 25u);
  EXPECT_DOUBLE_EQ(r.frac_a, 0.40);
  EXPECT_DOUBLE_EQ(r.frac_b, 0.35);
  EXPECT_NEAR(r.frac_tie, 0.25, 1e-12);
  EXPECT_EQ(r.frac_a + r.frac_b + r.frac_tie, 1.0);
  EXPECT_THROW(winrate_report({}), PreconditionError);
  EXPECT_THROW(winrate_report({'X'}), PreconditionError);
}

TEST(Winrate, PairCountsOnlyConsistentWins) {
  llm::ScriptedProvider j(llm::script_of({"[[A]]", "[[B]]", "[[A]]", "[[A]]", "[[B]]", "[[A]]"}));
  EXPECT_EQ(judge_pair("i", "x", "y", j), 'A');
  EXPECT_EQ(judge_pair("i", "x", "y", j), 'C');
  EXPECT_EQ(judge_pair("i", "x", "y", j), 'B');
  const auto reqs = j.captured();
  EXPECT_NE(reqs[0].messages.back().content.find("x"), std::string::npos);
}
