// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Tolerances and time limits are pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "metasynth/contamination.hpp"
#include "metasynth/diversity.hpp"
#include "metasynth/doc_synthesis.hpp"
#include "metasynth/instruction_synthesis.hpp"
#include "metasynth/meta_engine.hpp"
#include "metasynth/pipeline.hpp"
#include "metasynth/seed_selection.hpp"
#include "test_support.hpp"

#ifndef METASYNTH_CLI_PATH
#error "METASYNTH_CLI_PATH must point at the metasynth executable"
#endif

using namespace metasynth;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kOracleTolerance = 1e-12;
constexpr double kCoverageLow = 0.90;
constexpr double kCoverageHigh = 0.99;

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::shared_ptr<llm::ScriptedProvider> scripted(const std::vector<std::string>& s) {
  return std::make_shared<llm::ScriptedProvider>(llm::script_of(s));
}

Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(1);
  for (int t = 0; t < 1000 && o.ok; ++t) {
    const auto v = testsupport::random_vectors(rng, 2 + rng() % 99, 2 + rng() % 63);
    o.require(std::abs(diversity::remote_clique(v) - testsupport::oracle_remote_clique(v)) <= kOracleTolerance,
              "remote_clique differs from oracle in set " + std::to_string(t));
    o.require(std::abs(diversity::chamfer(v) - testsupport::oracle_chamfer(v)) <= kOracleTolerance,
              "chamfer differs from oracle in set " + std::to_string(t));
    o.require(std::abs(diversity::task2vec_coefficient(v) - testsupport::oracle_task2vec(v)) <= kOracleTolerance,
              "task2vec_coefficient differs from oracle in set " + std::to_string(t));
  }
  if (o.ok) o.detail = "1000 fuzzed sets within 1e-12";
  return o;
}

Outcome ngram_hand_check() {
  Outcome o;
  o.require(diversity::ngram_diversity({"a b a b"}, 1) == 0.5, "1-GD of 'a b a b' is not 0.5");
  o.require(diversity::ngram_diversity({"a b a b"}, 2) == 2.0 / 3.0, "2-GD of 'a b a b' is not 2/3");
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100 && o.ok; ++t) {
    std::vector<std::string> c;
    for (std::size_t i = 0, n = 1 + rng() % 10; i < n; ++i) c.push_back(testsupport::random_toy_text(rng, 4 + rng() % 40, 25));
    double expect = 0;
    for (std::size_t n = 1; n <= 4; ++n) expect += testsupport::oracle_ngram_diversity(c, n);
    o.require(std::abs(diversity::ngd_sum(c) - expect) <= kOracleTolerance, "ngd_sum differs on corpus " + std::to_string(t));
  }
  if (o.ok) o.detail = "hand values exact; 100 corpora match the counting oracle";
  return o;
}

Outcome compression_directionality() {
  Outcome o;
  std::mt19937_64 rng(3);
  std::vector<std::string> probe;
  for (int i = 0; i < 20; ++i) probe.push_back(testsupport::random_toy_text(rng, 50, 200));
  const double first = diversity::compression_ratio(probe);
  for (int r = 0; r < 9; ++r) o.require(diversity::compression_ratio(probe) == first, "CR differs between runs");
  for (int t = 0; t < 50 && o.ok; ++t) {
    std::vector<std::string> base;
    for (std::size_t i = 0, n = 2 + rng() % 10; i < n; ++i) base.push_back(testsupport::random_toy_text(rng, 10 + rng() % 60, 50));
    std::vector<std::string> dup;
    for (int k = 0; k < 5; ++k) dup.insert(dup.end(), base.begin(), base.end());
    o.require(diversity::compression_ratio(dup) > diversity::compression_ratio(base),
              "5x duplication did not raise CR on corpus " + std::to_string(t));
    o.require(diversity::ngram_diversity(dup, 4) < diversity::ngram_diversity(base, 4),
              "5x duplication did not lower 4-GD on corpus " + std::to_string(t));
  }
  if (o.ok) o.detail = "bit-identical over 10 runs; 50/50 corpora directional";
  return o;
}

Outcome bootstrap_coverage() {
  Outcome o;
  constexpr double mu = 5.0;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(mu, 3.0);
  int covered = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x(1000);
    for (auto& v : x) v = g(rng);
    const auto ci = diversity::bootstrap_ci(x, 1000, 0.95, 1000 + static_cast<std::uint64_t>(t));
    covered += ci.lo <= mu && mu <= ci.hi;
  }
  const double cov = static_cast<double>(covered) / trials;
  o.require(cov >= kCoverageLow && cov <= kCoverageHigh, "coverage " + std::to_string(cov) + " outside [0.90, 0.99]");
  if (o.ok) o.detail = "coverage " + std::to_string(cov);
  return o;
}

Outcome contamination_checks() {
  Outcome o;
  std::mt19937_64 rng(5);
  const std::vector<std::size_t> ns = {1, 2, 3, 5, 10};
  for (int t = 0; t < 200 && o.ok; ++t) {
    const auto vocab = 3 + rng() % 15;
    std::vector<std::string> refs, targets;
    for (std::size_t i = 0, n = 1 + rng() % 8; i < n; ++i) refs.push_back(testsupport::random_toy_text(rng, rng() % 20, vocab));
    for (std::size_t i = 0, n = 1 + rng() % 5; i < n; ++i) targets.push_back(testsupport::random_toy_text(rng, rng() % 40, vocab));
    const auto r = contamination::em_overlap(refs, targets, ns);
    for (std::size_t k = 0; k < ns.size(); ++k) {
      if (k) o.require(r.fractions[k] <= r.fractions[k - 1], "EM-n not monotone in case " + std::to_string(t));
      std::size_t oracle = 0;
      for (const auto& ref : refs) oracle += testsupport::oracle_contaminated(ref, targets, ns[k]);
      o.require(r.contaminated[k] == oracle, "hash index disagrees with quadratic scan in case " + std::to_string(t));
    }
  }
  // Planted overlaps are all found.
  std::vector<std::string> refs, targets;
  for (int i = 0; i < 100; ++i) refs.push_back(testsupport::words(15, "r" + std::to_string(i) + "x"));
  for (int i = 0; i < 100; ++i) targets.push_back("prefix " + refs[static_cast<std::size_t>(i)] + " suffix");
  o.require(contamination::em_overlap(refs, targets, {10}).fractions[0] == 1.0, "planted recall below 100%");
  // Clean corpora score zero.
  std::vector<std::string> clean;
  for (int i = 0; i < 100; ++i) clean.push_back(testsupport::words(200, "t" + std::to_string(i) + "y"));
  o.require(contamination::em_overlap(refs, clean, {10}).fractions[0] == 0.0, "clean corpus EM-10 is not 0.0000");
  if (o.ok) o.detail = "200 fuzz cases match; recall 100%; clean EM-10 = 0.0000";
  return o;
}

Outcome meta_engine_conformance() {
  Outcome o;
  const auto replay = testsupport::seven_step_workflow();
  auto p = scripted(replay.script);
  docs::SeedState seeds;
  seeds.keywords = {"multi-factor authentication"};
  docs::DocRunConfig cfg;
  cfg.n_documents = 2;
  cfg.id_prefix = "acc";
  const auto r = docs::synthesize_documents(seeds, cfg, p, p);
  o.require(r.accepted.size() == 2 && r.rejected.size() == 1, "replay did not yield 2 accepted + 1 rejected");
  o.require(r.seeds.expansion_log.size() == 1, "replay did not record one seed expansion");
  const auto& t = r.transcript;
  o.require(!t.empty() && t[0].kind == meta::EntryKind::initial_task, "transcript does not open with the task");
  for (std::size_t i = 1; i < t.size() && o.ok;) {
    o.require(t[i].kind == meta::EntryKind::injected_instruction, "cycle breaks at entry " + std::to_string(i));
    o.require(i + 1 < t.size() && t[i + 1].kind == meta::EntryKind::meta_output,
              "no meta output after injection at " + std::to_string(i));
    i += 2;
    if (i < t.size() && t[i].kind == meta::EntryKind::expert_result) ++i;
  }

  std::mt19937_64 rng(6);
  std::size_t leaks = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> meta_script, expert_script;
    for (std::size_t k = 0, rounds = 1 + rng() % 6; k < rounds; ++k) {
      const auto tag = "SENTINEL-" + std::to_string(trial) + "-" + std::to_string(k);
      meta_script.push_back("Plan " + tag + "\n" + testsupport::expert_call("Probe Expert", "Clean instruction."));
      expert_script.push_back("Answer " + tag + "-E");
    }
    meta_script.push_back("<END>");
    auto meta_p = scripted(meta_script);
    auto experts = scripted(expert_script);
    meta::MetaEngine engine(meta::init_history("sys", "meta", "task SENTINEL-TASK", "seeds", 256),
                            meta::EngineConfig::for_documents(), meta_p, meta::provider_dispatcher(experts));
    engine.run({});
    for (const auto& req : experts->captured()) leaks += llm::flatten(req).find("SENTINEL") != std::string::npos;
  }
  o.require(leaks == 0, std::to_string(leaks) + " sentinel leaks");

  meta::MetaEngine bad(meta::init_history("s", "m", "t", "k", 256), meta::EngineConfig::for_documents(),
                       scripted({"x", "y", "z", "<END>"}), meta::provider_dispatcher(scripted({})));
  o.require(meta::EngineConfig::for_documents().max_error_retries == 3, "default error budget is not 3");
  o.require(bad.run({}) == meta::RunStatus::discarded, "3 format errors did not discard the run");
  if (o.ok) o.detail = "2 accepted + 1 rejected, cycle conforms, 0 leaks over 100 histories, N=3 discard";
  return o;
}

Outcome adaptive_knn() {
  Outcome o;
  seeds::Pool pool;
  for (int i = 0; i < 5; ++i) {
    const double a = 0.01 * (i + 1);
    pool.push_back({"near" + std::to_string(i), "", "fraud", {std::cos(a), std::sin(a)}});
  }
  pool.push_back({"sixth", "", "payments", {std::cos(0.4), std::sin(0.4)}});
  pool.push_back({"far", "", "lending", {std::cos(2.0), std::sin(2.0)}});
  seeds::SeedPoolState s;
  s.pool = std::make_shared<const seeds::Pool>(pool);
  s.current_seeds = {"previous"};
  s.recent_topics = {"fraud"};
  const auto r = seeds::refresh_seeds(s, {{1.0, 0.0}});
  o.require(r.attempted_k == std::vector<std::size_t>{5, 6}, "attempted-k trace is not [5, 6]");
  o.require(r.seeds == std::vector<std::string>{"sixth"}, "refresh did not pick the non-matching 6th neighbour");
  if (o.ok) o.detail = "attempted k [5, 6], seed 'sixth'";
  return o;
}

Outcome instruction_pipeline() {
  Outcome o;
  const auto replay = testsupport::instruction_workflow();
  auto p = scripted(replay.script);
  const auto doc = make_document("src", testsupport::words(250, "g"), DocumentSource::metasynth, "biomedicine");
  instruct::InstructRunConfig cfg;
  cfg.task_description = "Create complex questions.";
  cfg.id_prefix = "src";
  const auto r = instruct::synthesize_instructions(doc, cfg, p, p);
  o.require(r.instructions.size() == 1, "replay did not yield one instruction");
  if (o.ok) {
    const auto& trace = r.instructions[0].evolution_trace;
    std::size_t i = 0;
    while (i < trace.size() && trace[i].action != "complicate") ++i;
    while (i < trace.size() && trace[i].action != "edit") ++i;
    o.require(i < trace.size(), "evolution trace lacks Complexity then Question Editor");
  }

  std::mt19937_64 rng(8);
  const std::vector<std::string> plants = {"Based on the document, ", "according to the document ", "As a trader, ",
                                           "As an analyst, "};
  const std::vector<std::string> lead = {"", "Rates rose. ", "Why? "};
  std::size_t caught = 0;
  for (int t = 0; t < 1000; ++t) {
    caught += instruct::banned_phrase(lead[rng() % lead.size()] + plants[rng() % plants.size()] + "what next?")
                  .has_value();
  }
  o.require(caught == 1000, "banned-phrase filter caught " + std::to_string(caught) + "/1000");

  std::size_t sampled = 0;
  for (int t = 0; t < 1000 && o.ok; ++t) {
    std::vector<Instruction> ins;
    for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i) {
      Instruction x;
      x.id = "i" + std::to_string(i);
      x.text = "Instruction number " + std::to_string(i) + " here.";
      x.parent_document_id = "src";
      x.word_count = 4;
      ins.push_back(x);
    }
    const auto prompts = instruct::build_response_prompts(doc, ins, rng());
    std::set<std::string> seen;
    for (const auto& pr : prompts) {
      ++sampled;
      for (const auto& item : pr.items) {
        seen.insert(item.instruction_id);
        if (item.format == PromptFormat::constrained_cot) {
          const int w = item.word_limit.value_or(-1);
          o.require(w >= 50 && w <= 500 && w % 50 == 0, "word limit " + std::to_string(w) + " out of range");
        }
      }
    }
    o.require(seen.size() == ins.size(), "an instruction is missing from every response prompt");
  }
  if (o.ok) o.detail = "trace ok; 1000/1000 planted caught; " + std::to_string(sampled) + " prompts checked";
  return o;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(METASYNTH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path only_run_dir(const fs::path& out) {
  for (const auto& e : fs::directory_iterator(out)) return e.path();
  return {};
}

std::string corpus_bytes(const fs::path& run_dir) {
  std::string s;
  for (std::size_t k = 0; k < 64; ++k) s += testsupport::read_file(pipeline::worker_dir(run_dir, k) / "accepted.jsonl");
  return s;
}

Outcome end_to_end() {
  Outcome o;
  testsupport::TempDir dir;
  const json cfg = {{"domain", "finance"},
                    {"workers", 64},
                    {"docs_per_seed_set", 5},
                    {"rng_seed", 42},
                    {"provider", {{"kind", "scripted"}, {"script", testsupport::happy_doc_script(5, "w{{worker}}-")}}},
                    {"seeds", {{"source", "keywords"}, {"keywords", {"bonds", "credit risk"}}}}};
  testsupport::write_file(dir / "config.json", cfg.dump());
  const auto conf = (dir / "config.json").string();
  o.require(run_cli("synth-docs -c " + conf + " --output-dir " + (dir / "a").string()) == 0, "first run failed");
  o.require(run_cli("synth-docs -c " + conf + " --output-dir " + (dir / "b").string()) == 0, "second run failed");
  if (!o.ok) return o;
  const auto a = corpus_bytes(only_run_dir(dir / "a"));
  const auto b = corpus_bytes(only_run_dir(dir / "b"));
  o.require(a == b, "two runs with the same rng_seed differ");
  std::set<std::string> ids;
  std::size_t lines = 0;
  for (const auto& l : pipeline::collect_lines(only_run_dir(dir / "a"), "accepted.jsonl")) {
    ++lines;
    ids.insert(json::parse(l).at("id").get<std::string>());
  }
  o.require(lines == 320 && ids.size() == 320, "expected 320 unique documents, got " + std::to_string(ids.size()) +
                                                   " ids over " + std::to_string(lines) + " lines");
  const int crash = run_cli("synth-docs -c " + conf + " --output-dir " + (dir / "c").string() + " --crash-after 20");
  o.require(crash == 75, "crash hook did not fire (exit " + std::to_string(crash) + ")");
  const auto c_dir = only_run_dir(dir / "c");
  o.require(run_cli("resume " + c_dir.string()) == 0, "resume failed");
  o.require(corpus_bytes(c_dir) == a, "resumed corpus differs from an uninterrupted run");
  if (o.ok) o.detail = "320 unique documents, byte-identical runs, crash-resume equivalent";
  return o;
}

struct Criterion {
  int number;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence", 30, metric_oracles},
      {2, "n-gram diversity hand check", 5, ngram_hand_check},
      {3, "compression ratio determinism and directionality", 60, compression_directionality},
      {4, "bootstrap coverage", 60, bootstrap_coverage},
      {5, "contamination", 60, contamination_checks},
      {6, "meta-engine conformance", 10, meta_engine_conformance},
      {7, "adaptive kNN", 1, adaptive_knn},
      {8, "instruction pipeline", 10, instruction_pipeline},
      {9, "end-to-end determinism and parallel safety", 120, end_to_end},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.ok && secs >= c.limit_seconds) {
      o.ok = false;
      o.detail = "took " + std::to_string(secs) + " s";
    }
    failures += !o.ok;
    std::printf("%s criterion %d: %s (%.2f s, limit %.0f s) - %s\n", o.ok ? "PASS" : "FAIL", c.number, c.name.c_str(),
                secs, c.limit_seconds, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
