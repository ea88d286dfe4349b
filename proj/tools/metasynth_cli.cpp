// metasynth command-line tool: synthesis runs, resume, measurement and
// contamination checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "metasynth/contamination.hpp"
#include "metasynth/corpus.hpp"
#include "metasynth/diversity.hpp"
#include "metasynth/error.hpp"
#include "metasynth/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace metasynth;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;
constexpr int kExitPartial = 4;

/// Flag values that override keys of the config file.
struct Overrides {
  std::string config_path;
  std::optional<std::string> domain;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> max_parallel;
  std::optional<std::size_t> docs_per_seed_set;
  std::optional<std::uint64_t> rng_seed;
  std::optional<std::string> output_dir;
  std::optional<std::int64_t> token_budget;
  std::optional<std::string> seeds_path;
  std::optional<std::string> documents;
  std::optional<std::string> instructions;
  std::optional<std::string> task_preset;
  std::optional<std::size_t> crash_after;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run config")->check(CLI::ExistingFile);
  cmd->add_option("--domain", o.domain, "Target domain");
  cmd->add_option("--workers", o.workers, "Number of independent workers");
  cmd->add_option("--max-parallel", o.max_parallel, "Workers running at once (0 = all)");
  cmd->add_option("--docs-per-seed-set", o.docs_per_seed_set, "Documents per worker seed set");
  cmd->add_option("--rng-seed", o.rng_seed, "Seed for every random choice");
  cmd->add_option("--output-dir", o.output_dir, "Parent directory of run directories");
  cmd->add_option("--token-budget", o.token_budget, "Stop once this many tokens are used (0 = unlimited)");
  cmd->add_option("--crash-after", o.crash_after)->group("");
}

json merged_config(const Overrides& o, pipeline::Mode mode) {
  json j = o.config_path.empty() ? json::object() : pipeline::load_config_json(o.config_path);
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
  j["mode"] = pipeline::to_string(mode);
  if (o.domain) j["domain"] = *o.domain;
  if (o.workers) j["workers"] = *o.workers;
  if (o.max_parallel) j["max_parallel"] = *o.max_parallel;
  if (o.docs_per_seed_set) j["docs_per_seed_set"] = *o.docs_per_seed_set;
  if (o.rng_seed) j["rng_seed"] = *o.rng_seed;
  if (o.output_dir) j["output_dir"] = *o.output_dir;
  if (o.token_budget) j["token_budget"] = *o.token_budget;
  if (o.seeds_path) j["seeds"]["path"] = *o.seeds_path;
  if (o.documents) j["documents_path"] = *o.documents;
  if (o.instructions) j["instructions_path"] = *o.instructions;
  if (o.task_preset) j["task_preset"] = *o.task_preset;
  return j;
}

int report(const pipeline::RunManifest& m, const fs::path& run_dir) {
  json summary{{"run_dir", run_dir.string()},
               {"run_id", m.run_id},
               {"accepted", m.total_accepted()},
               {"rejected", m.total_rejected()},
               {"tokens", m.total_tokens()},
               {"all_completed", m.all_completed()}};
  std::cout << summary.dump(2) << "\n";
  if (m.any_provider_error()) {
    for (const auto& w : m.workers) {
      if (!w.provider_error.empty()) std::cerr << "worker " << w.index << ": " << w.error << "\n";
    }
    return kExitProvider;
  }
  if (!m.all_completed()) {
    for (const auto& w : m.workers) {
      if (w.status != pipeline::WorkerStatus::completed) {
        std::cerr << "worker " << w.index << " " << pipeline::to_string(w.status)
                  << (w.error.empty() ? "" : ": " + w.error) << "\n";
      }
    }
    return kExitPartial;
  }
  return kExitOk;
}

int run_mode(const Overrides& o, pipeline::Mode mode, bool judges) {
  auto j = merged_config(o, mode);
  if (judges) j["run_judges"] = true;
  const auto config = pipeline::parse_config(j);
  pipeline::RunOptions options;
  options.crash_after = o.crash_after;
  options.on_worker_done = [](const pipeline::WorkerRecord& w) {
    std::cerr << "worker " << w.index << " " << pipeline::to_string(w.status) << " accepted=" << w.accepted << "\n";
  };
  const auto manifest = pipeline::run(config, options);
  return report(manifest, fs::path(config.output_dir) / manifest.run_id);
}

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_file_atomic(out_path, content);
  }
}

struct MeasureArgs {
  std::string corpus;
  std::string id;
  std::string field = "text";
  std::string embeddings;
  std::string task2vec;
  std::string reference;
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::string out;
  std::string csv;
};

int run_measure(const MeasureArgs& a) {
  diversity::MeasureInput input;
  input.corpus_id = a.id.empty() ? fs::path(a.corpus).stem().string() : a.id;
  input.texts = load_texts(a.corpus, a.field);
  if (!a.embeddings.empty()) input.embeddings = diversity::load_embeddings(a.embeddings);
  if (!a.task2vec.empty()) input.task2vec_batches = diversity::load_embeddings(a.task2vec);
  if (!a.reference.empty()) input.reference = diversity::ReferenceFrequencies::from_tsv(a.reference);
  const auto report = diversity::measure(input, {a.resamples, a.level, a.seed});
  emit(report.to_json().dump(2) + "\n", a.out);
  if (!a.csv.empty()) {
    const bool fresh = !fs::exists(a.csv) || fs::file_size(a.csv) == 0;
    std::ofstream csv(a.csv, std::ios::app | std::ios::binary);
    if (!csv) throw IoError("cannot open " + a.csv);
    if (fresh) csv << report.csv_header() << "\n";
    csv << report.csv_row() << "\n";
  }
  return kExitOk;
}

struct ContaminateArgs {
  std::string refs;
  std::string targets;
  std::string field = "text";
  std::vector<std::size_t> n_values{1, 2, 3, 5, 10};
  std::string out;
};

int run_contaminate(const ContaminateArgs& a) {
  const auto report =
      contamination::em_overlap(load_texts(a.refs, a.field), load_texts(a.targets, a.field), a.n_values);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  emit(report.to_json().dump(2) + "\n", a.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agentic synthetic data generation, measurement and contamination checks"};
  app.require_subcommand(1);

  Overrides docs_o;
  std::string baseline = "metasynth";
  auto* docs = app.add_subcommand("synth-docs", "Synthesize domain documents");
  add_run_flags(docs, docs_o);
  docs->add_option("--baseline", baseline, "Generator: metasynth or template")
      ->check(CLI::IsMember({"metasynth", "template"}));
  docs->add_option("--seeds", docs_o.seeds_path, "Seed documents JSONL");

  Overrides ins_o;
  auto* ins = app.add_subcommand("synth-instructions", "Evolve instructions from documents");
  add_run_flags(ins, ins_o);
  ins->add_option("--documents", ins_o.documents, "Documents JSONL");
  ins->add_option("--task-preset", ins_o.task_preset, "Task description preset");

  Overrides resp_o;
  bool judge = false;
  auto* resp = app.add_subcommand("synth-responses", "Answer instructions against their documents");
  add_run_flags(resp, resp_o);
  resp->add_option("--documents", resp_o.documents, "Documents JSONL");
  resp->add_option("--instructions", resp_o.instructions, "Instructions JSONL");
  resp->add_flag("--judge", judge, "Also run accuracy, relevance and category judges");

  MeasureArgs m;
  auto* measure = app.add_subcommand("measure", "Diversity report for a corpus");
  measure->add_option("corpus", m.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  measure->add_option("--id", m.id, "Corpus identifier (default: file stem)");
  measure->add_option("--field", m.field, "JSON field holding the text");
  measure->add_option("--embeddings", m.embeddings, "Per-document embeddings JSONL")->check(CLI::ExistingFile);
  measure->add_option("--task2vec", m.task2vec, "Per-batch Task2Vec embeddings JSONL")->check(CLI::ExistingFile);
  measure->add_option("--reference", m.reference, "Reference token frequencies TSV")->check(CLI::ExistingFile);
  measure->add_option("--resamples", m.resamples, "Bootstrap resamples");
  measure->add_option("--level", m.level, "Confidence level");
  measure->add_option("--seed", m.seed, "Bootstrap seed");
  measure->add_option("-o,--out", m.out, "JSON output path (default: stdout)");
  measure->add_option("--csv", m.csv, "Append a CSV row to this file");

  ContaminateArgs c;
  auto* contaminate = app.add_subcommand("contaminate", "Exact n-gram overlap of references with a corpus");
  contaminate->add_option("--refs", c.refs, "Reference JSONL")->required()->check(CLI::ExistingFile);
  contaminate->add_option("--targets", c.targets, "Target corpus JSONL")->required()->check(CLI::ExistingFile);
  contaminate->add_option("--n", c.n_values, "Comma-separated n values")->delimiter(',');
  contaminate->add_option("--field", c.field, "JSON field holding the text");
  contaminate->add_option("-o,--out", c.out, "JSON output path (default: stdout)");

  std::string run_dir;
  std::optional<std::size_t> resume_crash_after;
  auto* resume = app.add_subcommand("resume", "Finish the incomplete workers of a run");
  resume->add_option("run_dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  resume->add_option("--crash-after", resume_crash_after)->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (docs->parsed()) {
      return run_mode(docs_o, baseline == "template" ? pipeline::Mode::template_docs : pipeline::Mode::metasynth_docs,
                      false);
    }
    if (ins->parsed()) return run_mode(ins_o, pipeline::Mode::instructions, false);
    if (resp->parsed()) return run_mode(resp_o, pipeline::Mode::responses, judge);
    if (measure->parsed()) return run_measure(m);
    if (contaminate->parsed()) return run_contaminate(c);
    if (resume->parsed()) {
      pipeline::RunOptions options;
      options.crash_after = resume_crash_after;
      return report(pipeline::resume(run_dir, options), run_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& p : e.problems()) std::cerr << "  - " << p << "\n";
    return kExitConfig;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return kExitProvider;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
