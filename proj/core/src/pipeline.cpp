#include "metasynth/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "metasynth/doc_synthesis.hpp"
#include "metasynth/instruction_synthesis.hpp"
#include "metasynth/prompts.hpp"
#include "metasynth/seed_selection.hpp"
#include "metasynth/text.hpp"

namespace metasynth::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Mode m) noexcept {
  switch (m) {
    case Mode::metasynth_docs:
      return "metasynth_docs";
    case Mode::template_docs:
      return "template_docs";
    case Mode::instructions:
      return "instructions";
    case Mode::responses:
      return "responses";
    case Mode::measure:
      return "measure";
    case Mode::contaminate:
      return "contaminate";
  }
  return "?";
}

Mode parse_mode(std::string_view s) {
  for (auto m : {Mode::metasynth_docs, Mode::template_docs, Mode::instructions, Mode::responses, Mode::measure,
                 Mode::contaminate}) {
    if (s == to_string(m)) return m;
  }
  throw ValidationError("unknown mode '" + std::string(s) + "'");
}

const char* to_string(WorkerStatus s) noexcept {
  switch (s) {
    case WorkerStatus::pending:
      return "pending";
    case WorkerStatus::running:
      return "running";
    case WorkerStatus::completed:
      return "completed";
    case WorkerStatus::discarded:
      return "discarded";
    case WorkerStatus::incomplete:
      return "incomplete";
  }
  return "?";
}

WorkerStatus parse_worker_status(std::string_view s) {
  for (auto w : {WorkerStatus::pending, WorkerStatus::running, WorkerStatus::completed, WorkerStatus::discarded,
                 WorkerStatus::incomplete}) {
    if (s == to_string(w)) return w;
  }
  throw ValidationError("unknown worker status '" + std::string(s) + "'");
}

namespace {

const char* to_string(ProviderError::Kind k) {
  switch (k) {
    case ProviderError::Kind::retries_exhausted:
      return "retries_exhausted";
    case ProviderError::Kind::authentication:
      return "authentication";
    case ProviderError::Kind::script_exhausted:
      return "script_exhausted";
    case ProviderError::Kind::script_mismatch:
      return "script_mismatch";
    case ProviderError::Kind::bad_response:
      return "bad_response";
    case ProviderError::Kind::budget_exhausted:
      return "budget_exhausted";
  }
  return "?";
}

const std::vector<std::string> kKnownKeys = {
    "domain",         "mode",           "workers",      "max_parallel",        "docs_per_seed_set",
    "seed_sets_per_worker", "provider",   "embedder",     "judge",               "seeds",
    "engine",         "rng_seed",       "output_dir",   "token_budget",        "length_window",
    "documents_path", "task_preset",    "task_description", "max_instructions_per_doc", "instructions_path",
    "run_judges",     "categories"};

}  // namespace

void to_json(json& j, const RunConfig& c) {
  j = json{{"domain", c.domain},
           {"mode", to_string(c.mode)},
           {"workers", c.workers},
           {"max_parallel", c.max_parallel},
           {"docs_per_seed_set", c.docs_per_seed_set},
           {"seed_sets_per_worker", c.seed_sets_per_worker},
           {"provider", c.provider},
           {"embedder", c.embedder ? json(*c.embedder) : json(nullptr)},
           {"judge", c.judge ? json(*c.judge) : json(nullptr)},
           {"seeds",
            {{"source", c.seeds.source == SeedSource::keywords ? "keywords" : "documents"},
             {"keywords", c.seeds.keywords},
             {"keyword_count", c.seeds.keyword_count},
             {"path", c.seeds.path},
             {"per_worker", c.seeds.per_worker},
             {"pool", c.seeds.pool}}},
           {"engine", c.engine},
           {"rng_seed", c.rng_seed},
           {"output_dir", c.output_dir},
           {"token_budget", c.token_budget},
           {"length_window", {{"min", c.window.min}, {"max", c.window.max}}},
           {"documents_path", c.documents_path},
           {"task_preset", c.task_preset},
           {"task_description", c.task_description},
           {"max_instructions_per_doc", c.max_instructions_per_doc},
           {"instructions_path", c.instructions_path},
           {"run_judges", c.run_judges},
           {"categories", c.categories}};
}

void from_json(const json& j, RunConfig& c) {
  c.domain = j.value("domain", c.domain);
  c.mode = parse_mode(j.value("mode", std::string(to_string(c.mode))));
  c.engine = c.mode == Mode::instructions ? meta::EngineConfig::for_instructions() : meta::EngineConfig::for_documents();
  c.workers = j.value("workers", c.workers);
  c.max_parallel = j.value("max_parallel", c.max_parallel);
  c.docs_per_seed_set = j.value("docs_per_seed_set", c.docs_per_seed_set);
  c.seed_sets_per_worker = j.value("seed_sets_per_worker", c.seed_sets_per_worker);
  if (j.contains("provider")) c.provider = j.at("provider").get<llm::ProviderConfig>();
  if (j.contains("embedder") && !j.at("embedder").is_null()) c.embedder = j.at("embedder").get<llm::ProviderConfig>();
  if (j.contains("judge") && !j.at("judge").is_null()) c.judge = j.at("judge").get<llm::ProviderConfig>();
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    const auto source = s.value("source", std::string("keywords"));
    if (source == "keywords") {
      c.seeds.source = SeedSource::keywords;
    } else if (source == "documents") {
      c.seeds.source = SeedSource::documents;
    } else {
      throw ValidationError("unknown seed source '" + source + "'");
    }
    c.seeds.keywords = s.value("keywords", c.seeds.keywords);
    c.seeds.keyword_count = s.value("keyword_count", c.seeds.keyword_count);
    c.seeds.path = s.value("path", c.seeds.path);
    c.seeds.per_worker = s.value("per_worker", c.seeds.per_worker);
    c.seeds.pool = s.value("pool", c.seeds.pool);
  }
  if (j.contains("engine")) from_json(j.at("engine"), c.engine);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.token_budget = j.value("token_budget", c.token_budget);
  if (j.contains("length_window")) {
    c.window.min = j.at("length_window").value("min", c.window.min);
    c.window.max = j.at("length_window").value("max", c.window.max);
  }
  c.documents_path = j.value("documents_path", c.documents_path);
  c.task_preset = j.value("task_preset", c.task_preset);
  c.task_description = j.value("task_description", c.task_description);
  c.max_instructions_per_doc = j.value("max_instructions_per_doc", c.max_instructions_per_doc);
  c.instructions_path = j.value("instructions_path", c.instructions_path);
  c.run_judges = j.value("run_judges", c.run_judges);
  c.categories = j.value("categories", c.categories);
}

std::vector<std::string> check(const RunConfig& c) {
  std::vector<std::string> p;
  if (c.workers < 1) p.push_back("workers must be at least 1");
  if (c.docs_per_seed_set < 1) p.push_back("docs_per_seed_set must be at least 1");
  if (c.seed_sets_per_worker < 1) p.push_back("seed_sets_per_worker must be at least 1");
  if (text::trim(c.domain).empty()) p.push_back("domain must not be empty");
  if (c.output_dir.empty()) p.push_back("output_dir must not be empty");
  if (c.token_budget < 0) p.push_back("token_budget must not be negative");
  if (c.window.min > 400 || c.window.max < 400) p.push_back("length_window must contain the 400-word target");
  for (auto& s : llm::check(c.provider)) p.push_back("provider: " + s);
  if (c.embedder) {
    for (auto& s : llm::check(*c.embedder)) p.push_back("embedder: " + s);
  }
  if (c.judge) {
    for (auto& s : llm::check(*c.judge)) p.push_back("judge: " + s);
  }
  for (auto& s : meta::check(c.engine)) p.push_back(s);
  switch (c.mode) {
    case Mode::metasynth_docs:
      if (c.seeds.source == SeedSource::documents && c.seeds.path.empty() && c.seeds.pool.empty()) {
        p.push_back("seeds.path or seeds.pool is required for document seeds");
      }
      if (c.seeds.source == SeedSource::keywords && c.seeds.keywords.empty() && c.seeds.keyword_count < 1) {
        p.push_back("seeds.keyword_count must be at least 1");
      }
      if (c.seed_sets_per_worker > 1 && (c.seeds.pool.empty() || !c.embedder)) {
        p.push_back("seed_sets_per_worker > 1 needs seeds.pool and an embedder for seed refresh");
      }
      break;
    case Mode::template_docs:
      if (c.seeds.path.empty()) p.push_back("seeds.path is required for the template baseline");
      if (c.seeds.per_worker != 5) p.push_back("the template baseline uses exactly 5 seed documents per worker");
      break;
    case Mode::instructions:
      if (c.documents_path.empty()) p.push_back("documents_path is required for instruction runs");
      if (c.task_description.empty()) {
        const auto names = prompts::task_preset_names();
        if (std::find(names.begin(), names.end(), c.task_preset) == names.end()) {
          p.push_back("unknown task_preset '" + c.task_preset + "'");
        }
      }
      if (c.max_instructions_per_doc < 1) p.push_back("max_instructions_per_doc must be at least 1");
      break;
    case Mode::responses:
      if (c.documents_path.empty()) p.push_back("documents_path is required for response runs");
      if (c.instructions_path.empty()) p.push_back("instructions_path is required for response runs");
      break;
    case Mode::measure:
    case Mode::contaminate:
      p.push_back(std::string("mode ") + to_string(c.mode) + " is not a worker run; use its subcommand");
      break;
  }
  return p;
}

json interpolate_env(const json& j) {
  std::vector<std::string> missing;
  std::function<json(const json&)> walk = [&](const json& v) -> json {
    if (v.is_string()) {
      const auto& s = v.get_ref<const std::string&>();
      std::string out;
      std::size_t pos = 0;
      while (true) {
        const auto a = s.find("${", pos);
        if (a == std::string::npos) break;
        const auto b = s.find('}', a + 2);
        if (b == std::string::npos) break;
        out.append(s, pos, a - pos);
        const auto name = s.substr(a + 2, b - a - 2);
        if (const char* val = std::getenv(name.c_str())) {
          out += val;
        } else {
          missing.push_back("environment variable " + name + " is not set");
        }
        pos = b + 1;
      }
      out.append(s, pos, std::string::npos);
      return out;
    }
    if (v.is_object()) {
      json o = json::object();
      for (auto it = v.begin(); it != v.end(); ++it) o[it.key()] = walk(it.value());
      return o;
    }
    if (v.is_array()) {
      json a = json::array();
      for (const auto& x : v) a.push_back(walk(x));
      return a;
    }
    return v;
  };
  auto out = walk(j);
  if (!missing.empty()) throw ConfigError(missing);
  return out;
}

json load_config_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  try {
    return interpolate_env(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError({"config file " + path.string() + " is not valid JSON: " + e.what()});
  }
}

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
  std::vector<std::string> problems;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), it.key()) == kKnownKeys.end()) {
      problems.push_back("unknown config key '" + it.key() + "'");
    }
  }
  RunConfig c;
  try {
    from_json(j, c);
  } catch (const json::exception& e) {
    problems.push_back(std::string("config has a wrongly typed value: ") + e.what());
    throw ConfigError(problems);
  } catch (const ValidationError& e) {
    problems.push_back(e.what());
    throw ConfigError(problems);
  }
  for (auto& p : check(c)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

std::string config_hash(const RunConfig& config) {
  json j = config;
  j.erase("output_dir");
  return text::hex64(text::fnv1a64(j.dump()));
}

std::string run_id_for(const RunConfig& config) { return "run-" + config_hash(config).substr(0, 12); }

std::size_t RunManifest::total_accepted() const {
  std::size_t n = 0;
  for (const auto& w : workers) n += w.accepted;
  return n;
}

std::size_t RunManifest::total_rejected() const {
  std::size_t n = 0;
  for (const auto& w : workers) n += w.rejected;
  return n;
}

std::int64_t RunManifest::total_tokens() const {
  std::int64_t n = 0;
  for (const auto& w : workers) n += w.input_tokens + w.output_tokens;
  return n;
}

bool RunManifest::all_completed() const {
  return std::all_of(workers.begin(), workers.end(),
                     [](const WorkerRecord& w) { return w.status == WorkerStatus::completed; });
}

bool RunManifest::any_provider_error() const {
  return std::any_of(workers.begin(), workers.end(), [](const WorkerRecord& w) { return !w.provider_error.empty(); });
}

void to_json(json& j, const RunManifest& m) {
  json workers = json::array();
  std::int64_t in = 0;
  std::int64_t out = 0;
  for (const auto& w : m.workers) {
    in += w.input_tokens;
    out += w.output_tokens;
    workers.push_back({{"index", w.index},
                       {"status", to_string(w.status)},
                       {"accepted", w.accepted},
                       {"rejected", w.rejected},
                       {"input_tokens", w.input_tokens},
                       {"output_tokens", w.output_tokens},
                       {"wall_seconds", w.wall_seconds},
                       {"resumed", w.resumed},
                       {"error", w.error},
                       {"provider_error", w.provider_error}});
  }
  j = json{{"run_id", m.run_id},
           {"config_hash", m.config_hash},
           {"mode", to_string(m.mode)},
           {"finished", m.finished},
           {"wall_seconds", m.wall_seconds},
           {"totals",
            {{"accepted", m.total_accepted()},
             {"rejected", m.total_rejected()},
             {"input_tokens", in},
             {"output_tokens", out}}},
           {"workers", workers}};
}

void from_json(const json& j, RunManifest& m) {
  m.run_id = j.at("run_id").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.mode = parse_mode(j.at("mode").get<std::string>());
  m.finished = j.value("finished", false);
  m.wall_seconds = j.value("wall_seconds", 0.0);
  m.workers.clear();
  for (const auto& w : j.at("workers")) {
    WorkerRecord r;
    r.index = w.at("index").get<std::size_t>();
    r.status = parse_worker_status(w.at("status").get<std::string>());
    r.accepted = w.value("accepted", std::size_t{0});
    r.rejected = w.value("rejected", std::size_t{0});
    r.input_tokens = w.value("input_tokens", std::int64_t{0});
    r.output_tokens = w.value("output_tokens", std::int64_t{0});
    r.wall_seconds = w.value("wall_seconds", 0.0);
    r.resumed = w.value("resumed", false);
    r.error = w.value("error", std::string{});
    r.provider_error = w.value("provider_error", std::string{});
    m.workers.push_back(std::move(r));
  }
}

RunManifest read_manifest(const fs::path& run_dir) {
  const auto path = run_dir / "manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  try {
    auto m = json::parse(in).get<RunManifest>();
    for (std::size_t i = 0; i < m.workers.size(); ++i) {
      if (m.workers[i].index != i) throw ValidationError("worker indices are not 0..n-1");
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError("corrupt manifest " + path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError("corrupt manifest " + path.string() + ": " + e.what());
  }
}

fs::path worker_dir(const fs::path& run_dir, std::size_t index) {
  return run_dir / ("worker_" + std::to_string(index));
}

std::string primary_output(Mode mode) {
  switch (mode) {
    case Mode::instructions:
      return "instructions.jsonl";
    case Mode::responses:
      return "responses.jsonl";
    default:
      return "accepted.jsonl";
  }
}

std::vector<std::string> collect_lines(const fs::path& run_dir, const std::string& file_name) {
  const auto manifest = read_manifest(run_dir);
  std::vector<std::string> out;
  for (const auto& w : manifest.workers) {
    std::ifstream in(worker_dir(run_dir, w.index) / file_name, std::ios::binary);
    std::string line;
    while (in && std::getline(in, line)) {
      if (!line.empty()) out.push_back(line);
    }
  }
  return out;
}

namespace {

/// Truncating JSONL writer for one worker's auxiliary files.
class JsonlFile {
 public:
  explicit JsonlFile(const fs::path& path) : file_(std::fopen(path.string().c_str(), "wb")) {
    if (!file_) throw IoError("cannot open " + path.string());
  }
  ~JsonlFile() {
    if (file_) std::fclose(file_);
  }
  JsonlFile(const JsonlFile&) = delete;
  JsonlFile& operator=(const JsonlFile&) = delete;

  void write(const json& j) {
    const auto line = j.dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
      throw IoError("write failed");
    }
  }

 private:
  std::FILE* file_;
};

struct SharedInputs {
  std::shared_ptr<llm::Provider> provider;  // shared only for http providers
  std::shared_ptr<llm::Provider> embedder;
  std::shared_ptr<llm::Provider> judge;
  std::shared_ptr<llm::MeteredProvider::Budget> budget;
  std::vector<Document> seed_docs;
  std::shared_ptr<const seeds::Pool> pool;
  std::vector<Document> documents;
  std::vector<Instruction> instructions;
};

std::shared_ptr<llm::Provider> provider_for(const llm::ProviderConfig& cfg, const std::shared_ptr<llm::Provider>& shared,
                                            std::size_t worker) {
  if (cfg.kind == llm::ProviderConfig::Kind::scripted) {
    return llm::make_provider(cfg, {{"worker", std::to_string(worker)}});
  }
  return shared;
}

WorkerStatus from_run_status(meta::RunStatus s) {
  switch (s) {
    case meta::RunStatus::completed:
      return WorkerStatus::completed;
    case meta::RunStatus::discarded:
      return WorkerStatus::discarded;
    default:
      return WorkerStatus::incomplete;
  }
}

WorkerStatus worst(WorkerStatus a, WorkerStatus b) {
  if (a == WorkerStatus::discarded || b == WorkerStatus::discarded) return WorkerStatus::discarded;
  if (a == WorkerStatus::incomplete || b == WorkerStatus::incomplete) return WorkerStatus::incomplete;
  return WorkerStatus::completed;
}

std::vector<Document> slice(const std::vector<Document>& all, std::size_t worker, std::size_t per_worker) {
  std::vector<Document> out;
  if (all.empty()) return out;
  for (std::size_t i = 0; i < per_worker; ++i) out.push_back(all[(worker * per_worker + i) % all.size()]);
  return out;
}

std::string worker_prefix(std::size_t k) { return "w" + std::to_string(k); }

Document pool_document(const seeds::PoolEntry& e, const std::string& domain) {
  auto d = make_document(e.id, e.text, DocumentSource::real, domain);
  d.category = e.topic;
  return d;
}

struct WorkerContext {
  const RunConfig& config;
  const SharedInputs& shared;
  std::size_t index;
  fs::path dir;
  WorkerRecord& record;
};

CorpusSink::Options sink_options(const RunConfig& c, bool check_window = true) {
  CorpusSink::Options o;
  o.window = c.window;
  o.check_length_window = check_window;
  o.truncate = true;
  return o;
}

WorkerStatus run_metasynth_worker(WorkerContext& ctx, llm::Provider& metered_raw,
                                  const std::shared_ptr<llm::Provider>& provider) {
  const auto& c = ctx.config;
  CorpusSink accepted(ctx.dir / "accepted.jsonl", sink_options(c));
  CorpusSink rejected(ctx.dir / "rejected.jsonl", sink_options(c, false));
  JsonlFile transcript(ctx.dir / "transcript.jsonl");

  docs::SeedState state;
  seeds::SeedPoolState pool_state;
  if (c.seeds.source == SeedSource::keywords) {
    state.keywords = c.seeds.keywords;
    if (state.keywords.empty()) state.keywords = seeds::random_keyword_seeds(c.domain, c.seeds.keyword_count, metered_raw).keywords;
  } else if (ctx.shared.pool) {
    std::vector<Document> pool_docs;
    for (const auto& e : *ctx.shared.pool) pool_docs.push_back(pool_document(e, c.domain));
    state.seed_documents = slice(pool_docs, ctx.index, c.seeds.per_worker);
    pool_state.pool = ctx.shared.pool;
    for (const auto& d : state.seed_documents) pool_state.current_seeds.push_back(d.id);
  } else {
    state.seed_documents = slice(ctx.shared.seed_docs, ctx.index, c.seeds.per_worker);
  }

  auto status = WorkerStatus::completed;
  for (std::size_t set = 0; set < c.seed_sets_per_worker; ++set) {
    docs::DocRunConfig dc;
    dc.n_documents = c.docs_per_seed_set;
    dc.domain = c.domain;
    dc.window = c.window;
    dc.engine = c.engine;
    dc.id_prefix = worker_prefix(ctx.index) + (c.seed_sets_per_worker > 1 ? "-s" + std::to_string(set) : "");
    docs::DocCallbacks cb;
    cb.on_accepted = [&](const Document& d) {
      accepted.append(d);
      ++ctx.record.accepted;
    };
    cb.on_rejected = [&](const RejectedDraft& r) {
      rejected.append(r);
      ++ctx.record.rejected;
    };
    cb.on_entry = [&](const meta::HistoryEntry& e) { transcript.write(json(e)); };
    auto result = docs::synthesize_documents(state, dc, provider, provider, cb);
    status = worst(status, from_run_status(result.status));
    if (status != WorkerStatus::completed || set + 1 == c.seed_sets_per_worker) break;

    // Topic-aware refresh before the next seed set.
    for (const auto& d : result.accepted) pool_state.recent_topics.push_back(seeds::label_topic(d, metered_raw));
    pool_state.refresh_period = result.accepted.size();
    auto embedder = provider_for(*c.embedder, ctx.shared.embedder, ctx.index);
    seeds::refresh_seeds(pool_state, result.accepted, *embedder);
    state = docs::SeedState{};
    for (const auto& id : pool_state.current_seeds) {
      for (const auto& e : *ctx.shared.pool) {
        if (e.id == id) state.seed_documents.push_back(pool_document(e, c.domain));
      }
    }
  }
  return status;
}

WorkerStatus run_template_worker(WorkerContext& ctx, llm::Provider& provider) {
  const auto& c = ctx.config;
  CorpusSink accepted(ctx.dir / "accepted.jsonl", sink_options(c));
  CorpusSink rejected(ctx.dir / "rejected.jsonl", sink_options(c, false));
  JsonlFile transcript(ctx.dir / "transcript.jsonl");
  docs::TemplateConfig tc;
  tc.domain = c.domain;
  tc.n_documents = c.docs_per_seed_set;
  tc.window = c.window;
  tc.id_prefix = worker_prefix(ctx.index);
  docs::DocCallbacks cb;
  cb.on_accepted = [&](const Document& d) {
    accepted.append(d);
    ++ctx.record.accepted;
  };
  cb.on_rejected = [&](const RejectedDraft& r) {
    rejected.append(r);
    ++ctx.record.rejected;
  };
  const auto result = docs::template_generate(slice(ctx.shared.seed_docs, ctx.index, 5), tc, provider, cb);
  return result.documents.size() == c.docs_per_seed_set ? WorkerStatus::completed : WorkerStatus::incomplete;
}

WorkerStatus run_instruction_worker(WorkerContext& ctx, const std::shared_ptr<llm::Provider>& provider) {
  const auto& c = ctx.config;
  CorpusSink out(ctx.dir / "instructions.jsonl", sink_options(c));
  JsonlFile filtered(ctx.dir / "filtered.jsonl");
  JsonlFile transcript(ctx.dir / "transcript.jsonl");
  instruct::InstructRunConfig ic;
  ic.task_description = c.task_description.empty() ? prompts::task_preset(c.task_preset) : c.task_description;
  ic.max_instructions = c.max_instructions_per_doc;
  ic.engine = c.engine;
  auto status = WorkerStatus::completed;
  for (std::size_t i = ctx.index; i < ctx.shared.documents.size(); i += c.workers) {
    const auto& doc = ctx.shared.documents[i];
    ic.id_prefix = doc.id;
    auto result = instruct::synthesize_instructions(doc, ic, provider, provider, [&](const meta::HistoryEntry& e) {
      json j = e;
      j["document_id"] = doc.id;
      transcript.write(j);
    });
    for (const auto& ins : result.instructions) {
      out.append(ins);
      ++ctx.record.accepted;
    }
    for (const auto& f : result.filtered) {
      filtered.write({{"parent_document_id", doc.id}, {"text", f.text}, {"reason", f.reason}});
      ++ctx.record.rejected;
    }
    status = worst(status, from_run_status(result.status));
  }
  return status;
}

WorkerStatus run_response_worker(WorkerContext& ctx, llm::Provider& provider) {
  const auto& c = ctx.config;
  CorpusSink out(ctx.dir / "responses.jsonl", sink_options(c));
  std::optional<CorpusSink> judgements;
  std::shared_ptr<llm::Provider> judge;
  if (c.run_judges) {
    judgements.emplace(ctx.dir / "judgements.jsonl", sink_options(c));
    judge = provider_for(c.judge ? *c.judge : c.provider, ctx.shared.judge, ctx.index);
  }
  const auto categories = c.categories.empty() ? prompts::default_task_categories() : c.categories;
  std::map<std::string, std::vector<Instruction>> by_parent;
  std::map<std::string, const Instruction*> by_id;
  for (const auto& ins : ctx.shared.instructions) {
    by_parent[ins.parent_document_id].push_back(ins);
    by_id[ins.id] = &ins;
  }
  for (std::size_t i = ctx.index; i < ctx.shared.documents.size(); i += c.workers) {
    const auto& doc = ctx.shared.documents[i];
    const auto it = by_parent.find(doc.id);
    if (it == by_parent.end()) continue;
    const auto seed = c.rng_seed ^ text::fnv1a64(doc.id);
    const auto prompts_for_doc = instruct::build_response_prompts(doc, it->second, seed);
    for (const auto& r : instruct::synthesize_responses(prompts_for_doc, provider)) {
      out.append(r);
      ++ctx.record.accepted;
      if (!judge) continue;
      const auto& instr = by_id.at(r.instruction_id)->text;
      judgements->append(JudgementRecord{
          r.instruction_id, "accuracy", instruct::judge_accuracy(doc.text, instr, r.response_text, *judge).value});
      judgements->append(JudgementRecord{
          r.instruction_id, "relevance", instruct::judge_relevance(doc.text, instr, r.response_text, *judge).value});
      judgements->append(JudgementRecord{
          r.instruction_id, "category", instruct::judge_category(categories, instr, r.response_text, *judge).value});
    }
  }
  return WorkerStatus::completed;
}

void run_worker(const RunConfig& config, const SharedInputs& shared, const fs::path& run_dir, WorkerRecord& record) {
  const auto dir = worker_dir(run_dir, record.index);
  fs::create_directories(dir);
  auto inner = provider_for(config.provider, shared.provider, record.index);
  auto metered = std::make_shared<llm::MeteredProvider>(inner, shared.budget);
  WorkerContext ctx{config, shared, record.index, dir, record};
  record.accepted = 0;
  record.rejected = 0;
  record.error.clear();
  record.provider_error.clear();
  try {
    switch (config.mode) {
      case Mode::metasynth_docs:
        record.status = run_metasynth_worker(ctx, *metered, metered);
        break;
      case Mode::template_docs:
        record.status = run_template_worker(ctx, *metered);
        break;
      case Mode::instructions:
        record.status = run_instruction_worker(ctx, metered);
        break;
      case Mode::responses:
        record.status = run_response_worker(ctx, *metered);
        break;
      default:
        throw PreconditionError("mode is not a worker run");
    }
  } catch (const ProviderError& e) {
    record.status = WorkerStatus::incomplete;
    record.error = e.what();
    record.provider_error = to_string(e.kind());
  } catch (const Error& e) {
    record.status = WorkerStatus::incomplete;
    record.error = e.what();
  }
  if (fs::exists(dir / primary_output(config.mode))) {
    write_corpus_meta(dir / primary_output(config.mode), CorpusMeta{config.domain, config_hash(config), utc_timestamp()});
  }
  const auto usage = metered->usage();
  record.input_tokens = usage.input_tokens;
  record.output_tokens = usage.output_tokens;
}

void write_manifest(const fs::path& run_dir, const RunManifest& m) {
  write_file_atomic(run_dir / "manifest.json", json(m).dump(2) + "\n");
}

SharedInputs load_inputs(const RunConfig& c) {
  SharedInputs s;
  s.budget = std::make_shared<llm::MeteredProvider::Budget>();
  s.budget->limit = c.token_budget;
  if (c.provider.kind == llm::ProviderConfig::Kind::http_api) s.provider = llm::make_provider(c.provider);
  if (c.embedder && c.embedder->kind == llm::ProviderConfig::Kind::http_api) s.embedder = llm::make_provider(*c.embedder);
  if (c.judge && c.judge->kind == llm::ProviderConfig::Kind::http_api) s.judge = llm::make_provider(*c.judge);

  LoadOptions relaxed;
  relaxed.strict = true;
  relaxed.check_length_window = false;
  if (!c.seeds.path.empty() && (c.mode == Mode::template_docs || c.seeds.source == SeedSource::documents)) {
    s.seed_docs = load_corpus<Document>(c.seeds.path, relaxed).corpus.records;
    if (s.seed_docs.empty()) throw ConfigError({"seed file " + c.seeds.path + " has no documents"});
    if (c.mode == Mode::template_docs && s.seed_docs.size() < 5) {
      throw ConfigError({"the template baseline needs at least 5 seed documents"});
    }
  }
  if (!c.seeds.pool.empty() && c.mode == Mode::metasynth_docs && c.seeds.source == SeedSource::documents) {
    s.pool = std::make_shared<const seeds::Pool>(seeds::load_pool(c.seeds.pool));
    if (s.pool->empty()) throw ConfigError({"seed pool " + c.seeds.pool + " is empty"});
  }
  if (c.mode == Mode::instructions || c.mode == Mode::responses) {
    s.documents = load_corpus<Document>(c.documents_path, relaxed).corpus.records;
  }
  if (c.mode == Mode::responses) {
    s.instructions = load_corpus<Instruction>(c.instructions_path, relaxed).corpus.records;
    validate_parent_links(s.instructions, s.documents);
  }
  return s;
}

void preflight_all(const RunConfig& c) {
  llm::preflight(c.provider);
  if (c.embedder) llm::preflight(*c.embedder);
  if (c.judge) llm::preflight(*c.judge);
}

RunManifest execute(const RunConfig& config, const fs::path& run_dir, RunManifest manifest,
                    const std::vector<std::size_t>& todo, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const auto shared = load_inputs(config);
  manifest.finished = false;
  write_manifest(run_dir, manifest);

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::size_t finished = 0;
  auto work = [&] {
    while (true) {
      const auto slot = next.fetch_add(1);
      if (slot >= todo.size()) return;
      const auto index = todo[slot];
      WorkerRecord record;
      {
        std::lock_guard lock(mu);
        manifest.workers[index].status = WorkerStatus::running;
        record = manifest.workers[index];
        write_manifest(run_dir, manifest);
      }
      const auto t0 = std::chrono::steady_clock::now();
      run_worker(config, shared, run_dir, record);
      record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(mu);
      manifest.workers[index] = record;
      write_manifest(run_dir, manifest);
      if (options.on_worker_done) options.on_worker_done(record);
      if (options.crash_after && ++finished == *options.crash_after) std::_Exit(75);
    }
  };
  const auto threads = std::min(todo.size(), config.max_parallel ? config.max_parallel : config.workers);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  manifest.finished = true;
  manifest.wall_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(run_dir, manifest);
  return manifest;
}

}  // namespace

RunManifest run(const RunConfig& config, const RunOptions& options) {
  if (auto problems = check(config); !problems.empty()) throw ConfigError(problems);
  preflight_all(config);
  const auto run_dir = fs::path(config.output_dir) / run_id_for(config);
  if (fs::exists(run_dir)) {
    throw ConfigError({"run directory " + run_dir.string() + " already exists; use resume to continue it"});
  }
  fs::create_directories(run_dir);
  write_file_atomic(run_dir / "config.json", json(config).dump(2) + "\n");

  RunManifest manifest;
  manifest.run_id = run_id_for(config);
  manifest.config_hash = config_hash(config);
  manifest.mode = config.mode;
  std::vector<std::size_t> todo;
  for (std::size_t k = 0; k < config.workers; ++k) {
    WorkerRecord r;
    r.index = k;
    manifest.workers.push_back(r);
    todo.push_back(k);
  }
  return execute(config, run_dir, std::move(manifest), todo, options);
}

RunManifest resume(const fs::path& run_dir, const RunOptions& options) {
  auto manifest = read_manifest(run_dir);
  auto config = parse_config(load_config_json(run_dir / "config.json"));
  // The run directory may have moved since the run started.
  config.output_dir = run_dir.parent_path().string();
  if (config_hash(config) != manifest.config_hash) {
    throw ValidationError("config.json does not match the manifest's config hash");
  }
  if (manifest.workers.size() != config.workers) throw ValidationError("manifest worker count does not match config");
  std::vector<std::size_t> todo;
  for (auto& w : manifest.workers) {
    if (w.status == WorkerStatus::completed) continue;
    w.resumed = true;
    w.status = WorkerStatus::pending;
    todo.push_back(w.index);
  }
  if (todo.empty() && manifest.finished) return manifest;
  preflight_all(config);
  return execute(config, run_dir, std::move(manifest), todo, options);
}

}  // namespace metasynth::pipeline
