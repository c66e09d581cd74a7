// Command-line front end: run, bench, gen, verify, lib.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "triples/bench.hpp"
#include "triples/pipeline.hpp"

namespace {

using namespace triples;

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailed = 2;
constexpr int kNotExecutable = 3;

struct BackendFlags {
  std::string backend = "oracle";
  std::string endpoint;
  std::string model = "gpt-3.5-turbo";
  int faults = 0;
  std::string embedder = "hashed";
  std::string embed_model = "all-MiniLM-L6-v2";
};

struct PathFlags {
  std::string library;
  std::string save_library;
  std::string templates;
  std::string report;
  bool trace = false;
};

void add_pipeline_flags(CLI::App* cmd, PipelineConfig& cfg, std::string& update) {
  cmd->add_option("--k", cfg.k, "demonstrations retrieved per prompt")->check(CLI::PositiveNumber);
  cmd->add_option("--eps", cfg.epsilon, "success threshold in meters")->check(CLI::NonNegativeNumber);
  cmd->add_option("--theta-dup", cfg.theta_dup, "append_delete similarity threshold")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--max-retries", cfg.max_retries, "feedback retries per episode")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--epochs", cfg.epochs, "update passes before the frozen pass")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--update", update, "library update mode")
      ->check(CLI::IsMember({"none", "append", "append_delete"}));
  cmd->add_option("--step-budget", cfg.step_budget, "interpreter step limit")
      ->check(CLI::PositiveNumber);
}

void add_backend_flags(CLI::App* cmd, BackendFlags& b) {
  cmd->add_option("--backend", b.backend, "oracle | scripted:<file> | remote");
  cmd->add_option("--endpoint", b.endpoint, "remote base URL (default: $TRIPLES_ENDPOINT)");
  cmd->add_option("--model", b.model, "remote chat model");
  cmd->add_option("--faults", b.faults, "corrupt the first N solve replies")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--embedder", b.embedder, "hashed | remote")
      ->check(CLI::IsMember({"hashed", "remote"}));
  cmd->add_option("--embed-model", b.embed_model, "remote embedding model");
}

void add_path_flags(CLI::App* cmd, PathFlags& p) {
  cmd->add_option("--library", p.library, "library file (default: built-in seed library)");
  cmd->add_option("--save-library", p.save_library, "write the library here afterwards");
  cmd->add_option("--templates", p.templates, "prompt template file (default: built-in)");
  cmd->add_option("--report", p.report, "write the JSON report here");
  cmd->add_flag("--trace", p.trace, "include execution traces in the output");
}

std::shared_ptr<Backend> make_backend(const BackendFlags& f) {
  std::shared_ptr<Backend> base;
  if (f.backend == "oracle") {
    base = std::make_shared<OracleBackend>();
  } else if (f.backend.rfind("scripted:", 0) == 0) {
    base = ScriptedBackend::load(f.backend.substr(9));
  } else if (f.backend == "remote") {
    RemoteBackend::Config rc;
    rc.endpoint = f.endpoint;
    rc.model = f.model;
    base = std::make_shared<RemoteBackend>(RemoteBackend::config_from_env(rc));
  } else {
    throw Error("unknown backend '" + f.backend + "' (expected oracle, scripted:<file> or remote)");
  }
  return base;
}

Backends make_backends(const BackendFlags& f) {
  auto base = make_backend(f);
  auto b = Backends::uniform(base);
  if (f.faults > 0) b.solve = std::make_shared<FaultyBackend>(base, f.faults);
  return b;
}

std::shared_ptr<const EmbeddingProvider> make_embedder(const BackendFlags& f) {
  if (f.embedder == "hashed") return std::make_shared<HashedBagOfWords>();
  RemoteEmbeddingProvider::Config ec;
  ec.endpoint = f.endpoint;
  ec.model = f.embed_model;
  if (ec.endpoint.empty()) {
    if (const char* e = std::getenv("TRIPLES_ENDPOINT")) ec.endpoint = e;
  }
  if (const char* k = std::getenv("TRIPLES_API_KEY")) ec.api_key = k;
  if (ec.endpoint.empty()) throw Error("remote embedder needs --endpoint or TRIPLES_ENDPOINT");
  return std::make_shared<RemoteEmbeddingProvider>(ec);
}

AgentState open_state(const PathFlags& p, const BackendFlags& b) {
  auto provider = make_embedder(b);
  return p.library.empty() ? builtin_state(provider) : load_state(p.library, provider);
}

TemplateSet open_templates(const PathFlags& p) {
  return p.templates.empty() ? TemplateSet::builtin() : TemplateSet::load(p.templates);
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw Error("cannot write " + path);
}

void print_metrics(const MetricsReport& m) {
  std::printf("SR   %.4f  (%d/%d)\n", m.sr, m.successes, m.total);
  std::printf("ESR  %.4f  (%d/%d)\n", m.esr, m.successes, m.executable);
  std::printf("Err  %.4f\n", m.err);
  std::printf("\nlevel  tasks  SR      Err\n");
  for (const auto& [level, lm] : m.per_level) {
    std::printf("%5d  %5d  %.4f  %.4f\n", level, lm.count, lm.sr, lm.err);
  }
}

// ---- subcommands ------------------------------------------------------------

struct RunArgs {
  std::string task;
  std::string scenario = "observable";
  std::uint64_t seed = 0;
  std::string dataset;
  std::string task_id;
};

int cmd_run(const RunArgs& a, PipelineConfig cfg, const BackendFlags& bf, const PathFlags& pf) {
  TaskSpec task;
  if (!a.task_id.empty()) {
    if (a.dataset.empty()) throw Error("--task-id needs --dataset");
    auto ds = load_dataset(a.dataset);
    auto it = std::find_if(ds.tasks.begin(), ds.tasks.end(),
                           [&](const TaskSpec& t) { return t.id == a.task_id; });
    if (it == ds.tasks.end()) throw Error("no task '" + a.task_id + "' in " + a.dataset);
    task = *it;
    if (!a.task.empty()) task.instruction = a.task;
  } else {
    if (a.task.empty()) throw Error("run needs --task or --dataset with --task-id");
    auto sc = scenario_from_string(a.scenario);
    if (!sc) throw Error("unknown scenario '" + a.scenario + "'");
    // No object goal: only the empty-hand requirement is scored.
    task.id = "adhoc";
    task.instruction = a.task;
    task.scenario = *sc;
    task.seed = a.seed;
  }

  auto state = open_state(pf, bf);
  auto templates = open_templates(pf);
  auto backends = make_backends(bf);
  validate(cfg);

  auto outcome = run_episode(task, backends, templates, state.registry, state.library, cfg);
  if (outcome.result.success && cfg.update_mode != UpdateMode::none) {
    std::string joined;
    for (const auto& t : outcome.result.minimal_tasks) joined += t + "\n";
    auto s = summarize_success(backends, templates, state.registry, state.library, task,
                               spawn_world(task.scenario, task.seed), joined,
                               outcome.result.code, cfg);
    outcome.result.learned = s.learned;
    std::cerr << "summary: " << s.note << "\n";
  }
  auto doc = to_json(outcome.result, pf.trace);
  std::cout << doc.dump(2) << "\n";
  if (!pf.report.empty()) write_json(pf.report, doc);
  if (!pf.save_library.empty()) save_state(pf.save_library, state.registry, state.library);

  if (outcome.result.success) return kOk;
  return outcome.result.executable ? kFailed : kNotExecutable;
}

int cmd_bench(const std::string& dataset, PipelineConfig cfg, const BackendFlags& bf,
              const PathFlags& pf) {
  auto ds = load_dataset(dataset);
  auto state = open_state(pf, bf);
  auto templates = open_templates(pf);
  auto backends = make_backends(bf);
  auto report = run_epoch_loop(ds.tasks, backends, templates, state.registry, state.library, cfg);
  if (!pf.report.empty()) {
    write_json(pf.report, make_run_report(cfg, report, pf.trace, utc_timestamp()));
  }
  if (!pf.save_library.empty()) save_state(pf.save_library, state.registry, state.library);
  print_metrics(report.metrics);
  return kOk;
}

int cmd_gen(std::uint64_t seed, int n_obs, int n_partial, const std::string& out) {
  auto ds = generate(seed, n_obs, n_partial);
  save_dataset(out, ds);
  std::cout << "wrote " << ds.tasks.size() << " tasks to " << out << "\n";
  return kOk;
}

int cmd_verify(const std::string& path, double eps) {
  auto failures = verify_dataset(load_dataset(path), eps);
  for (const auto& f : failures) std::cout << f.task_id << ": " << f.reason << "\n";
  if (failures.empty()) {
    std::cout << "ok\n";
    return kOk;
  }
  return kFailed;
}

int cmd_lib(const std::string& action, std::int64_t id, const std::string& out,
            const BackendFlags& bf, const PathFlags& pf) {
  auto state = open_state(pf, bf);
  if (action == "list") {
    for (const auto& d : state.library.demos()) {
      std::cout << std::setw(4) << d.id << "  " << std::setw(7) << std::left << to_string(d.source)
                << std::right << "  " << d.task_description << "\n";
    }
    std::cout << "\nAPIs:\n";
    for (const auto& line : state.registry.doc_lines()) std::cout << "  " << line << "\n";
    return kOk;
  }
  if (action == "show") {
    const Demonstration* d = state.library.find(id);
    if (!d) throw Error("no demonstration with id " + std::to_string(id));
    std::cout << render_demonstration(*d);
    return kOk;
  }
  // export
  auto doc = state_to_json(state.registry, state.library);
  if (out.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_json(out, doc);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simplify, solve and summarize tabletop robot instructions"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML/INI file with flag values; flags on the command line win");

  PipelineConfig cfg;
  std::string update = "none";
  BackendFlags bf;
  PathFlags pf;

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run one instruction end to end");
  run->add_option("--task", run_args.task, "instruction (overrides the dataset task's)");
  run->add_option("--scenario", run_args.scenario, "observable | partial")
      ->check(CLI::IsMember({"observable", "partial"}));
  run->add_option("--seed", run_args.seed, "world seed for ad-hoc instructions");
  run->add_option("--dataset", run_args.dataset, "dataset file")->check(CLI::ExistingFile);
  run->add_option("--task-id", run_args.task_id, "task to take from --dataset");

  std::string bench_dataset;
  auto* bench = app.add_subcommand("bench", "update passes, then a frozen evaluation pass");
  bench->add_option("--dataset", bench_dataset, "dataset file")->required();
  bench->add_flag("!--parallel", cfg.sequential, "evaluate the frozen pass with --jobs threads");
  bench->add_option("--jobs", cfg.jobs, "frozen-pass worker threads")->check(CLI::PositiveNumber);

  for (auto* cmd : {run, bench}) {
    cmd->fallthrough();  // lets --config follow the subcommand
    add_pipeline_flags(cmd, cfg, update);
    add_backend_flags(cmd, bf);
    add_path_flags(cmd, pf);
  }

  std::uint64_t gen_seed = 7;
  int n_obs = 100;
  int n_partial = 20;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "generate a dataset");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--observable", n_obs, "observable tasks")->check(CLI::NonNegativeNumber);
  gen->add_option("--partial", n_partial, "partially observable tasks")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--out", gen_out, "output file")->required();

  std::string verify_path;
  double verify_eps = 0.03;
  auto* verify = app.add_subcommand("verify", "check every ground truth against its goal");
  verify->add_option("dataset", verify_path, "dataset file")->required();
  verify->add_option("--eps", verify_eps, "success threshold in meters");

  std::string lib_action;
  std::int64_t lib_id = 0;
  std::string lib_out;
  auto* lib = app.add_subcommand("lib", "inspect a demonstration library");
  lib->add_option("action", lib_action, "list | show | export")
      ->required()
      ->check(CLI::IsMember({"list", "show", "export"}));
  lib->add_option("id", lib_id, "demonstration id for show");
  lib->add_option("--out", lib_out, "export destination (default: stdout)");
  lib->add_option("--library", pf.library, "library file (default: built-in seed library)");
  lib->add_option("--embedder", bf.embedder, "hashed | remote")
      ->check(CLI::IsMember({"hashed", "remote"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    cfg.update_mode = *update_mode_from_string(update);
    if (cfg.update_mode == UpdateMode::none && cfg.epochs > 0) {
      throw Error("--epochs needs --update append or append_delete");
    }
    if (*run) {
      if (cfg.epochs > 0) throw Error("run does a single episode; --epochs applies to bench");
      return cmd_run(run_args, cfg, bf, pf);
    }
    if (*bench) {
      validate(cfg);
      return cmd_bench(bench_dataset, cfg, bf, pf);
    }
    if (*gen) return cmd_gen(gen_seed, n_obs, n_partial, gen_out);
    if (*verify) return cmd_verify(verify_path, verify_eps);
    if (lib_action == "show" && lib->count("id") == 0) throw Error("lib show needs an id");
    return cmd_lib(lib_action, lib_id, lib_out, bf, pf);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
