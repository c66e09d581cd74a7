#include "triples/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <thread>

#include "triples/assets_data.hpp"
#include "triples/lang/checker.hpp"
#include "triples/lang/parser.hpp"

namespace triples {

void validate(const PipelineConfig& cfg) {
  if (cfg.k < 1) throw Error("k must be at least 1");
  if (!(cfg.epsilon > 0.0)) throw Error("epsilon must be positive");
  if (cfg.max_retries < 0) throw Error("max-retries must not be negative");
  if (!(cfg.theta_dup > 0.0 && cfg.theta_dup <= 1.0)) throw Error("theta-dup must be in (0, 1]");
  if (cfg.epochs < 0) throw Error("epochs must not be negative");
  if (cfg.jobs < 1) throw Error("jobs must be at least 1");
  if (cfg.step_budget < 1) throw Error("step budget must be at least 1");
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  return {{"k", cfg.k},
          {"epsilon", cfg.epsilon},
          {"max_retries", cfg.max_retries},
          {"theta_dup", cfg.theta_dup},
          {"update_mode", std::string(to_string(cfg.update_mode))},
          {"epochs", cfg.epochs},
          {"sequential", cfg.sequential},
          {"step_budget", cfg.step_budget}};
}

Backends Backends::uniform(std::shared_ptr<Backend> backend) {
  return {backend, backend, backend, backend};
}

nlohmann::json to_json(const EpisodeResult& r, bool include_trace) {
  nlohmann::json j{{"task_id", r.task_id},
                   {"minimal_tasks", r.minimal_tasks},
                   {"code", r.code},
                   {"executable", r.executable},
                   {"success", r.success},
                   {"err_value", r.err_value},
                   {"retries_used", r.retries_used},
                   {"complexity", r.complexity},
                   {"failure_reason", r.failure_reason}};
  j["learned"] = r.learned ? nlohmann::json{{"api_name", r.learned->api_name},
                                            {"demo_id", r.learned->demo_id}}
                           : nlohmann::json();
  if (include_trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : r.trace.steps) {
      steps.push_back({{"api", s.api}, {"args", s.args}, {"outcome", s.outcome}});
    }
    j["trace"] = {{"steps", steps},
                  {"world_before", hex_digest(r.trace.world_before)},
                  {"world_after", hex_digest(r.trace.world_after)}};
  }
  return j;
}

Evaluation evaluate(const WorldState& world, const GoalState& goal, double epsilon) {
  double err = 0.0;
  for (const auto& [name, target] : goal.object_targets) {
    const ObjectState* obj = world.find(name);
    if (!obj) throw Error("goal names unknown object '" + name + "'");
    err += distance(obj->position, target);
  }
  if (goal.gripper_target) err += distance(world.gripper().position, *goal.gripper_target);
  if (goal.require_empty_hand && world.gripper().holding) err += 0.5;
  return {err, err <= epsilon};
}

Result<std::vector<std::string>, ResponseError> simplify(Backend& backend, const RoleTemplate& tpl,
                                                         const WorldState& world,
                                                         std::string_view x_high,
                                                         const CallContext& ctx) {
  CallContext call = ctx;
  call.role = PromptRole::simplify;
  auto messages = build_simplify_prompt(tpl, world.observe(), x_high);
  std::string reply = backend.complete(messages, call);
  auto tasks = parse_simplification(reply);
  if (tasks) return tasks;
  messages.push_back({ChatMessage::Role::assistant, reply});
  messages.push_back({ChatMessage::Role::user,
                      "Your answer had no usable steps. Reply again with one line per step, "
                      "each starting with \"TASK: \".\n\n" +
                          std::string(kInstructionHeader) + "\n" + std::string(x_high)});
  return parse_simplification(backend.complete(messages, call));
}

SolveOutcome solve(Backend& backend, const RoleTemplate& tpl, const WorldState& world,
                   const lang::ApiRegistry& registry, const DemoLibrary& library,
                   std::string_view x_low, const PipelineConfig& cfg, const CallContext& ctx) {
  CallContext call = ctx;
  call.role = PromptRole::solve;
  auto demos = library.retrieve_top_k(x_low, static_cast<std::size_t>(cfg.k));
  std::string context = world.observe();
  auto messages = build_solve_prompt(tpl, context, registry.doc_lines(), demos, x_low).messages();

  SolveOutcome out;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    out.retries_used = attempt;
    std::string reply = backend.complete(messages, call);
    std::vector<lang::Diagnostic> diags;
    auto code = parse_code(reply);
    if (!code) {
      diags.push_back(lang::make_diagnostic(lang::Phase::parse, 1, 1, lang::DiagCode::syntax,
                                            code.error().message));
    } else if (auto program = lang::parse(*code); !program) {
      diags.push_back(program.error());
    } else {
      diags = lang::static_check(*program, registry, &world);
    }
    if (diags.empty()) {
      out.code = *code;
      out.diagnostics.clear();
      return out;
    }
    out.diagnostics = diags;
    messages.push_back({ChatMessage::Role::assistant, reply});
    messages.push_back(build_feedback_message(diags, x_low));
  }
  return out;
}

EpisodeOutcome run_episode(const TaskSpec& task, const Backends& backends,
                           const TemplateSet& templates, const lang::ApiRegistry& registry,
                           const DemoLibrary& library, const PipelineConfig& cfg) {
  WorldState world = spawn_world(task.scenario, task.seed);
  EpisodeResult r;
  r.task_id = task.id;
  r.complexity = task.complexity;
  CallContext ctx{PromptRole::simplify, &task};

  try {
    auto tasks = simplify(*backends.simplify, templates.simplify, world, task.instruction, ctx);
    if (!tasks) {
      r.failure_reason = "simplification: " + tasks.error().message;
    } else {
      r.minimal_tasks = *tasks;
      std::string code;
      bool solved = true;
      for (const auto& x_low : r.minimal_tasks) {
        // The retry budget is shared by all minimal tasks of the episode.
        PipelineConfig step_cfg = cfg;
        step_cfg.max_retries = cfg.max_retries - r.retries_used;
        auto s = solve(*backends.solve, templates.solve, world, registry, library, x_low, step_cfg,
                       ctx);
        r.retries_used += s.retries_used;
        if (!s.code) {
          r.failure_reason = "no valid code for '" + x_low + "' within the retry budget: " +
                             lang::render(s.diagnostics);
          solved = false;
          break;
        }
        code += *s.code;
      }
      r.code = code;
      if (solved) r.executable = true;
    }
  } catch (const GatewayError& e) {
    r.failure_reason = std::string("backend: ") + e.what();
  }

  if (r.executable) {
    auto program = lang::parse(r.code);
    if (!program) {
      // Each piece parsed on its own, so this means the pieces do not compose.
      r.executable = false;
      r.failure_reason = "combined code: " + program.error().to_line();
    } else {
      lang::InterpretOptions opts;
      opts.step_budget = cfg.step_budget;
      auto run = lang::interpret(*program, std::move(world), registry, opts);
      world = std::move(run.world);
      r.trace = std::move(run.trace);
      if (run.error) r.failure_reason = run.error->to_line();
    }
  }

  auto ev = evaluate(world, task.goal, cfg.epsilon);
  r.err_value = ev.err_value;
  r.success = r.executable && ev.success;
  if (r.executable && !r.success && r.failure_reason.empty()) {
    r.failure_reason = "final state misses the goal by " + format_number(ev.err_value) + " m";
  }
  return {std::move(r), std::move(world)};
}

SummaryOutcome summarize_success(const Backends& backends, const TemplateSet& templates,
                                 lang::ApiRegistry& registry, DemoLibrary& library,
                                 const TaskSpec& task, const WorldState& initial_world,
                                 std::string_view x_low_joined, std::string_view code,
                                 const PipelineConfig& cfg) {
  if (cfg.update_mode == UpdateMode::none) return {std::nullopt, "updates disabled"};
  CallContext ctx{PromptRole::summarize, &task};
  std::string reply;
  try {
    reply = backends.summarize->complete(
        build_summary_prompt(templates.summarize, initial_world.observe(), registry.doc_lines(),
                             x_low_joined, code),
        ctx);
  } catch (const GatewayError& e) {
    return {std::nullopt, std::string("summary backend failed: ") + e.what()};
  }
  auto parsed = parse_summary(reply);
  if (!parsed) return {std::nullopt, "summary rejected: " + parsed.error().message};
  if (!*parsed) return {std::nullopt, "summary skipped"};
  const SummaryProposal& proposal = **parsed;

  auto verdict = supervise(*backends.supervise, templates, proposal, registry, ctx);
  if (!verdict.accepted) return {std::nullopt, "summary rejected: " + verdict.reason};

  if (auto diag = registry.register_api(proposal.api_source)) {
    return {std::nullopt, "summary rejected: " + diag->to_line()};
  }
  auto name = registry.learned().back().def.name;
  auto up = library.upsert(proposal.demo, cfg.theta_dup, cfg.update_mode);
  std::string note = "learned " + name + " as demo " + std::to_string(up.id);
  if (!up.removed.empty()) {
    note += ", removed";
    for (auto id : up.removed) note += " " + std::to_string(id);
  }
  return {Learned{name, up.id}, note};
}

MetricsReport compute_metrics(const std::vector<EpisodeResult>& results,
                              const std::vector<int>& levels) {
  if (results.empty()) throw Error("cannot compute metrics over zero results");
  if (!levels.empty() && levels.size() != results.size()) {
    throw Error("levels and results differ in length");
  }
  MetricsReport m;
  double err_sum = 0.0;
  std::map<int, std::pair<int, double>> level_acc;  // successes, err sum
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    int level = levels.empty() ? r.complexity : levels[i];
    ++m.total;
    if (r.executable) ++m.executable;
    if (r.success) ++m.successes;
    err_sum += r.err_value;
    auto& lv = m.per_level[level];
    ++lv.count;
    auto& acc = level_acc[level];
    if (r.success) ++acc.first;
    acc.second += r.err_value;
  }
  m.sr = static_cast<double>(m.successes) / m.total;
  m.esr = m.executable ? static_cast<double>(m.successes) / m.executable : 0.0;
  m.err = err_sum / m.total;
  for (auto& [level, lv] : m.per_level) {
    lv.sr = static_cast<double>(level_acc[level].first) / lv.count;
    lv.err = level_acc[level].second / lv.count;
  }
  return m;
}

nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json levels = nlohmann::json::object();
  for (const auto& [level, lv] : m.per_level) {
    levels[std::to_string(level)] = {{"SR", lv.sr}, {"Err", lv.err}, {"count", lv.count}};
  }
  return {{"SR", m.sr},
          {"ESR", m.esr},
          {"Err", m.err},
          {"per_level", levels},
          {"counts", {{"total", m.total}, {"executable", m.executable}, {"successes", m.successes}}}};
}

namespace {

LibrarySnapshot snapshot(std::string pass, const lang::ApiRegistry& registry,
                         const DemoLibrary& library) {
  LibrarySnapshot s{std::move(pass), library.digest(), registry.digest(), library.size(), {}};
  for (const auto& api : registry.learned()) s.learned_apis.push_back(api.def.name);
  return s;
}

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += "\n";
    out += items[i];
  }
  return out;
}

}  // namespace

LoopReport run_epoch_loop(const std::vector<TaskSpec>& dataset, const Backends& backends,
                          const TemplateSet& templates, lang::ApiRegistry& registry,
                          DemoLibrary& library, const PipelineConfig& cfg) {
  validate(cfg);
  if (dataset.empty()) throw Error("dataset has no tasks");
  LoopReport report;
  report.history.push_back(snapshot("initial", registry, library));

  int update_passes = cfg.update_mode == UpdateMode::none ? 0 : cfg.epochs;
  for (int epoch = 1; epoch <= update_passes; ++epoch) {
    for (const auto& task : dataset) {
      auto outcome = run_episode(task, backends, templates, registry, library, cfg);
      if (!outcome.result.success) continue;
      auto s = summarize_success(backends, templates, registry, library, task,
                                 spawn_world(task.scenario, task.seed),
                                 join_lines(outcome.result.minimal_tasks), outcome.result.code, cfg);
      report.notes.push_back("update-" + std::to_string(epoch) + " " + task.id + ": " + s.note);
    }
    report.history.push_back(snapshot("update-" + std::to_string(epoch), registry, library));
  }

  report.results.resize(dataset.size());
  std::size_t jobs = cfg.sequential ? 1 : static_cast<std::size_t>(cfg.jobs);
  jobs = std::min(jobs, dataset.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      report.results[i] =
          run_episode(dataset[i], backends, templates, registry, library, cfg).result;
    }
  } else {
    // Library and registry are only read here, which DemoLibrary and
    // ApiRegistry allow concurrently; each episode owns its world.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < dataset.size(); i = next++) {
          report.results[i] =
              run_episode(dataset[i], backends, templates, registry, library, cfg).result;
        }
      });
    }
    for (auto& t : workers) t.join();
  }
  report.history.push_back(snapshot("frozen", registry, library));
  report.metrics = compute_metrics(report.results);
  return report;
}

nlohmann::json make_run_report(const PipelineConfig& cfg, const LoopReport& report,
                               bool include_trace, const std::string& timestamp) {
  nlohmann::json per_task = nlohmann::json::array();
  for (const auto& r : report.results) per_task.push_back(to_json(r, include_trace));
  nlohmann::json digests = nlohmann::json::array();
  for (const auto& s : report.history) {
    digests.push_back({{"pass", s.pass},
                       {"library", hex_digest(s.library_digest)},
                       {"registry", hex_digest(s.registry_digest)},
                       {"demos", s.demos},
                       {"learned_apis", s.learned_apis}});
  }
  return {{"config", to_json(cfg)},
          {"per_task", per_task},
          {"metrics", to_json(report.metrics)},
          {"library_digests", digests},
          {"notes", report.notes},
          {"timestamp", timestamp}};
}

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AgentState state_from_json(const nlohmann::json& doc,
                           std::shared_ptr<const EmbeddingProvider> provider) {
  lang::ApiRegistry registry;
  if (doc.is_object() && doc.contains("learned_apis")) {
    const auto& apis = doc["learned_apis"];
    if (!apis.is_array()) throw Error("library: learned_apis must be a list");
    for (std::size_t i = 0; i < apis.size(); ++i) {
      if (!apis[i].is_string()) throw Error("library: learned_apis[" + std::to_string(i) + "] is not a string");
      if (auto diag = registry.register_api(apis[i].get<std::string>())) {
        throw Error("library: learned_apis[" + std::to_string(i) + "]: " + diag->to_line());
      }
    }
  }
  auto library = DemoLibrary::from_json(doc, std::move(provider));
  // Learned demos are only useful if the APIs they call came along.
  for (const auto& demo : library.demos()) {
    auto program = lang::parse(demo.examples);
    if (!program) continue;  // from_json already rejected this
    auto diags = lang::static_check(*program, registry, nullptr);
    if (!diags.empty()) {
      throw Error("library: demo " + std::to_string(demo.id) + ": " + diags.front().to_line());
    }
  }
  return {std::move(registry), std::move(library)};
}

AgentState load_state(const std::filesystem::path& path,
                      std::shared_ptr<const EmbeddingProvider> provider) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read library file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("library " + path.string() + ": " + e.what());
  }
  return state_from_json(doc, std::move(provider));
}

nlohmann::json state_to_json(const lang::ApiRegistry& registry, const DemoLibrary& library) {
  nlohmann::json doc = library.to_json();
  nlohmann::json apis = nlohmann::json::array();
  for (const auto& api : registry.learned()) apis.push_back(api.source);
  doc["learned_apis"] = apis;
  return doc;
}

void save_state(const std::filesystem::path& path, const lang::ApiRegistry& registry,
                const DemoLibrary& library) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write library file " + path.string());
  out << state_to_json(registry, library).dump(2) << "\n";
  if (!out) throw Error("failed writing library file " + path.string());
}

AgentState builtin_state(std::shared_ptr<const EmbeddingProvider> provider) {
  return state_from_json(nlohmann::json::parse(assets::seed_library), std::move(provider));
}

}  // namespace triples
