#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triples/demo_store.hpp"
#include "triples/gateway.hpp"
#include "triples/lang/interpreter.hpp"
#include "triples/lang/registry.hpp"
#include "triples/task.hpp"
#include "triples/world.hpp"

namespace triples {

struct PipelineConfig {
  int k = 3;
  double epsilon = 0.03;  // meters, summed over objects plus gripper
  int max_retries = 3;
  double theta_dup = 0.9;
  UpdateMode update_mode = UpdateMode::none;
  int epochs = 0;
  bool sequential = true;
  int jobs = 1;  // frozen pass only, and only when !sequential
  int step_budget = lang::kDefaultStepBudget;
};

/// Throws Error naming the first out-of-range field.
void validate(const PipelineConfig& cfg);
nlohmann::json to_json(const PipelineConfig& cfg);

struct Backends {
  std::shared_ptr<Backend> simplify;
  std::shared_ptr<Backend> solve;
  std::shared_ptr<Backend> summarize;
  std::shared_ptr<Backend> supervise;

  static Backends uniform(std::shared_ptr<Backend> backend);
};

struct Learned {
  std::string api_name;
  std::int64_t demo_id = 0;
  friend bool operator==(const Learned&, const Learned&) = default;
};

struct EpisodeResult {
  std::string task_id;
  std::vector<std::string> minimal_tasks;
  std::string code;
  bool executable = false;
  bool success = false;
  double err_value = 0.0;
  int retries_used = 0;
  lang::ExecutionTrace trace;
  std::optional<Learned> learned;
  int complexity = 1;
  /// Why the episode failed, empty on success.
  std::string failure_reason;
};

nlohmann::json to_json(const EpisodeResult& r, bool include_trace);

struct Evaluation {
  double err_value = 0.0;
  bool success = false;
};

/// Summed L2 error over the goal's objects, plus the gripper's distance to
/// its target when set, plus 0.5 when an empty hand is required but the
/// gripper holds something. Throws Error for a goal object missing from the world.
Evaluation evaluate(const WorldState& world, const GoalState& goal, double epsilon);

/// Minimal tasks for `x_high`, with one re-ask when the first reply has no
/// `TASK:` lines. Throws GatewayError from the backend.
Result<std::vector<std::string>, ResponseError> simplify(Backend& backend, const RoleTemplate& tpl,
                                                         const WorldState& world,
                                                         std::string_view x_high,
                                                         const CallContext& ctx);

struct SolveOutcome {
  std::optional<std::string> code;
  int retries_used = 0;
  /// Diagnostics of the last rejected attempt.
  std::vector<lang::Diagnostic> diagnostics;
};

/// Retrieve, prompt, parse and check, feeding diagnostics back for up to
/// cfg.max_retries further attempts. Throws GatewayError from the backend.
SolveOutcome solve(Backend& backend, const RoleTemplate& tpl, const WorldState& world,
                   const lang::ApiRegistry& registry, const DemoLibrary& library,
                   std::string_view x_low, const PipelineConfig& cfg, const CallContext& ctx);

struct EpisodeOutcome {
  EpisodeResult result;
  WorldState world;
};

/// One task end to end. Never mutates registry or library and never throws
/// for backend or code failures; they are recorded in the result.
EpisodeOutcome run_episode(const TaskSpec& task, const Backends& backends,
                           const TemplateSet& templates, const lang::ApiRegistry& registry,
                           const DemoLibrary& library, const PipelineConfig& cfg);

struct SummaryOutcome {
  std::optional<Learned> learned;
  std::string note;
};

/// Summarize a successful episode, supervise the proposal and, if accepted,
/// register the API and upsert the demonstration. No-op when update mode is none.
SummaryOutcome summarize_success(const Backends& backends, const TemplateSet& templates,
                                 lang::ApiRegistry& registry, DemoLibrary& library,
                                 const TaskSpec& task, const WorldState& initial_world,
                                 std::string_view x_low_joined, std::string_view code,
                                 const PipelineConfig& cfg);

// ---- metrics ----------------------------------------------------------------

struct LevelMetrics {
  double sr = 0.0;
  double err = 0.0;
  int count = 0;
  friend bool operator==(const LevelMetrics&, const LevelMetrics&) = default;
};

struct MetricsReport {
  double sr = 0.0;
  double esr = 0.0;  // 0 when nothing was executable
  double err = 0.0;  // mean over every task, executable or not
  std::map<int, LevelMetrics> per_level;
  int total = 0;
  int executable = 0;
  int successes = 0;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// `levels[i]` is the complexity of `results[i]`; pass an empty vector to use
/// each result's own complexity. Throws Error on empty results.
MetricsReport compute_metrics(const std::vector<EpisodeResult>& results,
                              const std::vector<int>& levels = {});
nlohmann::json to_json(const MetricsReport& m);

// ---- epoch loop -------------------------------------------------------------

struct LibrarySnapshot {
  std::string pass;  // "initial", "update-1", ..., "frozen"
  std::uint64_t library_digest = 0;
  std::uint64_t registry_digest = 0;
  std::size_t demos = 0;
  std::vector<std::string> learned_apis;
};

struct LoopReport {
  std::vector<EpisodeResult> results;  // frozen pass
  MetricsReport metrics;
  std::vector<LibrarySnapshot> history;
  std::vector<std::string> notes;  // summary and supervisor decisions
};

/// `cfg.epochs` sequential update passes with summarization, then one frozen
/// evaluation pass that produces the metrics.
LoopReport run_epoch_loop(const std::vector<TaskSpec>& dataset, const Backends& backends,
                          const TemplateSet& templates, lang::ApiRegistry& registry,
                          DemoLibrary& library, const PipelineConfig& cfg);

/// `{config, per_task, metrics, library_digests, notes, timestamp}`. The
/// timestamp is the only field that differs between identical runs.
nlohmann::json make_run_report(const PipelineConfig& cfg, const LoopReport& report,
                               bool include_trace, const std::string& timestamp);

/// Current UTC time as ISO 8601.
std::string utc_timestamp();

// ---- persistent state -------------------------------------------------------

/// Library file plus the learned APIs it depends on (`learned_apis`, a list of
/// def sources). Files without that field load with an empty registry.
struct AgentState {
  lang::ApiRegistry registry;
  DemoLibrary library;
};

AgentState load_state(const std::filesystem::path& path,
                      std::shared_ptr<const EmbeddingProvider> provider);
AgentState state_from_json(const nlohmann::json& doc,
                           std::shared_ptr<const EmbeddingProvider> provider);
nlohmann::json state_to_json(const lang::ApiRegistry& registry, const DemoLibrary& library);
void save_state(const std::filesystem::path& path, const lang::ApiRegistry& registry,
                const DemoLibrary& library);

/// The seed library compiled into the binary, with an empty registry.
AgentState builtin_state(std::shared_ptr<const EmbeddingProvider> provider);

}  // namespace triples
