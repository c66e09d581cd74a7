#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>

#include "triples/bench.hpp"
#include "triples/lang/parser.hpp"
#include "triples/pipeline.hpp"

using namespace triples;

namespace {

auto bow() { return std::make_shared<HashedBagOfWords>(); }

std::shared_ptr<Backend> oracle() { return std::make_shared<OracleBackend>(); }

std::shared_ptr<ScriptedBackend> scripted(const std::string& response) {
  return std::make_shared<ScriptedBackend>(
      std::vector<ScriptedBackend::Rule>{{std::vector<std::string>{"###"}, response}});
}

/// Counts calls and forwards them.
class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}
  BackendKind kind() const override { return inner_->kind(); }
  std::string complete(const std::vector<ChatMessage>& messages, const CallContext& ctx) override {
    ++calls;
    return inner_->complete(messages, ctx);
  }
  std::atomic<int> calls{0};

 private:
  std::shared_ptr<Backend> inner_;
};

ObjectState block(std::string name, Vec3 pos) {
  ObjectState o;
  o.name = std::move(name);
  o.position = pos;
  return o;
}

WorldState two_blocks() {
  WorldState w(Observability::observable);
  w.add_object(block("a", {0.2, 0.0, 0.02}));
  w.add_object(block("b", {0.3, 0.1, 0.02}));
  return w;
}

/// Task whose goal is whatever `gt` leaves behind on its world.
TaskSpec hand_task(std::string id, Scenario scenario, std::uint64_t seed, std::string instruction,
                   std::string gt) {
  TaskSpec t;
  t.id = std::move(id);
  t.scenario = scenario;
  t.seed = seed;
  t.instruction = std::move(instruction);
  t.gt_code = std::move(gt);
  auto program = lang::parse(*t.gt_code);
  if (!program) throw std::logic_error(program.error().to_line());
  auto run = lang::interpret(*program, spawn_world(scenario, seed), lang::ApiRegistry{});
  if (run.error) throw std::logic_error(run.error->to_line());
  for (const auto& [name, obj] : run.world.objects()) t.goal.object_targets[name] = obj.position;
  return t;
}

struct Fixture {
  lang::ApiRegistry registry;
  DemoLibrary library;
  Fixture() : library(builtin_state(bow()).library) {}
};

const char* kStackSummary = R"(API:
```
def stack_object_on_object(top, base):
    pick(top)
    place_on(base)
end
```
TASK_DESCRIPTION: stack one object on another
THOUGHT: pick the top object, then place it on the base
EXAMPLES:
```
stack_object_on_object("yellow_block", "red_block")
```
)";

}  // namespace

TEST(Evaluate, SummedDistanceAndPenalties) {
  auto w = two_blocks();
  GoalState goal;
  goal.object_targets = {{"a", {0.2, 0.0, 0.02}}, {"b", {0.3, 0.17, 0.02}}};
  auto far = evaluate(w, goal, 0.03);
  EXPECT_NEAR(far.err_value, 0.07, 1e-12);
  EXPECT_FALSE(far.success);

  goal.object_targets["b"] = {0.3, 0.101, 0.02};
  auto near = evaluate(w, goal, 0.03);
  EXPECT_NEAR(near.err_value, 0.001, 1e-12);
  EXPECT_TRUE(near.success);

  Vec3 g = w.gripper().position;
  goal.gripper_target = Vec3{g.x, g.y, g.z + 0.02};
  EXPECT_NEAR(evaluate(w, goal, 0.03).err_value, 0.021, 1e-12);

  goal.gripper_target.reset();
  ASSERT_FALSE(w.pick("a").has_value());
  EXPECT_NEAR(evaluate(w, goal, 0.03).err_value, 0.501, 1e-12);
  goal.require_empty_hand = false;
  EXPECT_NEAR(evaluate(w, goal, 0.03).err_value, 0.001, 1e-12);

  goal.object_targets["ghost"] = {0, 0, 0};
  EXPECT_THROW(evaluate(w, goal, 0.03), Error);
}

TEST(Episode, OracleSolvesGeneratedTasks) {
  Fixture f;
  auto ds = generate(17, 14, 6);
  auto backends = Backends::uniform(oracle());
  PipelineConfig cfg;
  for (const auto& t : ds.tasks) {
    auto out = run_episode(t, backends, TemplateSet::builtin(), f.registry, f.library, cfg);
    EXPECT_TRUE(out.result.success) << t.id << ": " << out.result.failure_reason;
    EXPECT_EQ(out.result.retries_used, 0);
    EXPECT_LE(out.result.err_value, cfg.epsilon);
    EXPECT_FALSE(out.result.minimal_tasks.empty());
  }
}

TEST(Episode, ImplicitColorAndShapeReferences) {
  // Find a world with a yellow block and exactly one cylinder that is not it.
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto w = spawn_world(Scenario::observable, seed);
    const ObjectState* yellow = w.find("yellow_block");
    if (!yellow) continue;
    std::vector<const ObjectState*> cylinders;
    for (const auto& [name, o] : w.objects()) {
      if (o.shape == Shape::cylinder) cylinders.push_back(&o);
    }
    if (cylinders.size() != 1 || cylinders[0] == yellow) continue;

    auto task = hand_task("hand-1", Scenario::observable, seed,
                          "stack the banana colored block on the circle block",
                          "pick(\"yellow_block\")\nplace_on(\"" + cylinders[0]->name + "\")\n");
    Fixture f;
    auto out = run_episode(task, Backends::uniform(oracle()), TemplateSet::builtin(), f.registry,
                           f.library, PipelineConfig{});
    EXPECT_TRUE(out.result.success) << out.result.failure_reason;
    const auto& top = out.world.objects().at("yellow_block").position;
    const auto& base = cylinders[0]->position;
    EXPECT_NEAR(top.x, base.x, 1e-9);
    EXPECT_NEAR(top.y, base.y, 1e-9);
    EXPECT_NEAR(top.z, base.z + kBlockHeight, 1e-9);
    return;
  }
  FAIL() << "no suitable world in 200 seeds";
}

TEST(Episode, FaultsConsumeRetries) {
  Fixture f;
  auto ds = generate(4, 3, 0);
  PipelineConfig cfg;
  for (int n = 1; n <= 3; ++n) {
    auto b = Backends::uniform(oracle());
    b.solve = std::make_shared<FaultyBackend>(oracle(), n);
    auto out = run_episode(ds.tasks[0], b, TemplateSet::builtin(), f.registry, f.library, cfg);
    EXPECT_TRUE(out.result.success) << n;
    EXPECT_EQ(out.result.retries_used, n);
  }
  auto b = Backends::uniform(oracle());
  b.solve = std::make_shared<FaultyBackend>(oracle(), 5);
  auto out = run_episode(ds.tasks[0], b, TemplateSet::builtin(), f.registry, f.library, cfg);
  EXPECT_FALSE(out.result.executable);
  EXPECT_FALSE(out.result.success);
  EXPECT_EQ(out.result.retries_used, cfg.max_retries);
  EXPECT_NE(out.result.failure_reason.find("retry budget"), std::string::npos);
}

TEST(Episode, GibberishSimplificationIsReaskedOnce) {
  Fixture f;
  auto ds = generate(4, 1, 0);
  auto counter = std::make_shared<CountingBackend>(scripted("I would rather not."));
  auto b = Backends::uniform(oracle());
  b.simplify = counter;
  auto out = run_episode(ds.tasks[0], b, TemplateSet::builtin(), f.registry, f.library,
                         PipelineConfig{});
  EXPECT_EQ(counter->calls.load(), 2);
  EXPECT_FALSE(out.result.executable);
  EXPECT_NE(out.result.failure_reason.find("simplification"), std::string::npos);
}

TEST(Episode, CodeThatNeverChecksIsNotExecutable) {
  Fixture f;
  auto ds = generate(4, 1, 0);
  auto counter = std::make_shared<CountingBackend>(scripted("```\npick(\n```"));
  auto b = Backends::uniform(oracle());
  b.solve = counter;
  PipelineConfig cfg;
  cfg.max_retries = 2;
  auto out = run_episode(ds.tasks[0], b, TemplateSet::builtin(), f.registry, f.library, cfg);
  EXPECT_FALSE(out.result.executable);
  EXPECT_EQ(out.result.retries_used, 2);
  EXPECT_EQ(counter->calls.load(), 3);
}

TEST(Episode, RuntimeErrorIsExecutableButFails) {
  Fixture f;
  auto w = spawn_world(Scenario::observable, 9);
  std::string name;
  for (const auto& [n, o] : w.objects()) {
    if (o.shape != Shape::cup) name = n;
  }
  auto task = hand_task("hand-2", Scenario::observable, 9, "pick " + name, "pick(\"" + name + "\")\n");
  auto b = Backends::uniform(oracle());
  b.solve = scripted("```\npick(\"" + name + "\")\npick(\"" + name + "\")\n```");
  auto out = run_episode(task, b, TemplateSet::builtin(), f.registry, f.library, PipelineConfig{});
  EXPECT_TRUE(out.result.executable);
  EXPECT_FALSE(out.result.success);
  EXPECT_NE(out.result.failure_reason.find("already holding"), std::string::npos);
}

TEST(Episode, UnreachableRemoteIsRecordedNotThrown) {
  Fixture f;
  auto ds = generate(4, 1, 0);
  RemoteBackend::Config rc;
  rc.endpoint = "http://127.0.0.1:1";
  rc.max_retries = 0;
  rc.timeout = std::chrono::milliseconds(200);
  auto out = run_episode(ds.tasks[0], Backends::uniform(std::make_shared<RemoteBackend>(rc)),
                         TemplateSet::builtin(), f.registry, f.library, PipelineConfig{});
  EXPECT_FALSE(out.result.executable);
  EXPECT_NE(out.result.failure_reason.find("backend"), std::string::npos);
}

TEST(Summarize, LearnsApiAndReplacesNearDuplicates) {
  lang::ApiRegistry registry;
  DemoLibrary library(bow());
  auto stale = library.add("stack one object on another", "old", "pick(\"a\")\nplace_on(\"b\")\n");
  library.add("put a block into a cup", "t", "pick(\"a\")\nplace_on(\"red_cup\")\n");
  auto b = Backends::uniform(oracle());
  b.summarize = scripted(kStackSummary);
  PipelineConfig cfg;
  cfg.update_mode = UpdateMode::append_delete;
  auto task = generate(4, 1, 0).tasks[0];
  auto world = spawn_world(task.scenario, task.seed);

  auto s = summarize_success(b, TemplateSet::builtin(), registry, library, task, world, "x", "y", cfg);
  ASSERT_TRUE(s.learned) << s.note;
  EXPECT_EQ(s.learned->api_name, "stack_object_on_object");
  EXPECT_TRUE(registry.has("stack_object_on_object"));
  EXPECT_EQ(library.find(stale), nullptr);
  EXPECT_EQ(library.size(), 2u);
  EXPECT_EQ(library.find(s.learned->demo_id)->source, DemoSource::learned);

  // The same API twice is refused and leaves everything unchanged.
  auto digest = library.digest();
  auto again = summarize_success(b, TemplateSet::builtin(), registry, library, task, world, "x", "y", cfg);
  EXPECT_FALSE(again.learned);
  EXPECT_EQ(library.digest(), digest);
}

TEST(Summarize, AppendKeepsDuplicatesAndNoneDoesNothing) {
  lang::ApiRegistry registry;
  DemoLibrary library(bow());
  library.add("stack one object on another", "old", "pick(\"a\")\nplace_on(\"b\")\n");
  auto b = Backends::uniform(oracle());
  b.summarize = scripted(kStackSummary);
  auto task = generate(4, 1, 0).tasks[0];
  auto world = spawn_world(task.scenario, task.seed);
  PipelineConfig cfg;
  auto none = summarize_success(b, TemplateSet::builtin(), registry, library, task, world, "x", "y", cfg);
  EXPECT_FALSE(none.learned);
  EXPECT_EQ(library.size(), 1u);
  cfg.update_mode = UpdateMode::append;
  auto s = summarize_success(b, TemplateSet::builtin(), registry, library, task, world, "x", "y", cfg);
  ASSERT_TRUE(s.learned);
  EXPECT_EQ(library.size(), 2u);
}

TEST(Summarize, SkipAndBadProposalsAreRejected) {
  lang::ApiRegistry registry;
  DemoLibrary library(bow());
  auto task = generate(4, 1, 0).tasks[0];
  auto world = spawn_world(task.scenario, task.seed);
  PipelineConfig cfg;
  cfg.update_mode = UpdateMode::append;
  auto b = Backends::uniform(oracle());

  auto skip = summarize_success(b, TemplateSet::builtin(), registry, library, task, world, "x", "y", cfg);
  EXPECT_FALSE(skip.learned);
  EXPECT_EQ(skip.note, "summary skipped");

  std::string unknown = kStackSummary;
  unknown.replace(unknown.find("stack_object_on_object(\"yellow"), 22, "stack_thing_on_thingxx");
  b.summarize = scripted(unknown);
  auto bad = summarize_success(b, TemplateSet::builtin(), registry, library, task, world, "x", "y", cfg);
  EXPECT_FALSE(bad.learned);
  EXPECT_NE(bad.note.find("rejected"), std::string::npos);
  EXPECT_TRUE(registry.learned().empty());
  EXPECT_EQ(library.size(), 0u);
}

TEST(EpochLoop, HistoryAndFrozenPurity) {
  auto ds = generate(23, 8, 4);
  Fixture f;
  PipelineConfig cfg;
  cfg.epochs = 2;
  auto none = run_epoch_loop(ds.tasks, Backends::uniform(oracle()), TemplateSet::builtin(),
                             f.registry, f.library, cfg);
  ASSERT_EQ(none.history.size(), 2u);
  EXPECT_EQ(none.history[0].pass, "initial");
  EXPECT_EQ(none.history[1].pass, "frozen");
  EXPECT_EQ(none.history[0].library_digest, none.history[1].library_digest);
  EXPECT_EQ(none.metrics.sr, 1.0);

  cfg.update_mode = UpdateMode::append;
  auto b = Backends::uniform(oracle());
  b.summarize = scripted(kStackSummary);
  auto up = run_epoch_loop(ds.tasks, b, TemplateSet::builtin(), f.registry, f.library, cfg);
  ASSERT_EQ(up.history.size(), 4u);
  EXPECT_EQ(up.history[1].pass, "update-1");
  EXPECT_EQ(up.history[2].pass, "update-2");
  EXPECT_NE(up.history[0].library_digest, up.history[1].library_digest);
  EXPECT_EQ(up.history[1].learned_apis, std::vector<std::string>{"stack_object_on_object"});
  // Nothing changes during the frozen pass.
  EXPECT_EQ(up.history[2].library_digest, up.history[3].library_digest);
  EXPECT_EQ(up.history[2].registry_digest, up.history[3].registry_digest);
  EXPECT_EQ(f.library.digest(), up.history[3].library_digest);
  EXPECT_FALSE(up.notes.empty());
}

TEST(EpochLoop, ParallelMatchesSequentialAndRunsAreDeterministic) {
  auto ds = generate(29, 10, 5);
  PipelineConfig cfg;
  auto run = [&](bool sequential) {
    Fixture f;
    PipelineConfig c = cfg;
    c.sequential = sequential;
    c.jobs = 3;
    auto b = Backends::uniform(oracle());
    b.solve = std::make_shared<FaultyBackend>(oracle(), 0);
    auto r = run_epoch_loop(ds.tasks, b, TemplateSet::builtin(), f.registry, f.library, c);
    return make_run_report(cfg, r, true, "T");
  };
  auto a = run(true);
  EXPECT_EQ(a, run(true));
  EXPECT_EQ(a["per_task"], run(false)["per_task"]);
  EXPECT_EQ(a["timestamp"], "T");
  for (const char* key : {"config", "per_task", "metrics", "library_digests", "notes"}) {
    EXPECT_TRUE(a.contains(key)) << key;
  }
}

TEST(EpochLoop, AnyBackendImplementationPlugsIn) {
  // A backend defined outside the library behaves like the one it wraps.
  auto ds = generate(31, 5, 2);
  Fixture f1, f2;
  auto counter = std::make_shared<CountingBackend>(oracle());
  auto wrapped = run_epoch_loop(ds.tasks, Backends::uniform(counter), TemplateSet::builtin(),
                                f1.registry, f1.library, PipelineConfig{});
  auto direct = run_epoch_loop(ds.tasks, Backends::uniform(oracle()), TemplateSet::builtin(),
                               f2.registry, f2.library, PipelineConfig{});
  EXPECT_GT(counter->calls.load(), 0);
  EXPECT_EQ(wrapped.metrics, direct.metrics);
}

TEST(EpochLoop, RejectsBadInput) {
  Fixture f;
  PipelineConfig cfg;
  EXPECT_THROW(run_epoch_loop({}, Backends::uniform(oracle()), TemplateSet::builtin(), f.registry,
                              f.library, cfg),
               Error);
  cfg.k = 0;
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.epsilon = -1;
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.theta_dup = 1.5;
  EXPECT_THROW(validate(cfg), Error);
}

TEST(State, RoundTripKeepsLearnedApis) {
  auto st = builtin_state(bow());
  EXPECT_EQ(st.library.size(), 6u);
  EXPECT_TRUE(st.registry.learned().empty());
  ASSERT_FALSE(st.registry.register_api("def lift(o):\n    pick(o)\n    move(0, 0, 0.1)\nend\n"));
  st.library.add("lift a block", "pick then raise", "lift(\"red_block\")\n", DemoSource::learned);

  auto path = std::filesystem::temp_directory_path() / "triples_state_roundtrip.json";
  save_state(path, st.registry, st.library);
  auto back = load_state(path, bow());
  std::filesystem::remove(path);
  EXPECT_EQ(back.library.digest(), st.library.digest());
  EXPECT_EQ(back.registry.digest(), st.registry.digest());
  EXPECT_TRUE(back.registry.has("lift"));

  // A library whose demos call an API missing from the file is refused.
  auto doc = state_to_json(st.registry, st.library);
  doc["learned_apis"] = nlohmann::json::array();
  EXPECT_THROW(state_from_json(doc, bow()), Error);
}
