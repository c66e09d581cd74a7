#include <gtest/gtest.h>

#include "support/update_scenario.hpp"

using namespace triples;

namespace {

struct ModeRun {
  LoopReport report;
  AgentState state;
};

ModeRun run_mode(UpdateMode mode, int epochs) {
  auto sc = triples::testing::make_update_scenario();
  auto state = state_from_json(sc.library, std::make_shared<HashedBagOfWords>());
  PipelineConfig cfg;
  cfg.update_mode = mode;
  cfg.epochs = epochs;
  auto backends = Backends::uniform(ScriptedBackend::from_json(sc.script));
  auto report = run_epoch_loop(sc.tasks, backends, TemplateSet::builtin(), state.registry,
                               state.library, cfg);
  return {std::move(report), std::move(state)};
}

int successes(const LoopReport& r) { return r.metrics.successes; }

}  // namespace

TEST(UpdateScenario, NearDuplicatesCollideOnlyPairwise) {
  auto sc = triples::testing::make_update_scenario();
  HashedBagOfWords bow;
  const double theta = PipelineConfig{}.theta_dup;
  for (std::size_t i = 0; i < sc.near_duplicates.size(); ++i) {
    for (std::size_t j = 0; j < sc.near_duplicates.size(); ++j) {
      double sim = cosine_sim(bow.embed(sc.near_duplicates[i].first),
                              bow.embed(sc.near_duplicates[j].second));
      if (i == j) {
        EXPECT_GE(sim, theta) << sc.near_duplicates[i].first;
      } else {
        EXPECT_LT(sim, theta) << i << " " << j;
      }
    }
  }
}

TEST(UpdateScenario, ModesOrderAsExpected) {
  auto none = run_mode(UpdateMode::none, 0);
  auto append = run_mode(UpdateMode::append, 1);
  auto del = run_mode(UpdateMode::append_delete, 1);
  for (const auto& r : del.report.results) {
    EXPECT_TRUE(r.success) << r.task_id << ": " << r.failure_reason;
  }
  EXPECT_EQ(successes(none.report), 5);
  EXPECT_EQ(successes(append.report), 7);
  EXPECT_EQ(successes(del.report), 10);
  EXPECT_EQ(append.state.registry.learned().size(), 3u);
  EXPECT_EQ(del.state.library.size(), 4u);
}
