#pragma once

// A ten-task scripted scenario that separates the three library update modes.
//
// Five simple tasks always succeed; three of them teach an API when
// summarized. Five composite tasks succeed only when the scripted model sees
// the learned API in its prompt. For three of those, the seed library holds a
// stale demonstration whose task description nearly duplicates the learned
// one; while it is retrieved, the scripted model copies its outdated recipe
// and misses the goal. Only append_delete removes it.

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triples/demo_store.hpp"
#include "triples/lang/parser.hpp"
#include "triples/pipeline.hpp"

namespace triples::testing {

inline constexpr const char* kStaleMarker = "(legacy gripper calibration)";

struct UpdateScenario {
  std::vector<TaskSpec> tasks;
  nlohmann::json script;  // ScriptedBackend rules
  nlohmann::json library;  // initial state file: demos plus learned_apis
  std::vector<std::int64_t> stale_ids;
  /// (stale description, learned description) pairs meant to collide under append_delete.
  std::vector<std::pair<std::string, std::string>> near_duplicates;
};

namespace detail {

inline std::string q(const std::string& s) { return "\"" + s + "\""; }

inline std::string fence(const std::string& code) { return "```\n" + code + "```\n"; }

struct Api {
  std::string name;
  std::string params;  // "top, base"
  std::string body;
  std::string stale_description;
  std::string learned_description;
  std::string stale_thought;
  std::string learned_thought;

  std::string source() const { return "def " + name + "(" + params + "):\n" + body + "end\n"; }
  std::string signature() const { return name + "(" + params + ")"; }
};

inline std::string summary_reply(const Api& api, const std::string& example) {
  return "API:\n" + fence(api.source()) + "TASK_DESCRIPTION: " + api.learned_description +
         "\nTHOUGHT: " + api.learned_thought + "\nEXAMPLES:\n" + fence(example);
}

inline GoalState goal_of(const std::string& core_code, std::uint64_t seed) {
  auto program = lang::parse(core_code);
  if (!program) throw std::logic_error("scenario ground truth: " + program.error().to_line());
  auto run = lang::interpret(*program, spawn_world(Scenario::observable, seed), lang::ApiRegistry{});
  if (run.error) throw std::logic_error("scenario ground truth: " + run.error->to_line());
  GoalState g;
  for (const auto& [name, obj] : run.world.objects()) g.object_targets[name] = obj.position;
  return g;
}

}  // namespace detail

inline UpdateScenario make_update_scenario(std::uint64_t seed = 3) {
  using detail::fence;
  using detail::q;

  auto world = spawn_world(Scenario::observable, seed);
  std::vector<std::string> b, c;
  for (const auto& [name, obj] : world.objects()) (obj.shape == Shape::cup ? c : b).push_back(name);
  if (b.size() != 4 || c.size() != 2) throw std::logic_error("unexpected observable world layout");

  std::vector<detail::Api> apis = {
      {"stack_object_on_object", "top, base", "    pick(top)\n    place_on(base)\n",
       "stack one block on top of another block",
       "stack one block on top of another block at once",
       "The base goes in the gripper first " + std::string(kStaleMarker) + ".",
       "Call stack_object_on_object with the top block first."},
      {"put_object_in_cup", "obj, cup", "    pick(obj)\n    place_on(cup)\n",
       "put one block into a cup",
       "put one block into a cup in one step",
       "Cups are listed in reverse order " + std::string(kStaleMarker) + ".",
       "Call put_object_in_cup with the block and the cup."},
      {"pick_and_place_next_to", "obj, ref",
       "    p = get_obj_pose(ref)\n    pick(obj)\n    place_at(p.x, p.y + 0.05, p.z)\n",
       "place one block on the table next to another block",
       "place one block on the table next to another block in one step",
       "Offsets are measured to the right " + std::string(kStaleMarker) + ".",
       "Call pick_and_place_next_to with the moved block and the reference block."}};

  auto stack = [](const std::string& top, const std::string& base) {
    return "pick(" + q(top) + ")\nplace_on(" + q(base) + ")\n";
  };
  auto beside = [](const std::string& obj, const std::string& ref, const char* sign) {
    return "p = get_obj_pose(" + q(ref) + ")\npick(" + q(obj) + ")\nplace_at(p.x, p.y " +
           std::string(sign) + " 0.05, p.z)\n";
  };
  auto call = [](const std::string& api, const std::string& a, const std::string& b2) {
    return api + "(" + q(a) + ", " + q(b2) + ")\n";
  };

  struct Spec {
    std::string id;
    std::string text;  // instruction and its single minimal task
    std::string core;  // ground truth with core APIs only
    std::string answer;  // scripted reply when the model gets it right
    std::string wrong;  // reply when misled or missing the API
    int api = -1;  // learned API the correct answer needs
    bool stale = false;  // a stale near-duplicate misleads this task
    int teaches = -1;  // API its summary proposes
  };

  std::vector<Spec> specs = {
      {"S1", "stack " + b[1] + " on " + b[0], stack(b[1], b[0]), fence(stack(b[1], b[0])), "", -1,
       false, 0},
      {"S2", "put " + b[2] + " in " + c[0], stack(b[2], c[0]), fence(stack(b[2], c[0])), "", -1,
       false, 1},
      {"S3", "place " + b[3] + " beside " + b[0], beside(b[3], b[0], "+"),
       fence(beside(b[3], b[0], "+")), "", -1, false, 2},
      {"S4", "drop " + b[0] + " in " + c[1], stack(b[0], c[1]), fence(stack(b[0], c[1])), "", -1,
       false, -1},
      {"S5", "set " + b[3] + " onto " + b[2], stack(b[3], b[2]), fence(stack(b[3], b[2])), "", -1,
       false, -1},
      {"C1", "build a tower of " + b[0] + ", " + b[1] + " and " + b[2] + " from the bottom up",
       stack(b[1], b[0]) + stack(b[2], b[1]),
       fence(call(apis[0].name, b[1], b[0]) + call(apis[0].name, b[2], b[1])),
       fence(stack(b[0], b[1]) + stack(b[2], b[0])), 0, true},
      {"C2", "fill both cups: " + b[1] + " into " + c[0] + " and " + b[3] + " into " + c[1],
       stack(b[1], c[0]) + stack(b[3], c[1]),
       fence(call(apis[1].name, b[1], c[0]) + call(apis[1].name, b[3], c[1])),
       fence(stack(b[1], c[1]) + stack(b[3], c[0])), 1, true},
      {"C3", "line up " + b[1] + " beside " + b[0] + " and " + b[2] + " beside " + b[3],
       beside(b[1], b[0], "+") + beside(b[2], b[3], "+"),
       fence(call(apis[2].name, b[1], b[0]) + call(apis[2].name, b[2], b[3])),
       fence(beside(b[1], b[0], "-") + beside(b[2], b[3], "-")), 2, true},
      {"C4", "make two stacks: " + b[3] + " on " + b[2] + " and " + b[1] + " on " + b[0],
       stack(b[3], b[2]) + stack(b[1], b[0]),
       fence(call(apis[0].name, b[3], b[2]) + call(apis[0].name, b[1], b[0])),
       fence(call(apis[0].name, b[3], b[2]) + call(apis[0].name, b[1], b[0])), 0, false},
      {"C5", "tidy up: " + b[2] + " into " + c[1] + " and then " + b[0] + " next to " + b[3],
       stack(b[2], c[1]) + beside(b[0], b[3], "+"),
       fence(call(apis[1].name, b[2], c[1]) + call(apis[2].name, b[0], b[3])),
       fence(call(apis[1].name, b[2], c[1]) + call(apis[2].name, b[0], b[3])), 1, false},
  };
  // Matchers key on task text, so no task may contain another.
  for (const auto& s : specs) {
    for (const auto& o : specs) {
      if (&s != &o && o.text.find(s.text) != std::string::npos) {
        throw std::logic_error("task text " + s.id + " is contained in " + o.id);
      }
    }
  }

  UpdateScenario out;
  auto rule = [&](std::vector<std::string> match, std::string response) {
    out.script.push_back({{"match", std::move(match)}, {"response", std::move(response)}});
  };
  out.script = nlohmann::json::array();

  // Summaries first: only these prompts carry the code header.
  for (const auto& s : specs) {
    if (s.teaches < 0) continue;
    const auto& api = apis[static_cast<std::size_t>(s.teaches)];
    std::string example = s.teaches == 2 ? call(api.name, b[3], b[0])
                                         : call(api.name, s.teaches == 0 ? b[1] : b[2],
                                                s.teaches == 0 ? b[0] : c[0]);
    rule({"### Code", "### Task\n" + s.text}, detail::summary_reply(api, example));
  }
  rule({"### Code"}, "SKIP");

  for (const auto& s : specs) rule({"### Instruction\n" + s.text}, "TASK: " + s.text);

  for (const auto& s : specs) {
    std::string task = "### Task\n" + s.text;
    if (s.api < 0) {
      rule({task}, s.answer);
      continue;
    }
    if (s.stale) rule({task, kStaleMarker}, s.wrong);
    std::vector<std::string> need{task, apis[static_cast<std::size_t>(s.api)].signature()};
    if (s.id == "C5") need.push_back(apis[2].signature());  // uses two learned APIs
    rule(need, s.answer);
    rule({task}, s.wrong);
  }

  for (const auto& s : specs) {
    TaskSpec t;
    t.id = s.id;
    t.instruction = s.text;
    t.scenario = Scenario::observable;
    t.seed = seed;
    t.goal = detail::goal_of(s.core, seed);
    t.gt_code = s.core;
    t.complexity = s.id[0] == 'S' ? 1 : 2;
    out.tasks.push_back(std::move(t));
  }

  nlohmann::json demos = nlohmann::json::array();
  std::int64_t id = 1;
  for (const auto& api : apis) {
    std::string recipe = api.name == "stack_object_on_object" ? stack(b[0], b[1])
                         : api.name == "put_object_in_cup"    ? stack(b[1], c[1])
                                                              : beside(b[1], b[0], "-");
    demos.push_back({{"id", id},
                     {"task_description", api.stale_description},
                     {"thought", api.stale_thought},
                     {"examples", recipe},
                     {"source", "seed"}});
    out.stale_ids.push_back(id++);
    out.near_duplicates.emplace_back(api.stale_description, api.learned_description);
  }
  demos.push_back({{"id", id},
                   {"task_description", "find out how heavy a block is"},
                   {"thought", "Masses are read with get_obj_mass."},
                   {"examples", "m = get_obj_mass(" + q(b[0]) + ")\n"},
                   {"source", "seed"}});
  out.library = {{"version", 1}, {"demos", demos}, {"learned_apis", nlohmann::json::array()}};
  return out;
}

}  // namespace triples::testing
