#include "triples/bench.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "triples/assets_data.hpp"
#include "triples/lang/checker.hpp"
#include "triples/lang/interpreter.hpp"
#include "triples/lang/parser.hpp"
#include "triples/pipeline.hpp"

namespace triples {

// ---- dataset files ----------------------------------------------------------

nlohmann::json to_json(const Dataset& ds) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : ds.tasks) tasks.push_back(to_json(t));
  return {{"version", ds.version}, {"generator_seed", ds.generator_seed}, {"tasks", tasks}};
}

Dataset dataset_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error("dataset: top level must be an object");
  if (doc.value("version", 0) != 1) throw Error("dataset: unsupported version");
  if (!doc.contains("tasks") || !doc["tasks"].is_array()) throw Error("dataset: missing tasks list");
  Dataset ds;
  ds.generator_seed = doc.value("generator_seed", std::uint64_t{0});
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc["tasks"].size(); ++i) {
    try {
      ds.tasks.push_back(task_from_json(doc["tasks"][i]));
    } catch (const Error& e) {
      throw Error("dataset: tasks[" + std::to_string(i) + "]: " + e.what());
    }
    if (!ids.insert(ds.tasks.back().id).second) {
      throw Error("dataset: duplicate task id '" + ds.tasks.back().id + "'");
    }
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset " + path.string());
  try {
    return dataset_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("dataset " + path.string() + ": " + e.what());
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset " + path.string());
  out << to_json(ds).dump(2) << "\n";
  if (!out) throw Error("failed writing dataset " + path.string());
}

// ---- lexicon ----------------------------------------------------------------

Lexicon Lexicon::from_json(const nlohmann::json& doc) {
  Lexicon lex;
  try {
    for (const auto& [name, phrases] : doc.at("colors").items()) {
      auto c = color_from_string(name);
      if (!c) throw Error("lexicon: unknown color '" + name + "'");
      lex.colors[*c] = phrases.get<std::vector<std::string>>();
    }
    for (const auto& [name, phrases] : doc.at("shapes").items()) {
      auto s = shape_from_string(name);
      if (!s) throw Error("lexicon: unknown shape '" + name + "'");
      lex.shapes[*s] = phrases.get<std::vector<std::string>>();
    }
    for (const auto& [name, v] : doc.at("directions").items()) lex.directions[name] = vec3_from_json(v);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("lexicon: ") + e.what());
  }
  for (auto c : {Color::red, Color::green, Color::blue, Color::yellow, Color::purple, Color::orange}) {
    if (lex.colors[c].empty()) throw Error("lexicon: no phrases for " + std::string(to_string(c)));
  }
  return lex;
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lex = from_json(nlohmann::json::parse(assets::lexicon));
  return lex;
}

// ---- complexity -------------------------------------------------------------

int complexity_level(std::size_t implications, std::size_t core_steps) {
  std::size_t level = implications + (core_steps + 3) / 4;
  return static_cast<int>(std::clamp<std::size_t>(level, 1, 7));
}

namespace {

// Runs ground truth on the task's own world. Throws Error when it cannot.
lang::InterpretResult run_ground_truth(const TaskSpec& task) {
  if (!task.gt_code) throw Error("task " + task.id + " has no ground-truth code");
  auto program = lang::parse(*task.gt_code);
  if (!program) throw Error("ground truth does not parse: " + program.error().to_line());
  lang::ApiRegistry core;
  auto run = lang::interpret(*program, spawn_world(task.scenario, task.seed), core);
  if (run.error) throw Error("ground truth fails: " + run.error->to_line());
  return run;
}

}  // namespace

int assign_complexity(const TaskSpec& task) {
  auto run = run_ground_truth(task);
  return complexity_level(task.implication.size(), run.trace.steps.size());
}

std::vector<VerifyFailure> verify_dataset(const Dataset& ds, double epsilon) {
  std::vector<VerifyFailure> failures;
  std::set<std::string> ids;
  for (const auto& task : ds.tasks) {
    if (!ids.insert(task.id).second) {
      failures.push_back({task.id, "duplicate task id"});
      continue;
    }
    try {
      auto run = run_ground_truth(task);
      auto ev = evaluate(run.world, task.goal, epsilon);
      if (!ev.success) {
        failures.push_back({task.id, "ground truth misses the goal by " +
                                         format_number(ev.err_value) + " m"});
      }
    } catch (const Error& e) {
      failures.push_back({task.id, e.what()});
    }
  }
  return failures;
}

// ---- generator --------------------------------------------------------------

namespace {

using Rng = std::mt19937_64;

std::size_t draw(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
const T& choose(Rng& rng, const std::vector<T>& items) {
  return items[draw(rng, items.size())];
}

std::string str_lit(const std::string& name) { return "\"" + name + "\""; }

std::string step(const std::string& task, const std::string& code) {
  return std::string(kStepMarker) + task + "\n" + code;
}

std::string pick_place(const std::string& obj, const std::string& base) {
  return "pick(" + str_lit(obj) + ")\nplace_on(" + str_lit(base) + ")\n";
}

struct Draft {
  std::string instruction;
  std::string gt_code;
  std::set<Implication> tags;
  bool gripper_goal = false;
  bool empty_hand = true;
};

/// A way of referring to an object in an instruction.
struct Ref {
  std::string phrase;
  std::optional<Implication> tag;
};

class Scene {
 public:
  Scene(const WorldState& world, const Lexicon& lex, Rng& rng) : world_(world), lex_(lex), rng_(rng) {
    for (const auto& [name, obj] : world.objects()) {
      if (obj.shape == Shape::cup) {
        cups.push_back(&obj);
      } else {
        all_blocks.push_back(&obj);
        if (!obj.fixed) blocks.push_back(&obj);
      }
    }
  }

  Rng& rng() { return rng_; }
  const Lexicon& lexicon() const { return lex_; }
  const Bounds& bounds() const { return world_.bounds(); }

  bool unique_shape(const ObjectState& obj) const {
    return std::count_if(all_blocks.begin(), all_blocks.end(),
                         [&](const ObjectState* b) { return b->shape == obj.shape; }) == 1;
  }

  Ref by_color(const ObjectState& obj) {
    std::string noun = obj.shape == Shape::cup ? "cup" : "block";
    return {"the " + choose(rng_, lex_.colors.at(obj.color)) + " " + noun, Implication::color};
  }

  Ref by_shape(const ObjectState& obj) {
    return {"the " + choose(rng_, lex_.shapes.at(obj.shape)) + " block", Implication::geometry};
  }

  Ref plain(const ObjectState& obj) { return {obj.name, std::nullopt}; }

  /// Any reference that identifies `obj` uniquely.
  Ref any_ref(const ObjectState& obj, bool allow_plain = true) {
    std::vector<int> kinds{0};
    if (obj.shape != Shape::cup && unique_shape(obj) && lex_.shapes.count(obj.shape)) kinds.push_back(1);
    if (allow_plain) kinds.push_back(2);
    switch (choose(rng_, kinds)) {
      case 0: return by_color(obj);
      case 1: return by_shape(obj);
      default: return plain(obj);
    }
  }

  /// `count` distinct movable blocks.
  std::vector<const ObjectState*> distinct_blocks(std::size_t count) {
    std::vector<const ObjectState*> pool = blocks;
    std::vector<const ObjectState*> out;
    while (out.size() < count && !pool.empty()) {
      std::size_t i = draw(rng_, pool.size());
      out.push_back(pool[i]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
    }
    return out;
  }

  std::vector<const ObjectState*> cups;
  std::vector<const ObjectState*> blocks;      // movable
  std::vector<const ObjectState*> all_blocks;  // including fixed

 private:
  const WorldState& world_;
  const Lexicon& lex_;
  Rng& rng_;
};

void tag(Draft& d, const Ref& r) {
  if (r.tag) d.tags.insert(*r.tag);
}

// -- observable families --

std::optional<Draft> plain_task(Scene& s) {
  auto picked = s.distinct_blocks(2);
  Draft d;
  if (draw(s.rng(), 2) == 0) {
    d.instruction = "stack " + picked[0]->name + " on " + picked[1]->name;
    d.gt_code = pick_place(picked[0]->name, picked[1]->name);
  } else {
    const auto* cup = choose(s.rng(), s.cups);
    d.instruction = "put " + picked[0]->name + " in " + cup->name;
    d.gt_code = pick_place(picked[0]->name, cup->name);
  }
  return d;
}

std::optional<Draft> color_task(Scene& s) {
  const auto* obj = s.distinct_blocks(1)[0];
  Draft d;
  Ref r = s.by_color(*obj);
  tag(d, r);
  if (draw(s.rng(), 2) == 0) {
    const auto* cup = choose(s.rng(), s.cups);
    Ref c = s.any_ref(*cup);
    tag(d, c);
    d.instruction = "put " + r.phrase + " in " + c.phrase;
    d.gt_code = step("put " + obj->name + " in " + cup->name, pick_place(obj->name, cup->name));
  } else {
    auto others = s.distinct_blocks(4);
    const ObjectState* base = nullptr;
    for (const auto* o : others) {
      if (o != obj) base = o;
    }
    if (!base) return std::nullopt;
    Ref b = s.any_ref(*base);
    tag(d, b);
    d.instruction = "stack " + r.phrase + " on " + b.phrase;
    d.gt_code = step("stack " + obj->name + " on " + base->name, pick_place(obj->name, base->name));
  }
  return d;
}

std::optional<Draft> geometry_task(Scene& s) {
  std::vector<const ObjectState*> shaped;
  for (const auto* b : s.blocks) {
    if (s.unique_shape(*b) && s.lexicon().shapes.count(b->shape)) shaped.push_back(b);
  }
  if (shaped.empty()) return std::nullopt;
  const auto* obj = choose(s.rng(), shaped);
  Draft d;
  Ref r = s.by_shape(*obj);
  tag(d, r);
  std::vector<const ObjectState*> bases;
  for (const auto* b : s.all_blocks) {
    if (b != obj) bases.push_back(b);
  }
  const auto* base = choose(s.rng(), bases);
  Ref b = s.any_ref(*base);
  tag(d, b);
  d.instruction = "stack " + r.phrase + " on " + b.phrase;
  d.gt_code = step("stack " + obj->name + " on " + base->name, pick_place(obj->name, base->name));
  return d;
}

struct Extreme {
  std::string phrase;
  double (*score)(const ObjectState&, const WorldState*, const ObjectState*);
};

std::optional<Draft> relative_task(Scene& s, const WorldState& world) {
  // Scores are maximized; the winner must lead the runner-up clearly.
  static const std::vector<Extreme> kinds{
      {"the leftmost block", [](const ObjectState& o, const WorldState*, const ObjectState*) {
         return o.position.y;
       }},
      {"the rightmost block", [](const ObjectState& o, const WorldState*, const ObjectState*) {
         return -o.position.y;
       }},
      {"the block farthest from the robot",
       [](const ObjectState& o, const WorldState*, const ObjectState*) { return o.position.x; }},
      {"the block closest to the robot",
       [](const ObjectState& o, const WorldState*, const ObjectState*) { return -o.position.x; }},
      {"the block nearest to ", [](const ObjectState& o, const WorldState*, const ObjectState* cup) {
         return -distance(o.position, cup->position);
       }},
  };
  std::size_t k = draw(s.rng(), kinds.size());
  const ObjectState* anchor = choose(s.rng(), s.cups);
  const ObjectState* best = nullptr;
  double best_score = 0.0;
  double second = -1e9;
  for (const auto* b : s.blocks) {
    double sc = kinds[k].score(*b, &world, anchor);
    if (!best || sc > best_score) {
      if (best) second = std::max(second, best_score);
      best = b;
      best_score = sc;
    } else {
      second = std::max(second, sc);
    }
  }
  if (!best || best_score - second < 1e-6) return std::nullopt;

  Draft d;
  d.tags.insert(Implication::relative_position);
  std::string phrase = kinds[k].phrase;
  if (k == 4) {
    Ref a = s.any_ref(*anchor);
    tag(d, a);
    phrase += a.phrase;
  }
  if (draw(s.rng(), 2) == 0) {
    const ObjectState* cup = choose(s.rng(), s.cups);
    Ref c = s.any_ref(*cup);
    tag(d, c);
    d.instruction = "put " + phrase + " in " + c.phrase;
    d.gt_code = step("put " + best->name + " in " + cup->name, pick_place(best->name, cup->name));
  } else {
    std::vector<const ObjectState*> bases;
    for (const auto* b : s.all_blocks) {
      if (b != best) bases.push_back(b);
    }
    const auto* base = choose(s.rng(), bases);
    Ref b = s.any_ref(*base);
    tag(d, b);
    d.instruction = "stack " + phrase + " on " + b.phrase;
    d.gt_code = step("stack " + best->name + " on " + base->name, pick_place(best->name, base->name));
  }
  return d;
}

std::optional<Draft> gripper_task(Scene& s) {
  const auto* obj = s.distinct_blocks(1)[0];
  double amount = choose(s.rng(), std::vector<double>{0.05, 0.1});
  // The held block ends up where the gripper goes, so stay inside the workspace.
  std::vector<std::string> dirs;
  for (const auto& [name, unit] : s.lexicon().directions) {
    Vec3 end{obj->position.x + unit.x * amount, obj->position.y + unit.y * amount,
             obj->position.z + unit.z * amount};
    if (name != "down" && s.bounds().contains(end)) dirs.push_back(name);
  }
  if (dirs.empty()) return std::nullopt;
  const std::string& dir = choose(s.rng(), dirs);
  Vec3 delta = s.lexicon().directions.at(dir);
  delta = {delta.x * amount, delta.y * amount, delta.z * amount};
  Draft d;
  Ref r = s.any_ref(*obj);
  tag(d, r);
  std::string len = format_number(amount);
  d.instruction = "pick up " + r.phrase + " and move it " + len + " meters " + dir;
  d.gt_code = step("pick " + obj->name, "pick(" + str_lit(obj->name) + ")\n") +
              step("Move the gripper " + len + " " + dir,
                   "move(" + format_number(delta.x) + ", " + format_number(delta.y) + ", " +
                       format_number(delta.z) + ")\n");
  d.gripper_goal = true;
  d.empty_hand = false;
  return d;
}

std::optional<Draft> tower_task(Scene& s) {
  auto picked = s.distinct_blocks(3);
  if (picked.size() < 3) return std::nullopt;
  Draft d;
  std::vector<Ref> refs;
  for (const auto* p : picked) {
    refs.push_back(s.any_ref(*p));
    tag(d, refs.back());
  }
  d.instruction = "build a tower with " + refs[0].phrase + " at the bottom, " + refs[1].phrase +
                  " in the middle and " + refs[2].phrase + " on top";
  d.gt_code = step("stack " + picked[1]->name + " on " + picked[0]->name,
                   pick_place(picked[1]->name, picked[0]->name)) +
              step("stack " + picked[2]->name + " on " + picked[1]->name,
                   pick_place(picked[2]->name, picked[1]->name));
  return d;
}

std::optional<Draft> combo_task(Scene& s) {
  auto picked = s.distinct_blocks(2);
  const auto* cup = choose(s.rng(), s.cups);
  Draft d;
  Ref x = s.any_ref(*picked[0], false);
  Ref y = s.any_ref(*picked[1], false);
  Ref c = s.any_ref(*cup);
  for (const auto& r : {x, y, c}) tag(d, r);
  d.instruction = "put " + x.phrase + " in " + c.phrase + ", then stack " + y.phrase + " on it";
  d.gt_code = step("put " + picked[0]->name + " in " + cup->name,
                   pick_place(picked[0]->name, cup->name)) +
              step("stack " + picked[1]->name + " on " + picked[0]->name,
                   pick_place(picked[1]->name, picked[0]->name));
  return d;
}

// -- partially observable families --

std::vector<std::string> movable_names(const Scene& s) {
  std::vector<std::string> names;
  for (const auto* b : s.blocks) names.push_back(b->name);
  return names;
}

std::string fixed_name(const Scene& s) {
  for (const auto* b : s.all_blocks) {
    if (b->fixed) return b->name;
  }
  throw std::logic_error("partial world without a fixed block");
}

std::string mass_reads(const std::vector<std::string>& n) {
  std::string code;
  for (std::size_t i = 0; i < n.size(); ++i) {
    code += "m" + std::to_string(i + 1) + " = get_obj_mass(" + str_lit(n[i]) + ")\n";
  }
  return code;
}

// Picks the lightest (or heaviest) of three blocks with nested conditionals.
std::string pick_extreme(const std::vector<std::string>& n, bool lightest) {
  std::string op = lightest ? " < " : " > ";
  auto p = [](const std::string& name) { return "        pick(\"" + name + "\")\n"; };
  return mass_reads(n) + "if m1" + op + "m2:\n    if m1" + op + "m3:\n" + p(n[0]) +
         "    else:\n" + p(n[2]) + "    end\nelse:\n    if m2" + op + "m3:\n" + p(n[1]) +
         "    else:\n" + p(n[2]) + "    end\nend\n";
}

std::optional<Draft> extreme_task(Scene& s) {
  auto names = movable_names(s);
  if (names.size() != 3) return std::nullopt;
  bool lightest = draw(s.rng(), 2) == 0;
  std::string which = lightest ? "lightest" : "heaviest";
  Draft d;
  d.tags.insert(Implication::mass);
  std::string target;
  std::string target_phrase;
  if (draw(s.rng(), 2) == 0) {
    const auto* cup = choose(s.rng(), s.cups);
    Ref c = s.any_ref(*cup);
    tag(d, c);
    target = cup->name;
    target_phrase = "in " + c.phrase;
    d.instruction = "pick up the " + which + " block and put it " + target_phrase;
  } else {
    target = fixed_name(s);
    d.instruction = "put the " + which + " block on " + target;
  }
  d.gt_code = step("put the " + which + " of " + names[0] + ", " + names[1] + " and " + names[2] +
                       (target == fixed_name(s) ? " on " : " in ") + target,
                   pick_extreme(names, lightest) + "place_on(" + str_lit(target) + ")\n");
  return d;
}

std::string swap_if_lighter(const std::string& a, const std::string& b) {
  std::string ma = "m" + a.substr(1);
  std::string mb = "m" + b.substr(1);
  return "if " + ma + " < " + mb + ":\n    t = " + a + "\n    " + a + " = " + b + "\n    " + b +
         " = t\n    tm = " + ma + "\n    " + ma + " = " + mb + "\n    " + mb + " = tm\nend\n";
}

std::optional<Draft> sort_task(Scene& s) {
  auto names = movable_names(s);
  if (names.size() != 3) return std::nullopt;
  std::string base = fixed_name(s);
  Draft d;
  d.tags.insert(Implication::mass);
  d.instruction = "stack the three movable blocks on " + base +
                  " with the heaviest at the bottom and the lightest on top";
  std::string code;
  for (std::size_t i = 0; i < 3; ++i) {
    std::string v = "b" + std::to_string(i + 1);
    code += v + " = " + str_lit(names[i]) + "\n";
    code += "m" + std::to_string(i + 1) + " = get_obj_mass(" + v + ")\n";
  }
  code += swap_if_lighter("b1", "b2") + swap_if_lighter("b2", "b3") + swap_if_lighter("b1", "b2");
  code += "pick(b1)\nplace_on(" + str_lit(base) + ")\npick(b2)\nplace_on(b1)\npick(b3)\nplace_on(b2)\n";
  d.gt_code = step("stack " + names[0] + ", " + names[1] + " and " + names[2] + " on " + base +
                       " from heaviest to lightest",
                   code);
  return d;
}

std::optional<Draft> partial_color_task(Scene& s) {
  const auto* obj = s.distinct_blocks(1)[0];
  const auto* cup = choose(s.rng(), s.cups);
  Draft d;
  Ref r = s.any_ref(*obj, false);
  Ref c = s.any_ref(*cup);
  tag(d, r);
  tag(d, c);
  d.instruction = "put " + r.phrase + " in " + c.phrase;
  d.gt_code = step("put " + obj->name + " in " + cup->name, pick_place(obj->name, cup->name));
  return d;
}

// Ground truth must parse and pass the checker piece by piece, because the
// oracle answers with those pieces.
void check_draft(const Draft& d, const WorldState& world, const std::string& id) {
  lang::ApiRegistry core;
  for (const auto& seg : split_steps(d.gt_code, d.instruction)) {
    auto program = lang::parse(seg.code);
    if (!program) throw std::logic_error(id + ": generated code does not parse: " + program.error().to_line());
    auto diags = lang::static_check(*program, core, &world);
    if (!diags.empty()) throw std::logic_error(id + ": generated code fails checks: " + diags[0].to_line());
  }
}

TaskSpec make_task(Rng& rng, Scenario scenario, const std::string& id, const Lexicon& lex) {
  for (;;) {
    std::uint64_t world_seed = rng();
    WorldState world = spawn_world(scenario, world_seed);
    Scene scene(world, lex, rng);
    std::optional<Draft> draft;
    if (scenario == Scenario::observable) {
      switch (draw(rng, 7)) {
        case 0: draft = plain_task(scene); break;
        case 1: draft = color_task(scene); break;
        case 2: draft = geometry_task(scene); break;
        case 3: draft = relative_task(scene, world); break;
        case 4: draft = gripper_task(scene); break;
        case 5: draft = tower_task(scene); break;
        default: draft = combo_task(scene); break;
      }
    } else {
      switch (draw(rng, 4)) {
        case 0: draft = extreme_task(scene); break;
        case 1: draft = sort_task(scene); break;
        case 2: draft = partial_color_task(scene); break;
        default: draft = plain_task(scene); break;
      }
    }
    if (!draft) continue;
    check_draft(*draft, world, id);

    TaskSpec task;
    task.id = id;
    task.instruction = draft->instruction;
    task.scenario = scenario;
    task.seed = world_seed;
    task.gt_code = draft->gt_code;
    task.implication = draft->tags;
    auto run = run_ground_truth(task);
    for (const auto& [name, obj] : run.world.objects()) task.goal.object_targets[name] = obj.position;
    if (draft->gripper_goal) task.goal.gripper_target = run.world.gripper().position;
    task.goal.require_empty_hand = draft->empty_hand;
    task.complexity = complexity_level(task.implication.size(), run.trace.steps.size());
    return task;
  }
}

std::string task_id(const char* prefix, int i) {
  std::string n = std::to_string(i + 1);
  return std::string(prefix) + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
}

}  // namespace

Dataset generate(std::uint64_t seed, int n_observable, int n_partial, const Lexicon& lexicon) {
  if (n_observable < 0 || n_partial < 0) throw Error("task counts must not be negative");
  Dataset ds;
  ds.generator_seed = seed;
  Rng rng(seed);
  for (int i = 0; i < n_observable; ++i) {
    ds.tasks.push_back(make_task(rng, Scenario::observable, task_id("obs-", i), lexicon));
  }
  for (int i = 0; i < n_partial; ++i) {
    ds.tasks.push_back(make_task(rng, Scenario::partial, task_id("par-", i), lexicon));
  }
  return ds;
}

}  // namespace triples
