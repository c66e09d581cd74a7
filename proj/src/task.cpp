#include "triples/task.hpp"

#include <sstream>

namespace triples {

std::string_view to_string(Implication i) {
  switch (i) {
    case Implication::relative_position: return "relative_position";
    case Implication::color: return "color";
    case Implication::geometry: return "geometry";
    case Implication::mass: return "mass";
  }
  return "?";
}

std::optional<Implication> implication_from_string(std::string_view s) {
  for (auto i : {Implication::relative_position, Implication::color, Implication::geometry,
                 Implication::mass}) {
    if (to_string(i) == s) return i;
  }
  return std::nullopt;
}

nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("expected a 3-element position array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json to_json(const GoalState& goal) {
  nlohmann::json targets = nlohmann::json::object();
  for (const auto& [name, pos] : goal.object_targets) targets[name] = to_json(pos);
  return {{"object_targets", targets},
          {"gripper_target", goal.gripper_target ? to_json(*goal.gripper_target) : nlohmann::json()},
          {"require_empty_hand", goal.require_empty_hand}};
}

GoalState goal_from_json(const nlohmann::json& j) {
  GoalState g;
  for (const auto& [name, pos] : j.at("object_targets").items()) {
    g.object_targets[name] = vec3_from_json(pos);
  }
  if (j.contains("gripper_target") && !j["gripper_target"].is_null()) {
    g.gripper_target = vec3_from_json(j["gripper_target"]);
  }
  g.require_empty_hand = j.value("require_empty_hand", true);
  return g;
}

nlohmann::json to_json(const TaskSpec& task) {
  nlohmann::json tags = nlohmann::json::array();
  for (auto i : task.implication) tags.push_back(std::string(to_string(i)));
  return {{"id", task.id},
          {"instruction", task.instruction},
          {"scenario", std::string(to_string(task.scenario))},
          {"seed", task.seed},
          {"goal", to_json(task.goal)},
          {"gt_code", task.gt_code ? nlohmann::json(*task.gt_code) : nlohmann::json()},
          {"implication", tags},
          {"complexity", task.complexity}};
}

TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec t;
  try {
    t.id = j.at("id").get<std::string>();
    t.instruction = j.at("instruction").get<std::string>();
    auto sc = scenario_from_string(j.at("scenario").get<std::string>());
    if (!sc) throw Error("unknown scenario '" + j.at("scenario").get<std::string>() + "'");
    t.scenario = *sc;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.goal = goal_from_json(j.at("goal"));
    if (j.contains("gt_code") && !j["gt_code"].is_null()) t.gt_code = j["gt_code"].get<std::string>();
    for (const auto& tag : j.value("implication", nlohmann::json::array())) {
      auto i = implication_from_string(tag.get<std::string>());
      if (!i) throw Error("unknown implication '" + tag.get<std::string>() + "'");
      t.implication.insert(*i);
    }
    t.complexity = j.value("complexity", 1);
  } catch (const nlohmann::json::exception& e) {
    throw Error(e.what());
  }
  if (t.instruction.empty()) throw Error("instruction must not be empty");
  return t;
}

std::vector<CodeSegment> split_steps(std::string_view code, std::string_view fallback_task) {
  std::vector<CodeSegment> out;
  std::istringstream in{std::string(code)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(kStepMarker, 0) == 0) {
      out.push_back({line.substr(kStepMarker.size()), line + "\n"});
    } else {
      if (out.empty()) out.push_back({std::string(fallback_task), ""});
      out.back().code += line + "\n";
    }
  }
  if (out.empty()) out.push_back({std::string(fallback_task), std::string(code)});
  return out;
}

}  // namespace triples
