#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triples/common.hpp"
#include "triples/world.hpp"

namespace triples {

/// Target configuration scored by the goal-error sum.
struct GoalState {
  std::map<std::string, Vec3> object_targets;
  std::optional<Vec3> gripper_target;
  bool require_empty_hand = true;
  friend bool operator==(const GoalState&, const GoalState&) = default;
};

enum class Implication { relative_position, color, geometry, mass };

std::string_view to_string(Implication i);
std::optional<Implication> implication_from_string(std::string_view s);

struct TaskSpec {
  std::string id;
  std::string instruction;
  Scenario scenario = Scenario::observable;
  std::uint64_t seed = 0;
  GoalState goal;
  std::optional<std::string> gt_code;
  std::set<Implication> implication;
  int complexity = 1;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

nlohmann::json to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GoalState& goal);
GoalState goal_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TaskSpec& task);
/// Throws Error describing the first schema violation.
TaskSpec task_from_json(const nlohmann::json& j);

/// Prefix of the comment line that opens each minimal-task segment of
/// ground-truth code: `# step: <minimal task>`.
inline constexpr std::string_view kStepMarker = "# step: ";

struct CodeSegment {
  std::string task;
  std::string code;
};

/// Splits ground-truth code at its step markers. Code without markers yields
/// one segment whose task is `fallback_task`.
std::vector<CodeSegment> split_steps(std::string_view code, std::string_view fallback_task);

}  // namespace triples
