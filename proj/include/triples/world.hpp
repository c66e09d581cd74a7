#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "triples/common.hpp"

namespace triples {

enum class Shape { cube, cylinder, triangle, cup };
enum class Color { red, green, blue, yellow, purple, orange };
enum class Observability { observable, partial };

/// Scenario family a world is spawned from. Observable worlds hold four
/// visually distinct blocks and two cups; partial worlds hold three movable
/// blocks whose masses are hidden, one fixed block and two cups.
enum class Scenario { observable, partial };

std::string_view to_string(Shape s);
std::string_view to_string(Color c);
std::string_view to_string(Scenario s);
std::optional<Shape> shape_from_string(std::string_view s);
std::optional<Color> color_from_string(std::string_view s);
std::optional<Scenario> scenario_from_string(std::string_view s);

inline constexpr double kBlockHeight = 0.04;
inline constexpr double kCupHeight = 0.10;
/// Horizontal extent used for stacking and collision tests.
inline constexpr double kFootprint = 0.04;
inline constexpr double kGeomTolerance = 1e-9;

struct Bounds {
  Vec3 min{0.0, -0.3, 0.0};
  Vec3 max{0.6, 0.3, 0.4};

  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
};

struct ObjectState {
  std::string name;
  Shape shape = Shape::cube;
  Color color = Color::red;
  double height = kBlockHeight;
  double mass = 0.1;
  Vec3 position;
  bool fixed = false;
  bool mass_visible = true;
};

struct GripperState {
  Vec3 position{0.3, 0.0, 0.3};
  std::optional<std::string> holding;
};

struct SensorRecord {
  std::string query;  // "pose" or "mass"
  std::string object;
  friend bool operator==(const SensorRecord&, const SensorRecord&) = default;
};

enum class ActionErrorKind {
  unknown_object,
  already_holding,
  hand_empty,
  object_fixed,
  unstable_grasp,
  out_of_bounds,
  occupied_target,
};

std::string_view to_string(ActionErrorKind k);

struct ActionError {
  ActionErrorKind kind;
  std::string message;
};

/// Empty on success. A failed action leaves the world untouched.
using ActionOutcome = std::optional<ActionError>;

/// Kinematic tabletop. Every action either applies completely or returns an
/// ActionError and leaves the state unchanged.
class WorldState {
 public:
  WorldState() = default;
  explicit WorldState(Observability mode, Bounds bounds = {}) : bounds_(bounds), mode_(mode) {}

  /// Adds an object; throws Error on duplicate name, bad dimensions or
  /// a position outside the bounds.
  void add_object(ObjectState obj);

  ActionOutcome pick(std::string_view name);
  ActionOutcome place_on(std::string_view base);
  ActionOutcome place_at(const Vec3& target);
  ActionOutcome move_gripper(const Vec3& delta);
  Result<Vec3, ActionError> get_obj_pose(std::string_view name);
  Result<double, ActionError> get_obj_mass(std::string_view name);

  /// Canonical text rendering used as the environment observation in prompts.
  std::string observe() const;

  /// Stable 64-bit digest over every field, including the sensor log.
  std::uint64_t digest() const;

  const std::map<std::string, ObjectState, std::less<>>& objects() const { return objects_; }
  const ObjectState* find(std::string_view name) const;
  const GripperState& gripper() const { return gripper_; }
  const Bounds& bounds() const { return bounds_; }
  Observability observability() const { return mode_; }
  const std::vector<SensorRecord>& sensor_log() const { return sensor_log_; }

  /// Test and generator hooks. They bypass action preconditions.
  ObjectState& mutable_object(std::string_view name);
  void set_gripper_position(const Vec3& p) { gripper_.position = p; }

  /// True if `upper` rests directly on `lower` (stacked or contained).
  static bool rests_on(const ObjectState& upper, const ObjectState& lower);

 private:
  ActionError unknown(std::string_view name) const;
  ObjectState* find_mut(std::string_view name);

  std::map<std::string, ObjectState, std::less<>> objects_;
  GripperState gripper_;
  Bounds bounds_;
  Observability mode_ = Observability::observable;
  std::vector<SensorRecord> sensor_log_;
};

/// Deterministically builds a world of the given family from `seed`.
WorldState spawn_world(Scenario scenario, std::uint64_t seed);

}  // namespace triples
