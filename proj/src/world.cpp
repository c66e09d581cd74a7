#include "triples/world.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace triples {

namespace {

constexpr std::array<std::string_view, 4> kShapeNames{"cube", "cylinder", "triangle", "cup"};
constexpr std::array<std::string_view, 6> kColorNames{"red",    "green",  "blue",
                                                      "yellow", "purple", "orange"};
constexpr std::array<std::string_view, 2> kScenarioNames{"observable", "partial"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

// Compact coordinate text for observations: 4 decimals, trailing zeros trimmed.
std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string vec_text(const Vec3& p) {
  return "(" + coord(p.x) + ", " + coord(p.y) + ", " + coord(p.z) + ")";
}

ActionError make_error(ActionErrorKind kind, std::string message) {
  return ActionError{kind, std::move(message)};
}

std::string out_of_bounds_message(const Vec3& p, const Bounds& b) {
  return "position " + vec_text(p) + " is outside the workspace x[" + coord(b.min.x) + ", " +
         coord(b.max.x) + "] y[" + coord(b.min.y) + ", " + coord(b.max.y) + "] z[" +
         coord(b.min.z) + ", " + coord(b.max.z) + "]";
}

bool footprints_overlap(const Vec3& a, const Vec3& b) {
  double dx = a.x - b.x;
  double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy) < kFootprint - kGeomTolerance;
}

}  // namespace

std::string_view to_string(Shape s) { return kShapeNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Color c) { return kColorNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(Scenario s) { return kScenarioNames[static_cast<std::size_t>(s)]; }
std::optional<Shape> shape_from_string(std::string_view s) { return lookup<Shape>(kShapeNames, s); }
std::optional<Color> color_from_string(std::string_view s) { return lookup<Color>(kColorNames, s); }
std::optional<Scenario> scenario_from_string(std::string_view s) {
  return lookup<Scenario>(kScenarioNames, s);
}

std::string_view to_string(ActionErrorKind k) {
  switch (k) {
    case ActionErrorKind::unknown_object: return "unknown_object";
    case ActionErrorKind::already_holding: return "already_holding";
    case ActionErrorKind::hand_empty: return "hand_empty";
    case ActionErrorKind::object_fixed: return "object_fixed";
    case ActionErrorKind::unstable_grasp: return "unstable_grasp";
    case ActionErrorKind::out_of_bounds: return "out_of_bounds";
    case ActionErrorKind::occupied_target: return "occupied_target";
  }
  return "unknown";
}

void WorldState::add_object(ObjectState obj) {
  if (obj.name.empty()) throw Error("object name must not be empty");
  if (objects_.count(obj.name)) throw Error("duplicate object name '" + obj.name + "'");
  if (!(obj.height > 0.0) || !(obj.mass > 0.0)) {
    throw Error("object '" + obj.name + "' must have positive height and mass");
  }
  if (!bounds_.contains(obj.position)) {
    throw Error("object '" + obj.name + "': " + out_of_bounds_message(obj.position, bounds_));
  }
  if (mode_ == Observability::partial && !obj.fixed && obj.shape != Shape::cup) {
    obj.mass_visible = false;
  }
  std::string key = obj.name;
  objects_.emplace(std::move(key), std::move(obj));
}

const ObjectState* WorldState::find(std::string_view name) const {
  auto it = objects_.find(name);
  return it == objects_.end() ? nullptr : &it->second;
}

ObjectState* WorldState::find_mut(std::string_view name) {
  auto it = objects_.find(name);
  return it == objects_.end() ? nullptr : &it->second;
}

ObjectState& WorldState::mutable_object(std::string_view name) {
  auto* obj = find_mut(name);
  if (!obj) throw Error("no object named '" + std::string(name) + "'");
  return *obj;
}

ActionError WorldState::unknown(std::string_view name) const {
  std::string known;
  for (const auto& [n, _] : objects_) {
    if (!known.empty()) known += ", ";
    known += n;
  }
  return make_error(ActionErrorKind::unknown_object, "unknown object '" + std::string(name) +
                                                         "'; objects in the environment: " +
                                                         known);
}

bool WorldState::rests_on(const ObjectState& upper, const ObjectState& lower) {
  if (upper.name == lower.name) return false;
  if (!footprints_overlap(upper.position, lower.position)) return false;
  double dz = upper.position.z - lower.position.z;
  return dz > kGeomTolerance && dz <= (upper.height + lower.height) / 2.0 + kGeomTolerance;
}

ActionOutcome WorldState::pick(std::string_view name) {
  const ObjectState* obj = find(name);
  if (!obj) return unknown(name);
  if (gripper_.holding) {
    return make_error(ActionErrorKind::already_holding,
                      "cannot pick '" + std::string(name) + "': gripper is already holding '" +
                          *gripper_.holding + "'");
  }
  if (obj->fixed) {
    return make_error(ActionErrorKind::object_fixed,
                      "cannot pick '" + obj->name + "': it is fixed to the table");
  }
  for (const auto& [other_name, other] : objects_) {
    if (rests_on(other, *obj)) {
      return make_error(ActionErrorKind::unstable_grasp,
                        "cannot pick '" + obj->name + "': '" + other_name + "' is resting on it");
    }
  }
  gripper_.position = obj->position;
  gripper_.holding = obj->name;
  return std::nullopt;
}

ActionOutcome WorldState::place_on(std::string_view base_name) {
  if (!gripper_.holding) {
    return make_error(ActionErrorKind::hand_empty,
                      "cannot place on '" + std::string(base_name) + "': gripper is empty");
  }
  const ObjectState* base = find(base_name);
  if (!base) return unknown(base_name);
  ObjectState& held = *find_mut(*gripper_.holding);
  if (base->name == held.name) {
    return make_error(ActionErrorKind::occupied_target,
                      "cannot place '" + held.name + "' on itself");
  }
  for (const auto& [other_name, other] : objects_) {
    if (other_name != held.name && rests_on(other, *base)) {
      return make_error(ActionErrorKind::occupied_target,
                        "cannot place on '" + base->name + "': '" + other_name +
                            "' already rests on it");
    }
  }
  Vec3 target = base->position;
  if (base->shape == Shape::cup) {
    target.z = base->position.z + base->height / 2.0;
  } else {
    target.z = base->position.z + (base->height + held.height) / 2.0;
  }
  if (!bounds_.contains(target)) {
    return make_error(ActionErrorKind::out_of_bounds,
                      "cannot place on '" + base->name + "': " + out_of_bounds_message(target, bounds_));
  }
  held.position = target;
  gripper_.position = target;
  gripper_.holding.reset();
  return std::nullopt;
}

ActionOutcome WorldState::place_at(const Vec3& target) {
  if (!gripper_.holding) {
    return make_error(ActionErrorKind::hand_empty,
                      "cannot place at " + vec_text(target) + ": gripper is empty");
  }
  if (!bounds_.contains(target)) {
    return make_error(ActionErrorKind::out_of_bounds,
                      "cannot place at: " + out_of_bounds_message(target, bounds_));
  }
  ObjectState& held = *find_mut(*gripper_.holding);
  for (const auto& [other_name, other] : objects_) {
    if (other_name == held.name) continue;
    double dz = std::abs(other.position.z - target.z);
    if (footprints_overlap(other.position, target) &&
        dz < (other.height + held.height) / 2.0 - kGeomTolerance) {
      return make_error(ActionErrorKind::occupied_target,
                        "cannot place '" + held.name + "' at " + vec_text(target) + ": '" +
                            other_name + "' occupies that spot");
    }
  }
  held.position = target;
  gripper_.position = target;
  gripper_.holding.reset();
  return std::nullopt;
}

ActionOutcome WorldState::move_gripper(const Vec3& delta) {
  Vec3 target = gripper_.position + delta;
  if (!bounds_.contains(target)) {
    return make_error(ActionErrorKind::out_of_bounds,
                      "cannot move the gripper: " + out_of_bounds_message(target, bounds_));
  }
  gripper_.position = target;
  if (gripper_.holding) find_mut(*gripper_.holding)->position = target;
  return std::nullopt;
}

Result<Vec3, ActionError> WorldState::get_obj_pose(std::string_view name) {
  const ObjectState* obj = find(name);
  if (!obj) return unknown(name);
  sensor_log_.push_back({"pose", obj->name});
  return obj->position;
}

Result<double, ActionError> WorldState::get_obj_mass(std::string_view name) {
  ObjectState* obj = find_mut(name);
  if (!obj) return unknown(name);
  obj->mass_visible = true;
  sensor_log_.push_back({"mass", obj->name});
  return obj->mass;
}

std::string WorldState::observe() const {
  std::ostringstream out;
  out << "workspace: x[" << coord(bounds_.min.x) << ", " << coord(bounds_.max.x) << "] y["
      << coord(bounds_.min.y) << ", " << coord(bounds_.max.y) << "] z[" << coord(bounds_.min.z)
      << ", " << coord(bounds_.max.z) << "] meters\n";
  out << "gripper: position=" << vec_text(gripper_.position)
      << " holding=" << (gripper_.holding ? *gripper_.holding : std::string("none")) << "\n";
  for (const auto& [name, obj] : objects_) {
    out << "object " << name << ": shape=" << to_string(obj.shape)
        << " color=" << to_string(obj.color) << " height=" << coord(obj.height)
        << " position=" << vec_text(obj.position);
    if (obj.mass_visible) out << " mass=" << coord(obj.mass);
    if (obj.fixed) out << " fixed=true";
    out << "\n";
  }
  return out.str();
}

std::uint64_t WorldState::digest() const {
  std::string s;
  auto add_vec = [&s](const Vec3& p) {
    s += format_number(p.x) + "," + format_number(p.y) + "," + format_number(p.z) + ";";
  };
  s += mode_ == Observability::partial ? "partial;" : "observable;";
  add_vec(bounds_.min);
  add_vec(bounds_.max);
  add_vec(gripper_.position);
  s += gripper_.holding ? *gripper_.holding : "-";
  s += ";";
  for (const auto& [name, obj] : objects_) {
    s += name + "|" + std::string(to_string(obj.shape)) + "|" + std::string(to_string(obj.color)) +
         "|" + format_number(obj.height) + "|" + format_number(obj.mass) + "|";
    add_vec(obj.position);
    s += obj.fixed ? "F" : "M";
    s += obj.mass_visible ? "V" : "H";
    s += "\n";
  }
  for (const auto& rec : sensor_log_) s += rec.query + ":" + rec.object + ";";
  return fnv1a64(s);
}

namespace {

// Unbiased enough for small n; std::uniform_int_distribution is not
// reproducible across standard library implementations.
std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw(rng, i)]);
}

}  // namespace

WorldState spawn_world(Scenario scenario, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ (scenario == Scenario::partial ? 0x9e3779b97f4a7c15ULL : 0ULL));

  std::vector<Vec3> cells;
  for (double x : {0.15, 0.25, 0.35, 0.45}) {
    for (double y : {-0.2, -0.1, 0.0, 0.1, 0.2}) cells.push_back({x, y, 0.0});
  }
  shuffle(cells, rng);

  std::vector<Color> colors{Color::red, Color::green, Color::blue,
                            Color::yellow, Color::purple, Color::orange};
  std::vector<Color> block_colors = colors;
  shuffle(block_colors, rng);
  std::vector<Color> cup_colors = colors;
  shuffle(cup_colors, rng);

  std::vector<Shape> shapes{Shape::cube, Shape::cylinder, Shape::triangle,
                            static_cast<Shape>(draw(rng, 3))};
  shuffle(shapes, rng);

  std::size_t cell = 0;
  auto at_cell = [&](double height) {
    Vec3 p = cells[cell++];
    p.z = height / 2.0;
    return p;
  };

  if (scenario == Scenario::observable) {
    WorldState world(Observability::observable);
    for (std::size_t i = 0; i < 4; ++i) {
      ObjectState b;
      b.color = block_colors[i];
      b.name = std::string(to_string(b.color)) + "_block";
      b.shape = shapes[i];
      b.height = kBlockHeight;
      b.mass = 0.05 * static_cast<double>(1 + draw(rng, 6));
      b.position = at_cell(b.height);
      world.add_object(std::move(b));
    }
    for (std::size_t i = 0; i < 2; ++i) {
      ObjectState c;
      c.color = cup_colors[i];
      c.name = std::string(to_string(c.color)) + "_cup";
      c.shape = Shape::cup;
      c.height = kCupHeight;
      c.mass = 0.2;
      c.position = at_cell(c.height);
      world.add_object(std::move(c));
    }
    return world;
  }

  WorldState world(Observability::partial);
  std::vector<double> masses;
  for (int i = 1; i <= 10; ++i) masses.push_back(0.05 * i);
  shuffle(masses, rng);
  for (std::size_t i = 0; i < 4; ++i) {
    ObjectState b;
    b.name = "block" + std::to_string(i + 1);
    b.color = block_colors[i];
    b.shape = shapes[i];
    b.height = kBlockHeight;
    b.mass = masses[i];
    b.fixed = (i == 3);
    b.position = at_cell(b.height);
    world.add_object(std::move(b));
  }
  for (std::size_t i = 0; i < 2; ++i) {
    ObjectState c;
    c.color = cup_colors[i];
    c.name = std::string(to_string(c.color)) + "_cup";
    c.shape = Shape::cup;
    c.height = kCupHeight;
    c.mass = 0.2;
    c.position = at_cell(c.height);
    world.add_object(std::move(c));
  }
  return world;
}

}  // namespace triples
