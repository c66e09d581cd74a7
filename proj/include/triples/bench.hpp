#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triples/common.hpp"
#include "triples/task.hpp"
#include "triples/world.hpp"

namespace triples {

struct Dataset {
  int version = 1;
  std::uint64_t generator_seed = 0;
  std::vector<TaskSpec> tasks;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

nlohmann::json to_json(const Dataset& ds);
/// Throws Error naming the first malformed task.
Dataset dataset_from_json(const nlohmann::json& doc);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);

/// Paraphrases used to make instructions implicit.
struct Lexicon {
  std::map<Color, std::vector<std::string>> colors;
  std::map<Shape, std::vector<std::string>> shapes;
  std::map<std::string, Vec3> directions;  // unit vectors

  static Lexicon from_json(const nlohmann::json& doc);
  static const Lexicon& builtin();
};

/// Observable tasks first, then partially observable ones. Deterministic in
/// all three arguments.
Dataset generate(std::uint64_t seed, int n_observable, int n_partial,
                 const Lexicon& lexicon = Lexicon::builtin());

/// clamp(implications + ceil(core_steps / 4), 1, 7)
int complexity_level(std::size_t implications, std::size_t core_steps);

/// Level of a task from its tags and the core steps its ground truth takes on
/// its own world. Throws Error when gt_code is missing or does not run.
int assign_complexity(const TaskSpec& task);

struct VerifyFailure {
  std::string task_id;
  std::string reason;
};

/// Runs every ground truth on its world and checks it against the goal.
/// Returns the failures; empty means the dataset is valid.
std::vector<VerifyFailure> verify_dataset(const Dataset& ds, double epsilon = 0.03);

}  // namespace triples
