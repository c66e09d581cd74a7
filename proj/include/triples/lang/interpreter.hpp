#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "triples/lang/ast.hpp"
#include "triples/lang/diagnostic.hpp"
#include "triples/lang/registry.hpp"
#include "triples/world.hpp"

namespace triples::lang {

inline constexpr int kDefaultStepBudget = 200;

struct TraceStep {
  std::string api;
  std::vector<std::string> args;
  std::string outcome;
};

/// Completed core-API invocations, in order. Learned API calls appear as the
/// core steps they expand into.
struct ExecutionTrace {
  std::vector<TraceStep> steps;
  std::uint64_t world_before = 0;
  std::uint64_t world_after = 0;
};

struct InterpretResult {
  /// Final world; on a runtime failure, the state reached before the failing step.
  WorldState world;
  ExecutionTrace trace;
  std::optional<Diagnostic> error;
};

struct InterpretOptions {
  int step_budget = kDefaultStepBudget;
};

InterpretResult interpret(const Program& program, WorldState world, const ApiRegistry& registry,
                          const InterpretOptions& options = {});

}  // namespace triples::lang
