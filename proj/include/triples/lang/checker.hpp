#pragma once

#include <vector>

#include "triples/lang/ast.hpp"
#include "triples/lang/diagnostic.hpp"
#include "triples/lang/registry.hpp"
#include "triples/world.hpp"

namespace triples::lang {

/// Pre-execution checks: unknown APIs, arity, literal object names that are
/// absent from `world`, names used before assignment, and statically visible
/// type mismatches. `world` may be null, which skips object-name checks.
///
/// Variables are tracked by definite assignment: a name assigned in only one
/// branch of an `if` is not visible after it. Function bodies see their
/// parameters and their own assignments only.
std::vector<Diagnostic> static_check(const Program& program, const ApiRegistry& registry,
                                     const WorldState* world);

/// Checks a single function definition whose body may call only `registry`
/// names (used for learned API registration).
std::vector<Diagnostic> check_funcdef(const FuncDef& def, SourcePos pos,
                                      const ApiRegistry& registry);

}  // namespace triples::lang
