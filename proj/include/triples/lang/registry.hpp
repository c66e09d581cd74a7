#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "triples/common.hpp"
#include "triples/lang/ast.hpp"
#include "triples/lang/diagnostic.hpp"

namespace triples::lang {

/// Static value types known to the checker. `any` means "not known until run".
enum class ValueType { number, string, boolean, position, none, any };

std::string_view to_string(ValueType t);

struct CoreApi {
  std::string name;
  std::vector<std::string> params;
  std::vector<ValueType> param_types;
  ValueType returns = ValueType::none;
  /// True for calls whose first argument names a world object.
  bool object_arg = false;
  std::string doc;
};

/// The fixed primitive action and sensor set.
const std::vector<CoreApi>& core_apis();
const CoreApi* find_core(std::string_view name);

struct LearnedApi {
  FuncDef def;
  std::string source;
  std::string doc;
};

/// Core primitives plus APIs learned from successful episodes. A learned body
/// may only call names that existed when it was registered, and a learned
/// name never shadows a core one.
class ApiRegistry {
 public:
  /// Parses and validates a single `def` without registering it.
  Result<FuncDef, Diagnostic> validate(std::string_view funcdef_source) const;

  /// Validates and registers. On failure the registry is unchanged.
  std::optional<Diagnostic> register_api(std::string_view funcdef_source);

  bool has(std::string_view name) const;
  const LearnedApi* find_learned(std::string_view name) const;
  const std::vector<LearnedApi>& learned() const { return learned_; }

  /// Names of every callable API: core first, then learned in registration order.
  std::vector<std::string> names() const;

  /// One signature line per API, core first.
  std::vector<std::string> doc_lines() const;

  std::uint64_t digest() const;

 private:
  std::vector<LearnedApi> learned_;
};

/// Every callee named anywhere in `block`, including inside function bodies.
std::set<std::string> called_names(const Block& block);

/// `name(a, b): learned API built on x, y`
std::string describe_learned(const FuncDef& def);

}  // namespace triples::lang
