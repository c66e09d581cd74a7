#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace triples::lang {

enum class Phase { lex, parse, check, runtime };
enum class DiagCode { syntax, unknown_api, unknown_object, arity, type, runtime_action };

std::string_view to_string(Phase p);
std::string_view to_string(DiagCode c);

/// Compiler or runtime feedback. The message is a single self-contained line
/// so it can be pasted into a retry prompt unchanged.
struct Diagnostic {
  Phase phase = Phase::parse;
  int line = 0;
  int column = 0;
  DiagCode code = DiagCode::syntax;
  std::string message;

  /// `phase:line:col:code:message`
  std::string to_line() const;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

Diagnostic make_diagnostic(Phase phase, int line, int column, DiagCode code, std::string message);

/// One `to_line()` per diagnostic, newline separated.
std::string render(const std::vector<Diagnostic>& diags);

}  // namespace triples::lang
