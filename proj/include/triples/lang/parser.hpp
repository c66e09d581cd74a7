#pragma once

#include <string>
#include <string_view>

#include "triples/common.hpp"
#include "triples/lang/ast.hpp"
#include "triples/lang/diagnostic.hpp"

namespace triples::lang {

/// Parses policy code. Grammar (line oriented, blocks closed by `end`):
///
///     program  := stmt*
///     stmt     := assign | call | if | funcdef | comment
///     assign   := IDENT '=' expr
///     if       := 'if' expr ':' stmt* ('else' ':' stmt*)? 'end'
///     funcdef  := 'def' IDENT '(' params? ')' ':' stmt* 'end'
///     comment  := '#' ... EOL
///     expr     := sum (('<' | '<=' | '>' | '>=' | '==' | '!=') sum)*
///     sum      := term (('+' | '-') term)*
///     term     := postfix (('*' | '/') postfix)*
///     postfix  := primary ('.' ('x' | 'y' | 'z'))*
///     primary  := NUMBER | '-' NUMBER | STRING | 'true' | 'false'
///               | IDENT | IDENT '(' args? ')' | '(' expr ')'
///
/// Strings are double quoted (escapes: \" \\ \n); numbers are decimal.
/// A comment after a statement on the same line becomes its own Comment
/// statement following that statement.
Result<Program, Diagnostic> parse(std::string_view source);

/// Canonical pretty-print. parse(format(p)) == p for every valid program.
std::string format(const Program& program);
std::string format(const Expr& expr);

/// Removes every Comment statement, recursively.
Program strip_comments(Program program);

}  // namespace triples::lang
