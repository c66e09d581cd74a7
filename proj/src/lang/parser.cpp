#include "triples/lang/parser.hpp"

#include <charconv>
#include <optional>
#include <vector>

namespace triples::lang {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::lex: return "lex";
    case Phase::parse: return "parse";
    case Phase::check: return "check";
    case Phase::runtime: return "runtime";
  }
  return "?";
}

std::string_view to_string(DiagCode c) {
  switch (c) {
    case DiagCode::syntax: return "syntax";
    case DiagCode::unknown_api: return "unknown_api";
    case DiagCode::unknown_object: return "unknown_object";
    case DiagCode::arity: return "arity";
    case DiagCode::type: return "type";
    case DiagCode::runtime_action: return "runtime_action";
  }
  return "?";
}

std::string_view to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return "+";
    case BinaryOp::sub: return "-";
    case BinaryOp::mul: return "*";
    case BinaryOp::div: return "/";
    case BinaryOp::lt: return "<";
    case BinaryOp::le: return "<=";
    case BinaryOp::gt: return ">";
    case BinaryOp::ge: return ">=";
    case BinaryOp::eq: return "==";
    case BinaryOp::ne: return "!=";
  }
  return "?";
}

Diagnostic make_diagnostic(Phase phase, int line, int column, DiagCode code, std::string message) {
  for (char& c : message) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return Diagnostic{phase, line, column, code, std::move(message)};
}

std::string Diagnostic::to_line() const {
  return std::string(to_string(phase)) + ":" + std::to_string(line) + ":" + std::to_string(column) +
         ":" + std::string(to_string(code)) + ":" + message;
}

std::string render(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) {
    if (!out.empty()) out += "\n";
    out += d.to_line();
  }
  return out;
}

namespace {

enum class Tok {
  ident, number, string, kw_if, kw_else, kw_end, kw_def, kw_true, kw_false,
  lparen, rparen, comma, colon, assign, dot,
  plus, minus, star, slash, lt, le, gt, ge, eqeq, ne,
  newline, comment, eof,
};

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  SourcePos pos;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::newline: return "end of line";
    case Tok::eof: return "end of input";
    case Tok::comment: return "comment";
    case Tok::string: return "string \"" + t.text + "\"";
    default: return "'" + t.text + "'";
  }
}

struct LexError {
  Diagnostic diag;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Result<std::vector<Token>, Diagnostic> run() {
    std::vector<Token> out;
    while (true) {
      skip_blanks();
      SourcePos pos{line_, col_};
      if (at_end()) {
        out.push_back({Tok::eof, "", 0.0, pos});
        return out;
      }
      char c = peek();
      if (c == '\n') {
        advance();
        out.push_back({Tok::newline, "\\n", 0.0, pos});
      } else if (c == '#') {
        advance();
        std::string text;
        while (!at_end() && peek() != '\n') text += advance();
        if (!text.empty() && text.back() == '\r') text.pop_back();
        out.push_back({Tok::comment, std::move(text), 0.0, pos});
      } else if (is_ident_start(c)) {
        std::string text;
        while (!at_end() && is_ident_char(peek())) text += advance();
        out.push_back({keyword(text), text, 0.0, pos});
      } else if (is_digit(c)) {
        std::string text;
        while (!at_end() && is_digit(peek())) text += advance();
        if (!at_end() && peek() == '.' && is_digit(peek(1))) {
          text += advance();
          while (!at_end() && is_digit(peek())) text += advance();
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
          return make_diagnostic(Phase::lex, pos.line, pos.column, DiagCode::syntax,
                                 "invalid number '" + text + "'");
        }
        out.push_back({Tok::number, text, value, pos});
      } else if (c == '"') {
        advance();
        std::string text;
        while (true) {
          if (at_end() || peek() == '\n') {
            return make_diagnostic(Phase::lex, pos.line, pos.column, DiagCode::syntax,
                                   "unterminated string literal");
          }
          char ch = advance();
          if (ch == '"') break;
          if (ch == '\\') {
            if (at_end()) continue;
            char esc = advance();
            if (esc == 'n') {
              text += '\n';
            } else if (esc == '"' || esc == '\\') {
              text += esc;
            } else {
              return make_diagnostic(Phase::lex, line_, col_ - 1, DiagCode::syntax,
                                     std::string("unknown escape sequence '\\") + esc + "'");
            }
          } else {
            text += ch;
          }
        }
        out.push_back({Tok::string, std::move(text), 0.0, pos});
      } else {
        auto sym = symbol();
        if (!sym) {
          std::string shown(1, c);
          return make_diagnostic(Phase::lex, pos.line, pos.column, DiagCode::syntax,
                                 "unexpected character '" + shown + "'");
        }
        out.push_back({sym->first, sym->second, 0.0, pos});
      }
    }
  }

 private:
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

  static Tok keyword(const std::string& s) {
    if (s == "if") return Tok::kw_if;
    if (s == "else") return Tok::kw_else;
    if (s == "end") return Tok::kw_end;
    if (s == "def") return Tok::kw_def;
    if (s == "true") return Tok::kw_true;
    if (s == "false") return Tok::kw_false;
    return Tok::ident;
  }

  std::optional<std::pair<Tok, std::string>> symbol() {
    char c = peek();
    char n = peek(1);
    auto two = [&](Tok t, const char* text) {
      advance();
      advance();
      return std::make_optional(std::make_pair(t, std::string(text)));
    };
    auto one = [&](Tok t) {
      advance();
      return std::make_optional(std::make_pair(t, std::string(1, c)));
    };
    switch (c) {
      case '(': return one(Tok::lparen);
      case ')': return one(Tok::rparen);
      case ',': return one(Tok::comma);
      case ':': return one(Tok::colon);
      case '.': return one(Tok::dot);
      case '+': return one(Tok::plus);
      case '-': return one(Tok::minus);
      case '*': return one(Tok::star);
      case '/': return one(Tok::slash);
      case '<': return n == '=' ? two(Tok::le, "<=") : one(Tok::lt);
      case '>': return n == '=' ? two(Tok::ge, ">=") : one(Tok::gt);
      case '=': return n == '=' ? two(Tok::eqeq, "==") : one(Tok::assign);
      case '!':
        if (n == '=') return two(Tok::ne, "!=");
        return std::nullopt;
      default: return std::nullopt;
    }
  }

  void skip_blanks() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) advance();
  }

  bool at_end() const { return i_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return i_ + ahead < src_.size() ? src_[i_ + ahead] : '\0';
  }
  char advance() {
    char c = src_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct ParseFailure {
  Diagnostic diag;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Program program() {
    Program p;
    while (true) {
      skip_newlines();
      if (at(Tok::eof)) break;
      parse_statement(p.statements, false);
    }
    return p;
  }

 private:
  // Parses one statement (plus a trailing comment, if any) into `out`.
  // `def` is accepted only at the top level.
  void parse_statement(Block& out, bool nested) {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::comment:
        out.push_back(Stmt{Comment{t.text}, t.pos});
        next();
        return;
      case Tok::kw_if:
        out.push_back(parse_if());
        break;
      case Tok::kw_def:
        if (nested) fail(t, "function definitions are only allowed at the top level, not nested");
        out.push_back(parse_def());
        break;
      case Tok::kw_else:
      case Tok::kw_end:
        fail(t, "'" + t.text + "' without a matching 'if' or 'def'");
      case Tok::ident:
        if (peek(1).kind == Tok::assign) {
          SourcePos pos = t.pos;
          std::string name = t.text;
          next();
          next();
          out.push_back(Stmt{Assign{std::move(name), expression()}, pos});
        } else {
          SourcePos pos = t.pos;
          Expr e = expression();
          if (!std::holds_alternative<Call>(e.node)) {
            fail_at(pos, "expected a statement (assignment, call, if or def)");
          }
          out.push_back(Stmt{ExprStmt{std::move(e)}, pos});
        }
        break;
      default:
        fail(t, "expected a statement, found " + describe(t));
    }
    end_of_line(out);
  }

  void end_of_line(Block& out) {
    const Token& t = peek();
    if (t.kind == Tok::comment) {
      out.push_back(Stmt{Comment{t.text}, t.pos});
      next();
    }
    const Token& after = peek();
    if (after.kind == Tok::newline) {
      next();
    } else if (after.kind != Tok::eof) {
      fail(after, "unexpected " + describe(after) + " after statement");
    }
  }

  // Expects ':' then end of line (a trailing comment is allowed and kept).
  void block_header(Block& body, const std::string& what) {
    if (!at(Tok::colon)) fail(peek(), "expected ':' after " + what);
    next();
    if (at(Tok::comment)) {
      body.push_back(Stmt{Comment{peek().text}, peek().pos});
      next();
    }
    if (!at(Tok::newline)) fail(peek(), "expected a new line after ':' in " + what);
    next();
  }

  // Parses statements until one of the given terminators (not consumed).
  void body_until(Block& body, bool nested, std::initializer_list<Tok> stops,
                  const Token& opener) {
    while (true) {
      skip_newlines();
      if (at(Tok::eof)) {
        fail(peek(), "missing 'end' for '" + opener.text + "' opened at line " +
                         std::to_string(opener.pos.line));
      }
      for (Tok s : stops) {
        if (at(s)) return;
      }
      parse_statement(body, nested);
    }
  }

  Stmt parse_if() {
    Token opener = peek();
    next();
    If node{expression(), {}, std::nullopt};
    block_header(node.then_body, "if condition");
    body_until(node.then_body, true, {Tok::kw_else, Tok::kw_end}, opener);
    if (at(Tok::kw_else)) {
      next();
      node.else_body.emplace();
      block_header(*node.else_body, "else");
      body_until(*node.else_body, true, {Tok::kw_end}, opener);
      if (at(Tok::kw_else)) fail(peek(), "'else' appears twice in one 'if'");
    }
    next();  // end
    return Stmt{std::move(node), opener.pos};
  }

  Stmt parse_def() {
    Token opener = peek();
    next();
    if (!at(Tok::ident)) fail(peek(), "expected a function name after 'def'");
    FuncDef def;
    def.name = peek().text;
    next();
    if (!at(Tok::lparen)) fail(peek(), "expected '(' after function name '" + def.name + "'");
    next();
    if (!at(Tok::rparen)) {
      while (true) {
        if (!at(Tok::ident)) fail(peek(), "expected a parameter name in 'def " + def.name + "'");
        for (const auto& existing : def.params) {
          if (existing == peek().text) fail(peek(), "duplicate parameter '" + existing + "'");
        }
        def.params.push_back(peek().text);
        next();
        if (at(Tok::comma)) {
          next();
          continue;
        }
        break;
      }
    }
    if (!at(Tok::rparen)) fail(peek(), "expected ')' to close the parameters of '" + def.name + "'");
    next();
    block_header(def.body, "'def " + def.name + "'");
    body_until(def.body, true, {Tok::kw_end}, opener);
    next();  // end
    return Stmt{std::move(def), opener.pos};
  }

  Expr expression() {
    Expr lhs = sum();
    while (true) {
      std::optional<BinaryOp> op;
      switch (peek().kind) {
        case Tok::lt: op = BinaryOp::lt; break;
        case Tok::le: op = BinaryOp::le; break;
        case Tok::gt: op = BinaryOp::gt; break;
        case Tok::ge: op = BinaryOp::ge; break;
        case Tok::eqeq: op = BinaryOp::eq; break;
        case Tok::ne: op = BinaryOp::ne; break;
        default: break;
      }
      if (!op) return lhs;
      SourcePos pos = peek().pos;
      next();
      lhs = Expr{Binary{*op, std::move(lhs), sum()}, pos};
    }
  }

  Expr sum() {
    Expr lhs = term();
    while (at(Tok::plus) || at(Tok::minus)) {
      BinaryOp op = at(Tok::plus) ? BinaryOp::add : BinaryOp::sub;
      SourcePos pos = peek().pos;
      next();
      lhs = Expr{Binary{op, std::move(lhs), term()}, pos};
    }
    return lhs;
  }

  Expr term() {
    Expr lhs = postfix();
    while (at(Tok::star) || at(Tok::slash)) {
      BinaryOp op = at(Tok::star) ? BinaryOp::mul : BinaryOp::div;
      SourcePos pos = peek().pos;
      next();
      lhs = Expr{Binary{op, std::move(lhs), postfix()}, pos};
    }
    return lhs;
  }

  Expr postfix() {
    Expr e = primary();
    while (at(Tok::dot)) {
      SourcePos pos = peek().pos;
      next();
      const Token& f = peek();
      if (f.kind != Tok::ident || (f.text != "x" && f.text != "y" && f.text != "z")) {
        fail(f, "expected 'x', 'y' or 'z' after '.', found " + describe(f));
      }
      char field = f.text[0];
      next();
      e = Expr{Attr{std::move(e), field}, pos};
    }
    return e;
  }

  Expr primary() {
    const Token t = peek();
    switch (t.kind) {
      case Tok::number:
        next();
        return Expr{Literal{t.number}, t.pos};
      case Tok::minus:
        if (peek(1).kind == Tok::number) {
          double v = -peek(1).number;
          next();
          next();
          return Expr{Literal{v}, t.pos};
        }
        fail(t, "unary '-' is only allowed before a number literal");
      case Tok::string:
        next();
        return Expr{Literal{t.text}, t.pos};
      case Tok::kw_true:
      case Tok::kw_false:
        next();
        return Expr{Literal{t.kind == Tok::kw_true}, t.pos};
      case Tok::lparen: {
        next();
        Expr inner = expression();
        if (!at(Tok::rparen)) fail(peek(), "expected ')' to close '(', found " + describe(peek()));
        next();
        return inner;
      }
      case Tok::ident: {
        next();
        if (!at(Tok::lparen)) return Expr{Var{t.text}, t.pos};
        next();
        Call call{t.text, {}};
        if (!at(Tok::rparen)) {
          while (true) {
            call.args.push_back(expression());
            if (at(Tok::comma)) {
              next();
              continue;
            }
            break;
          }
        }
        if (!at(Tok::rparen)) {
          fail(peek(), "expected ')' to close call to '" + t.text + "', found " + describe(peek()));
        }
        next();
        return Expr{std::move(call), t.pos};
      }
      default:
        fail(t, "expected an expression, found " + describe(t));
    }
  }

  [[noreturn]] void fail(const Token& t, const std::string& msg) { fail_at(t.pos, msg); }
  [[noreturn]] void fail_at(SourcePos pos, const std::string& msg) {
    throw ParseFailure{make_diagnostic(Phase::parse, pos.line, pos.column, DiagCode::syntax, msg)};
  }

  void skip_newlines() {
    while (at(Tok::newline)) next();
  }
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(i_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  bool at(Tok k) const { return peek().kind == k; }
  void next() {
    if (i_ < toks_.size() - 1) ++i_;
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

// Binding strength for formatting; higher binds tighter.
int precedence(const Expr& e) {
  if (const auto* b = std::get_if<Binary>(&e.node)) {
    switch (b->op) {
      case BinaryOp::add:
      case BinaryOp::sub: return 2;
      case BinaryOp::mul:
      case BinaryOp::div: return 3;
      default: return 1;
    }
  }
  return 5;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out + "\"";
}

void format_block(const Block& block, int depth, std::string& out);

void format_stmt(const Stmt& stmt, int depth, std::string& out) {
  std::string indent(static_cast<std::size_t>(depth) * 4, ' ');
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Assign>) {
          out += indent + node.name + " = " + format(node.value) + "\n";
        } else if constexpr (std::is_same_v<T, ExprStmt>) {
          out += indent + format(node.expr) + "\n";
        } else if constexpr (std::is_same_v<T, If>) {
          out += indent + "if " + format(node.cond) + ":\n";
          format_block(node.then_body, depth + 1, out);
          if (node.else_body) {
            out += indent + "else:\n";
            format_block(*node.else_body, depth + 1, out);
          }
          out += indent + "end\n";
        } else if constexpr (std::is_same_v<T, FuncDef>) {
          out += indent + "def " + node.name + "(";
          for (std::size_t i = 0; i < node.params.size(); ++i) {
            if (i) out += ", ";
            out += node.params[i];
          }
          out += "):\n";
          format_block(node.body, depth + 1, out);
          out += indent + "end\n";
        } else {
          out += indent + "#" + node.text + "\n";
        }
      },
      stmt.node);
}

void format_block(const Block& block, int depth, std::string& out) {
  for (const auto& s : block) format_stmt(s, depth, out);
}

Block strip_block(Block block) {
  Block out;
  for (auto& s : block) {
    if (std::holds_alternative<Comment>(s.node)) continue;
    if (auto* i = std::get_if<If>(&s.node)) {
      i->then_body = strip_block(std::move(i->then_body));
      if (i->else_body) i->else_body = strip_block(std::move(*i->else_body));
    } else if (auto* f = std::get_if<FuncDef>(&s.node)) {
      f->body = strip_block(std::move(f->body));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Result<Program, Diagnostic> parse(std::string_view source) {
  auto tokens = Lexer(source).run();
  if (!tokens) return tokens.error();
  try {
    return Parser(std::move(tokens).value()).program();
  } catch (const ParseFailure& f) {
    return f.diag;
  }
}

std::string format(const Expr& expr) {
  return std::visit(
      [&](const auto& node) -> std::string {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Literal>) {
          if (const auto* d = std::get_if<double>(&node.value)) return format_number(*d);
          if (const auto* s = std::get_if<std::string>(&node.value)) return quote(*s);
          return std::get<bool>(node.value) ? "true" : "false";
        } else if constexpr (std::is_same_v<T, Var>) {
          return node.name;
        } else if constexpr (std::is_same_v<T, Call>) {
          std::string out = node.callee + "(";
          for (std::size_t i = 0; i < node.args.size(); ++i) {
            if (i) out += ", ";
            out += format(node.args[i]);
          }
          return out + ")";
        } else if constexpr (std::is_same_v<T, Binary>) {
          int p = precedence(expr);
          std::string lhs = format(*node.lhs);
          std::string rhs = format(*node.rhs);
          if (precedence(*node.lhs) < p) lhs = "(" + lhs + ")";
          if (precedence(*node.rhs) <= p) rhs = "(" + rhs + ")";
          return lhs + " " + std::string(to_string(node.op)) + " " + rhs;
        } else {
          std::string inner = format(*node.object);
          bool needs_parens = !std::holds_alternative<Var>(node.object->node) &&
                              !std::holds_alternative<Call>(node.object->node) &&
                              !std::holds_alternative<Attr>(node.object->node);
          if (needs_parens) inner = "(" + inner + ")";
          return inner + "." + std::string(1, node.field);
        }
      },
      expr.node);
}

std::string format(const Program& program) {
  std::string out;
  format_block(program.statements, 0, out);
  return out;
}

Program strip_comments(Program program) {
  program.statements = strip_block(std::move(program.statements));
  return program;
}

}  // namespace triples::lang
