#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace triples::lang {

/// Owning pointer with value semantics: copies deep, compares by pointee.
template <typename T>
class Box {
 public:
  Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
  Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& other) {
    if (this != &other) ptr_ = std::make_unique<T>(*other.ptr_);
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;

  T& operator*() { return *ptr_; }
  const T& operator*() const { return *ptr_; }
  T* operator->() { return ptr_.get(); }
  const T* operator->() const { return ptr_.get(); }

  friend bool operator==(const Box& a, const Box& b) { return *a.ptr_ == *b.ptr_; }

 private:
  std::unique_ptr<T> ptr_;
};

/// 1-based source position. Ignored by structural equality.
struct SourcePos {
  int line = 0;
  int column = 0;
};

enum class BinaryOp { add, sub, mul, div, lt, le, gt, ge, eq, ne };

std::string_view to_string(BinaryOp op);

struct Expr;

struct Literal {
  std::variant<double, std::string, bool> value;
  friend bool operator==(const Literal&, const Literal&) = default;
};

struct Var {
  std::string name;
  friend bool operator==(const Var&, const Var&) = default;
};

struct Call {
  std::string callee;
  std::vector<Expr> args;
  friend bool operator==(const Call&, const Call&) = default;
};

struct Binary {
  BinaryOp op;
  Box<Expr> lhs;
  Box<Expr> rhs;
  friend bool operator==(const Binary&, const Binary&) = default;
};

/// Component access on a position value: `.x`, `.y` or `.z`.
struct Attr {
  Box<Expr> object;
  char field;
  friend bool operator==(const Attr&, const Attr&) = default;
};

struct Expr {
  std::variant<Literal, Var, Call, Binary, Attr> node;
  SourcePos pos;

  friend bool operator==(const Expr& a, const Expr& b) { return a.node == b.node; }
};

struct Stmt;
using Block = std::vector<Stmt>;

struct Assign {
  std::string name;
  Expr value;
  friend bool operator==(const Assign&, const Assign&) = default;
};

struct ExprStmt {
  Expr expr;
  friend bool operator==(const ExprStmt&, const ExprStmt&) = default;
};

struct If {
  Expr cond;
  Block then_body;
  std::optional<Block> else_body;
  friend bool operator==(const If&, const If&) = default;
};

struct FuncDef {
  std::string name;
  std::vector<std::string> params;
  Block body;
  friend bool operator==(const FuncDef&, const FuncDef&) = default;
};

/// Text after `#`, verbatim. Semantically inert.
struct Comment {
  std::string text;
  friend bool operator==(const Comment&, const Comment&) = default;
};

struct Stmt {
  std::variant<Assign, ExprStmt, If, FuncDef, Comment> node;
  SourcePos pos;

  friend bool operator==(const Stmt& a, const Stmt& b) { return a.node == b.node; }
};

struct Program {
  Block statements;
  friend bool operator==(const Program&, const Program&) = default;
};

}  // namespace triples::lang
