#include "triples/lang/checker.hpp"

#include <map>
#include <string>

namespace triples::lang {

namespace {

using Scope = std::map<std::string, ValueType, std::less<>>;

bool compatible(ValueType expected, ValueType actual) {
  return expected == ValueType::any || actual == ValueType::any || expected == actual;
}

class Checker {
 public:
  Checker(const ApiRegistry& registry, const WorldState* world)
      : registry_(registry), world_(world) {}

  std::vector<Diagnostic> take() { return std::move(diags_); }

  void top_level(const Block& block) {
    Scope scope;
    for (const auto& stmt : block) statement(stmt, scope, false);
  }

  void funcdef(const FuncDef& def, SourcePos pos, bool check_name) {
    if (check_name) {
      if (find_core(def.name)) {
        report(pos, DiagCode::unknown_api, "cannot redefine core API '" + def.name + "'");
      } else if (registry_.find_learned(def.name) || local_defs_.count(def.name)) {
        report(pos, DiagCode::unknown_api, "an API named '" + def.name + "' is already defined");
      }
    }
    Scope scope;
    for (const auto& p : def.params) scope[p] = ValueType::any;
    for (const auto& stmt : def.body) statement(stmt, scope, true);
  }

  void define_local(const FuncDef& def) { local_defs_.emplace(def.name, def.params.size()); }

 private:
  void statement(const Stmt& stmt, Scope& scope, bool in_function) {
    std::visit(
        [&](const auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, Assign>) {
            ValueType t = expr(node.value, scope);
            scope[node.name] = t;
          } else if constexpr (std::is_same_v<T, ExprStmt>) {
            expr(node.expr, scope);
          } else if constexpr (std::is_same_v<T, If>) {
            ValueType c = expr(node.cond, scope);
            if (!compatible(ValueType::boolean, c)) {
              report(node.cond.pos, DiagCode::type,
                     "if condition must be a comparison, found a " + std::string(to_string(c)));
            }
            Scope then_scope = scope;
            for (const auto& s : node.then_body) statement(s, then_scope, in_function);
            Scope else_scope = scope;
            if (node.else_body) {
              for (const auto& s : *node.else_body) statement(s, else_scope, in_function);
            }
            Scope merged;
            for (const auto& [name, t] : then_scope) {
              auto it = else_scope.find(name);
              if (it != else_scope.end()) merged[name] = (it->second == t) ? t : ValueType::any;
            }
            scope = std::move(merged);
          } else if constexpr (std::is_same_v<T, FuncDef>) {
            // The parser rejects nested definitions.
            if (!in_function) {
              funcdef(node, stmt.pos, true);
              define_local(node);
            }
          }
        },
        stmt.node);
  }

  ValueType expr(const Expr& e, const Scope& scope) {
    return std::visit(
        [&](const auto& node) -> ValueType {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, Literal>) {
            if (std::holds_alternative<double>(node.value)) return ValueType::number;
            if (std::holds_alternative<std::string>(node.value)) return ValueType::string;
            return ValueType::boolean;
          } else if constexpr (std::is_same_v<T, Var>) {
            auto it = scope.find(node.name);
            if (it == scope.end()) {
              report(e.pos, DiagCode::unknown_object,
                     "name '" + node.name + "' is used before it is assigned");
              return ValueType::any;
            }
            return it->second;
          } else if constexpr (std::is_same_v<T, Call>) {
            return call(node, e.pos, scope);
          } else if constexpr (std::is_same_v<T, Binary>) {
            return binary(node, e.pos, scope);
          } else {
            ValueType t = expr(*node.object, scope);
            if (!compatible(ValueType::position, t)) {
              report(e.pos, DiagCode::type,
                     std::string("'.") + node.field + "' needs a position from get_obj_pose, found a " +
                         std::string(to_string(t)));
            }
            return ValueType::number;
          }
        },
        e.node);
  }

  ValueType binary(const Binary& b, SourcePos pos, const Scope& scope) {
    ValueType l = expr(*b.lhs, scope);
    ValueType r = expr(*b.rhs, scope);
    std::string op(to_string(b.op));
    switch (b.op) {
      case BinaryOp::eq:
      case BinaryOp::ne:
        if (!compatible(l, r)) {
          report(pos, DiagCode::type,
                 "cannot compare a " + std::string(to_string(l)) + " with a " +
                     std::string(to_string(r)) + " using '" + op + "'");
        }
        return ValueType::boolean;
      default: break;
    }
    if (!compatible(ValueType::number, l) || !compatible(ValueType::number, r)) {
      report(pos, DiagCode::type,
             "operator '" + op + "' needs numbers, found " + std::string(to_string(l)) + " and " +
                 std::string(to_string(r)));
    }
    switch (b.op) {
      case BinaryOp::add:
      case BinaryOp::sub:
      case BinaryOp::mul:
      case BinaryOp::div: return ValueType::number;
      default: return ValueType::boolean;
    }
  }

  ValueType call(const Call& c, SourcePos pos, const Scope& scope) {
    std::vector<ValueType> arg_types;
    for (const auto& a : c.args) arg_types.push_back(expr(a, scope));

    if (const CoreApi* api = find_core(c.callee)) {
      if (c.args.size() != api->params.size()) {
        report(pos, DiagCode::arity, arity_message(c.callee, api->params.size(), c.args.size()));
        return api->returns;
      }
      for (std::size_t i = 0; i < c.args.size(); ++i) {
        if (!compatible(api->param_types[i], arg_types[i])) {
          report(c.args[i].pos, DiagCode::type,
                 c.callee + " argument '" + api->params[i] + "' must be a " +
                     std::string(to_string(api->param_types[i])) + ", found a " +
                     std::string(to_string(arg_types[i])));
        }
      }
      if (api->object_arg && world_ && !c.args.empty()) {
        const auto* lit = std::get_if<Literal>(&c.args[0].node);
        const std::string* name = lit ? std::get_if<std::string>(&lit->value) : nullptr;
        if (name && !world_->find(*name)) {
          report(c.args[0].pos, DiagCode::unknown_object,
                 "unknown object \"" + *name + "\" in " + c.callee + "; objects in the environment: " +
                     object_list());
        }
      }
      return api->returns;
    }

    std::size_t expected = 0;
    if (const LearnedApi* learned = registry_.find_learned(c.callee)) {
      expected = learned->def.params.size();
    } else if (auto it = local_defs_.find(c.callee); it != local_defs_.end()) {
      expected = it->second;
    } else {
      report(pos, DiagCode::unknown_api,
             "unknown API '" + c.callee + "'; available APIs: " + api_list());
      return ValueType::any;
    }
    if (c.args.size() != expected) {
      report(pos, DiagCode::arity, arity_message(c.callee, expected, c.args.size()));
    }
    return ValueType::none;
  }

  static std::string arity_message(const std::string& name, std::size_t expected, std::size_t got) {
    return name + " expects " + std::to_string(expected) + " argument" + (expected == 1 ? "" : "s") +
           ", got " + std::to_string(got);
  }

  std::string object_list() const {
    std::string out;
    for (const auto& [name, _] : world_->objects()) {
      if (!out.empty()) out += ", ";
      out += name;
    }
    return out;
  }

  std::string api_list() const {
    std::string out;
    for (const auto& n : registry_.names()) {
      if (!out.empty()) out += ", ";
      out += n;
    }
    for (const auto& [n, _] : local_defs_) out += ", " + n;
    return out;
  }

  void report(SourcePos pos, DiagCode code, std::string message) {
    diags_.push_back(make_diagnostic(Phase::check, pos.line, pos.column, code, std::move(message)));
  }

  const ApiRegistry& registry_;
  const WorldState* world_;
  std::map<std::string, std::size_t, std::less<>> local_defs_;
  std::vector<Diagnostic> diags_;
};

}  // namespace

std::vector<Diagnostic> static_check(const Program& program, const ApiRegistry& registry,
                                     const WorldState* world) {
  Checker checker(registry, world);
  checker.top_level(program.statements);
  return checker.take();
}

std::vector<Diagnostic> check_funcdef(const FuncDef& def, SourcePos pos,
                                      const ApiRegistry& registry) {
  Checker checker(registry, nullptr);
  checker.funcdef(def, pos, false);
  return checker.take();
}

}  // namespace triples::lang
