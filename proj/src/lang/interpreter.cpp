#include "triples/lang/interpreter.hpp"

#include <map>
#include <variant>

namespace triples::lang {

namespace {

using Value = std::variant<std::monostate, double, std::string, bool, Vec3>;
using Env = std::map<std::string, Value, std::less<>>;

struct RuntimeFailure {
  Diagnostic diag;
};

std::string_view type_name(const Value& v) {
  switch (v.index()) {
    case 0: return "nothing";
    case 1: return "number";
    case 2: return "string";
    case 3: return "bool";
    default: return "position";
  }
}

std::string show(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return format_number(*d);
  if (const auto* s = std::get_if<std::string>(&v)) return "\"" + *s + "\"";
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  if (const auto* p = std::get_if<Vec3>(&v)) {
    return "(" + format_number(p->x) + ", " + format_number(p->y) + ", " + format_number(p->z) + ")";
  }
  return "nothing";
}

class Interpreter {
 public:
  Interpreter(WorldState& world, const ApiRegistry& registry, ExecutionTrace& trace, int budget)
      : world_(world), registry_(registry), trace_(trace), budget_(budget) {}

  void run(const Block& block) {
    Env globals;
    exec(block, globals);
  }

 private:
  void exec(const Block& block, Env& env) {
    for (const auto& stmt : block) {
      std::visit(
          [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Assign>) {
              env[node.name] = eval(node.value, env);
            } else if constexpr (std::is_same_v<T, ExprStmt>) {
              eval(node.expr, env);
            } else if constexpr (std::is_same_v<T, If>) {
              Value c = eval(node.cond, env);
              const bool* b = std::get_if<bool>(&c);
              if (!b) {
                fail(node.cond.pos, DiagCode::type,
                     "if condition must be true or false, found a " + std::string(type_name(c)));
              }
              if (*b) {
                exec(node.then_body, env);
              } else if (node.else_body) {
                exec(*node.else_body, env);
              }
            } else if constexpr (std::is_same_v<T, FuncDef>) {
              locals_.insert_or_assign(node.name, &node);
            }
          },
          stmt.node);
    }
  }

  Value eval(const Expr& e, Env& env) {
    return std::visit(
        [&](const auto& node) -> Value {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, Literal>) {
            return std::visit([](const auto& v) -> Value { return v; }, node.value);
          } else if constexpr (std::is_same_v<T, Var>) {
            auto it = env.find(node.name);
            if (it == env.end()) {
              fail(e.pos, DiagCode::unknown_object,
                   "name '" + node.name + "' is used before it is assigned");
            }
            return it->second;
          } else if constexpr (std::is_same_v<T, Call>) {
            std::vector<Value> args;
            args.reserve(node.args.size());
            for (const auto& a : node.args) args.push_back(eval(a, env));
            return call(node.callee, args, e.pos);
          } else if constexpr (std::is_same_v<T, Binary>) {
            Value l = eval(*node.lhs, env);
            Value r = eval(*node.rhs, env);
            return binary(node.op, l, r, e.pos);
          } else {
            Value obj = eval(*node.object, env);
            const Vec3* p = std::get_if<Vec3>(&obj);
            if (!p) {
              fail(e.pos, DiagCode::type,
                   std::string("'.") + node.field + "' needs a position, found a " +
                       std::string(type_name(obj)));
            }
            return node.field == 'x' ? p->x : node.field == 'y' ? p->y : p->z;
          }
        },
        e.node);
  }

  Value binary(BinaryOp op, const Value& l, const Value& r, SourcePos pos) {
    if (op == BinaryOp::eq || op == BinaryOp::ne) {
      if (l.index() != r.index()) {
        fail(pos, DiagCode::type,
             "cannot compare a " + std::string(type_name(l)) + " with a " +
                 std::string(type_name(r)));
      }
      bool equal = l == r;
      return op == BinaryOp::eq ? equal : !equal;
    }
    const double* a = std::get_if<double>(&l);
    const double* b = std::get_if<double>(&r);
    if (!a || !b) {
      fail(pos, DiagCode::type,
           "operator '" + std::string(to_string(op)) + "' needs numbers, found " +
               std::string(type_name(l)) + " and " + std::string(type_name(r)));
    }
    switch (op) {
      case BinaryOp::add: return *a + *b;
      case BinaryOp::sub: return *a - *b;
      case BinaryOp::mul: return *a * *b;
      case BinaryOp::div:
        if (*b == 0.0) fail(pos, DiagCode::runtime_action, "division by zero");
        return *a / *b;
      case BinaryOp::lt: return *a < *b;
      case BinaryOp::le: return *a <= *b;
      case BinaryOp::gt: return *a > *b;
      case BinaryOp::ge: return *a >= *b;
      default: return std::monostate{};
    }
  }

  Value call(const std::string& name, const std::vector<Value>& args, SourcePos pos) {
    if (const CoreApi* api = find_core(name)) return core(*api, args, pos);

    const FuncDef* def = nullptr;
    if (const LearnedApi* learned = registry_.find_learned(name)) {
      def = &learned->def;
    } else if (auto it = locals_.find(name); it != locals_.end()) {
      def = it->second;
    }
    if (!def) fail(pos, DiagCode::unknown_api, "unknown API '" + name + "'");
    if (args.size() != def->params.size()) {
      fail(pos, DiagCode::arity,
           name + " expects " + std::to_string(def->params.size()) + " arguments, got " +
               std::to_string(args.size()));
    }
    Env frame;
    for (std::size_t i = 0; i < args.size(); ++i) frame[def->params[i]] = args[i];
    exec(def->body, frame);
    return std::monostate{};
  }

  Value core(const CoreApi& api, const std::vector<Value>& args, SourcePos pos) {
    if (args.size() != api.params.size()) {
      fail(pos, DiagCode::arity,
           api.name + " expects " + std::to_string(api.params.size()) + " arguments, got " +
               std::to_string(args.size()));
    }
    for (std::size_t i = 0; i < args.size(); ++i) {
      bool ok = api.param_types[i] == ValueType::string ? std::holds_alternative<std::string>(args[i])
                                                         : std::holds_alternative<double>(args[i]);
      if (!ok) {
        fail(pos, DiagCode::type,
             api.name + " argument '" + api.params[i] + "' must be a " +
                 std::string(to_string(api.param_types[i])) + ", found a " +
                 std::string(type_name(args[i])));
      }
    }
    if (attempted_ >= budget_) {
      fail(pos, DiagCode::runtime_action,
           "step budget of " + std::to_string(budget_) + " core API calls exceeded");
    }
    ++attempted_;

    auto num = [&](std::size_t i) { return std::get<double>(args[i]); };
    auto str = [&](std::size_t i) -> const std::string& { return std::get<std::string>(args[i]); };

    Value result;
    ActionOutcome outcome;
    if (api.name == "pick") {
      outcome = world_.pick(str(0));
    } else if (api.name == "place_on") {
      outcome = world_.place_on(str(0));
    } else if (api.name == "place_at") {
      outcome = world_.place_at({num(0), num(1), num(2)});
    } else if (api.name == "move") {
      outcome = world_.move_gripper({num(0), num(1), num(2)});
    } else if (api.name == "get_obj_pose") {
      auto r = world_.get_obj_pose(str(0));
      if (r) result = r.value(); else outcome = r.error();
    } else if (api.name == "get_obj_mass") {
      auto r = world_.get_obj_mass(str(0));
      if (r) result = r.value(); else outcome = r.error();
    }
    if (outcome) {
      fail(pos, DiagCode::runtime_action,
           api.name + " failed (" + std::string(to_string(outcome->kind)) + "): " + outcome->message);
    }

    TraceStep step{api.name, {}, std::holds_alternative<std::monostate>(result) ? "ok" : show(result)};
    for (const auto& a : args) step.args.push_back(show(a));
    trace_.steps.push_back(std::move(step));
    return result;
  }

  [[noreturn]] void fail(SourcePos pos, DiagCode code, std::string message) {
    throw RuntimeFailure{
        make_diagnostic(Phase::runtime, pos.line, pos.column, code, std::move(message))};
  }

  WorldState& world_;
  const ApiRegistry& registry_;
  ExecutionTrace& trace_;
  int budget_;
  int attempted_ = 0;
  std::map<std::string, const FuncDef*, std::less<>> locals_;
};

}  // namespace

InterpretResult interpret(const Program& program, WorldState world, const ApiRegistry& registry,
                          const InterpretOptions& options) {
  InterpretResult result{std::move(world), {}, std::nullopt};
  result.trace.world_before = result.world.digest();
  try {
    Interpreter(result.world, registry, result.trace, options.step_budget).run(program.statements);
  } catch (const RuntimeFailure& f) {
    result.error = f.diag;
  }
  result.trace.world_after = result.world.digest();
  return result;
}

}  // namespace triples::lang
