#include "triples/lang/registry.hpp"

#include <algorithm>
#include <set>

#include "triples/lang/checker.hpp"
#include "triples/lang/parser.hpp"

namespace triples::lang {

std::string_view to_string(ValueType t) {
  switch (t) {
    case ValueType::number: return "number";
    case ValueType::string: return "string";
    case ValueType::boolean: return "bool";
    case ValueType::position: return "position";
    case ValueType::none: return "nothing";
    case ValueType::any: return "any";
  }
  return "?";
}

const std::vector<CoreApi>& core_apis() {
  using VT = ValueType;
  static const std::vector<CoreApi> apis{
      {"pick", {"object"}, {VT::string}, VT::none, true,
       "pick(object): grasp the named object; the gripper moves to its center"},
      {"place_on", {"object"}, {VT::string}, VT::none, true,
       "place_on(object): put the held object on top of the named object, or into it if it is a cup"},
      {"place_at", {"x", "y", "z"}, {VT::number, VT::number, VT::number}, VT::none, false,
       "place_at(x, y, z): put the held object with its center at (x, y, z) meters"},
      {"move", {"dx", "dy", "dz"}, {VT::number, VT::number, VT::number}, VT::none, false,
       "move(dx, dy, dz): move the gripper, and anything it holds, by the offset in meters"},
      {"get_obj_pose", {"object"}, {VT::string}, VT::position, true,
       "get_obj_pose(object): current center of the object; read components with .x .y .z"},
      {"get_obj_mass", {"object"}, {VT::string}, VT::number, true,
       "get_obj_mass(object): mass of the object in kilograms; the only way to learn a hidden mass"},
  };
  return apis;
}

const CoreApi* find_core(std::string_view name) {
  for (const auto& api : core_apis()) {
    if (api.name == name) return &api;
  }
  return nullptr;
}

namespace {

void collect_calls(const Expr& e, std::set<std::string>& out) {
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Call>) {
          out.insert(node.callee);
          for (const auto& a : node.args) collect_calls(a, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect_calls(*node.lhs, out);
          collect_calls(*node.rhs, out);
        } else if constexpr (std::is_same_v<T, Attr>) {
          collect_calls(*node.object, out);
        }
      },
      e.node);
}

void collect_calls(const Block& block, std::set<std::string>& out) {
  for (const auto& s : block) {
    if (const auto* a = std::get_if<Assign>(&s.node)) {
      collect_calls(a->value, out);
    } else if (const auto* e = std::get_if<ExprStmt>(&s.node)) {
      collect_calls(e->expr, out);
    } else if (const auto* i = std::get_if<If>(&s.node)) {
      collect_calls(i->cond, out);
      collect_calls(i->then_body, out);
      if (i->else_body) collect_calls(*i->else_body, out);
    } else if (const auto* f = std::get_if<FuncDef>(&s.node)) {
      collect_calls(f->body, out);
    }
  }
}

}  // namespace

std::set<std::string> called_names(const Block& block) {
  std::set<std::string> out;
  collect_calls(block, out);
  return out;
}

std::string describe_learned(const FuncDef& def) {
  std::string out = def.name + "(";
  for (std::size_t i = 0; i < def.params.size(); ++i) {
    if (i) out += ", ";
    out += def.params[i];
  }
  out += "): learned API built on ";
  std::set<std::string> calls = called_names(def.body);
  if (calls.empty()) return out + "no other APIs";
  bool first = true;
  for (const auto& c : calls) {
    if (!first) out += ", ";
    out += c;
    first = false;
  }
  return out;
}

Result<FuncDef, Diagnostic> ApiRegistry::validate(std::string_view funcdef_source) const {
  auto parsed = parse(funcdef_source);
  if (!parsed) return parsed.error();
  const FuncDef* def = nullptr;
  SourcePos pos;
  for (const auto& stmt : parsed->statements) {
    if (std::holds_alternative<Comment>(stmt.node)) continue;
    const auto* f = std::get_if<FuncDef>(&stmt.node);
    if (!f || def) {
      return make_diagnostic(Phase::parse, stmt.pos.line, stmt.pos.column, DiagCode::syntax,
                             "an API definition must consist of exactly one 'def' block");
    }
    def = f;
    pos = stmt.pos;
  }
  if (!def) {
    return make_diagnostic(Phase::parse, 1, 1, DiagCode::syntax,
                           "an API definition must consist of exactly one 'def' block");
  }
  if (find_core(def->name)) {
    return make_diagnostic(Phase::check, pos.line, pos.column, DiagCode::unknown_api,
                           "cannot redefine core API '" + def->name + "'");
  }
  if (find_learned(def->name)) {
    return make_diagnostic(Phase::check, pos.line, pos.column, DiagCode::unknown_api,
                           "an API named '" + def->name + "' is already registered");
  }
  auto diags = check_funcdef(*def, pos, *this);
  if (!diags.empty()) return diags.front();
  return *def;
}

std::optional<Diagnostic> ApiRegistry::register_api(std::string_view funcdef_source) {
  auto def = validate(funcdef_source);
  if (!def) return def.error();
  std::string doc = describe_learned(*def);
  learned_.push_back(LearnedApi{std::move(def).value(), std::string(funcdef_source), std::move(doc)});
  return std::nullopt;
}

bool ApiRegistry::has(std::string_view name) const {
  return find_core(name) != nullptr || find_learned(name) != nullptr;
}

const LearnedApi* ApiRegistry::find_learned(std::string_view name) const {
  for (const auto& api : learned_) {
    if (api.def.name == name) return &api;
  }
  return nullptr;
}

std::vector<std::string> ApiRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& api : core_apis()) out.push_back(api.name);
  for (const auto& api : learned_) out.push_back(api.def.name);
  return out;
}

std::vector<std::string> ApiRegistry::doc_lines() const {
  std::vector<std::string> out;
  for (const auto& api : core_apis()) out.push_back(api.doc);
  for (const auto& api : learned_) out.push_back(api.doc);
  return out;
}

std::uint64_t ApiRegistry::digest() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& api : learned_) {
    h = fnv1a64(api.def.name, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(format(Program{{Stmt{api.def, {}}}}), h);
    h = fnv1a64("\x1e", h);
  }
  return h;
}

}  // namespace triples::lang
