#include "triples/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "triples/assets_data.hpp"
#include "triples/http.hpp"
#include "triples/lang/checker.hpp"
#include "triples/lang/parser.hpp"

namespace triples {

namespace {

constexpr std::string_view kSpace = " \t\r\n";

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(kSpace);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(kSpace);
  return s.substr(b, e - b + 1);
}

bool blank(std::string_view s) { return trim(s).empty(); }

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string with_newline(std::string_view s) {
  std::string out(s);
  if (out.empty() || out.back() != '\n') out += '\n';
  return out;
}

std::string fenced(std::string_view code) { return "```\n" + with_newline(code) + "```"; }

struct FenceRange {
  std::size_t begin = 0;  // first byte of the inner text
  std::size_t end = 0;    // one past the last inner byte
};

// Inner range of the first ``` fence. An unterminated fence runs to the end.
std::optional<FenceRange> first_fence(std::string_view text) {
  auto open = text.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body = text.find('\n', open);
  if (body == std::string_view::npos) return FenceRange{text.size(), text.size()};
  ++body;
  auto close = text.find("```", body);
  return FenceRange{body, close == std::string_view::npos ? text.size() : close};
}

const ChatMessage* last_user(const std::vector<ChatMessage>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == ChatMessage::Role::user) return &*it;
  }
  return nullptr;
}

const ChatMessage* first_user(const std::vector<ChatMessage>& messages) {
  for (const auto& m : messages) {
    if (m.role == ChatMessage::Role::user) return &m;
  }
  return nullptr;
}

// Body of a `### Header` section: the lines after the header up to the next
// `### ` header or the end of the text.
std::optional<std::string> section_body(std::string_view text, std::string_view header) {
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]) != header) continue;
    std::string body;
    for (std::size_t j = i + 1; j < lines.size() && !starts_with(lines[j], "### "); ++j) {
      body += std::string(lines[j]) + "\n";
    }
    return std::string(trim(body));
  }
  return std::nullopt;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(ChatMessage::Role r) {
  switch (r) {
    case ChatMessage::Role::system: return "system";
    case ChatMessage::Role::user: return "user";
    case ChatMessage::Role::assistant: return "assistant";
  }
  return "?";
}

std::string_view to_string(PromptRole r) {
  switch (r) {
    case PromptRole::simplify: return "simplify";
    case PromptRole::solve: return "solve";
    case PromptRole::summarize: return "summarize";
    case PromptRole::supervise: return "supervise";
  }
  return "?";
}

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::remote: return "remote";
    case BackendKind::scripted: return "scripted";
    case BackendKind::oracle: return "oracle";
    case BackendKind::faulty: return "faulty";
  }
  return "?";
}

// ---- remote -----------------------------------------------------------------

RemoteBackend::Config RemoteBackend::config_from_env(Config base) {
  if (base.endpoint.empty()) {
    if (const char* e = std::getenv("TRIPLES_ENDPOINT")) base.endpoint = e;
  }
  if (base.api_key.empty()) {
    if (const char* k = std::getenv("TRIPLES_API_KEY")) base.api_key = k;
  }
  if (base.endpoint.empty()) {
    throw Error("remote backend needs --endpoint or TRIPLES_ENDPOINT");
  }
  return base;
}

RemoteBackend::RemoteBackend(Config config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
  http::parse_endpoint(config_.endpoint);  // fail fast on a malformed URL
}

std::string RemoteBackend::complete(const std::vector<ChatMessage>& messages,
                                    const CallContext&) {
  if (messages.empty()) throw GatewayError("chat completion needs at least one message");
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  nlohmann::json req{{"model", config_.model}, {"messages", msgs}, {"temperature", 0}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  http::RetryPolicy retry;
  retry.max_retries = config_.max_retries;
  retry.base_delay = config_.base_delay;

  in_flight_.acquire();
  http::Response res;
  try {
    res = http::post_json_with_retries(http::parse_endpoint(config_.endpoint),
                                       "/v1/chat/completions", req.dump(), headers,
                                       config_.timeout, retry);
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();

  if (res.status != 200) {
    throw GatewayError("chat endpoint returned HTTP " + std::to_string(res.status) + ": " +
                       res.body.substr(0, 200));
  }
  try {
    auto doc = nlohmann::json::parse(res.body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw GatewayError(std::string("malformed chat completion response: ") + e.what());
  }
}

// ---- scripted ---------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<Rule> rules) : rules_(std::move(rules)) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (rules_[i].match.empty()) {
      throw Error("scripted rule " + std::to_string(i) + " has no match text");
    }
    for (const auto& m : rules_[i].match) {
      if (m.empty()) throw Error("scripted rule " + std::to_string(i) + " has an empty matcher");
    }
  }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error("scripted backend file must be a JSON list");
  std::vector<Rule> rules;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& r = doc[i];
    std::string where = "scripted rule " + std::to_string(i);
    if (!r.is_object() || !r.contains("match") || !r.contains("response")) {
      throw Error(where + " needs 'match' and 'response'");
    }
    Rule rule;
    try {
      if (r["match"].is_array()) {
        rule.match = r["match"].get<std::vector<std::string>>();
      } else {
        rule.match.push_back(r["match"].get<std::string>());
      }
      rule.response = r["response"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(where + ": " + e.what());
    }
    rules.push_back(std::move(rule));
  }
  return std::make_shared<ScriptedBackend>(std::move(rules));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read scripted backend file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("scripted backend file " + path.string() + ": " + e.what());
  }
}

std::string ScriptedBackend::complete(const std::vector<ChatMessage>& messages,
                                      const CallContext& ctx) {
  const ChatMessage* user = last_user(messages);
  if (!user) throw GatewayError("scripted backend needs a user message");
  for (const auto& rule : rules_) {
    bool all = std::all_of(rule.match.begin(), rule.match.end(), [&](const std::string& m) {
      return user->content.find(m) != std::string::npos;
    });
    if (all) return rule.response;
  }
  std::string head = user->content.substr(0, 120);
  std::replace(head.begin(), head.end(), '\n', ' ');
  throw GatewayError("no scripted response matches the " + std::string(to_string(ctx.role)) +
                     " prompt: " + head);
}

// ---- oracle -----------------------------------------------------------------

std::string OracleBackend::complete(const std::vector<ChatMessage>& messages,
                                    const CallContext& ctx) {
  switch (ctx.role) {
    case PromptRole::summarize: return "SKIP";
    case PromptRole::supervise: return "ACCEPT";
    default: break;
  }
  if (!ctx.task) throw GatewayError("oracle backend called without an active task");
  if (!ctx.task->gt_code) {
    throw GatewayError("task " + ctx.task->id + " has no ground-truth code for the oracle");
  }
  auto segments = split_steps(*ctx.task->gt_code, ctx.task->instruction);
  if (ctx.role == PromptRole::simplify) {
    std::string out;
    for (const auto& s : segments) out += "TASK: " + s.task + "\n";
    return out;
  }
  const ChatMessage* user = first_user(messages);
  auto x_low = user ? section_body(user->content, kTaskHeader) : std::nullopt;
  if (!x_low) throw GatewayError("oracle could not find the task section in the prompt");
  for (const auto& s : segments) {
    if (trim(s.task) == *x_low) return fenced(s.code);
  }
  throw GatewayError("oracle has no ground truth for minimal task '" + *x_low + "' of " +
                     ctx.task->id);
}

// ---- faulty -----------------------------------------------------------------

std::string inject_syntax_fault(std::string_view response) {
  std::string out(response);
  auto fence = first_fence(response);
  std::size_t begin = fence ? fence->begin : 0;
  std::size_t end = fence ? fence->end : out.size();
  std::optional<std::size_t> last;
  bool in_string = false;
  bool in_comment = false;
  for (std::size_t i = begin; i < end; ++i) {
    char c = out[i];
    if (in_comment) {
      if (c == '\n') in_comment = false;
    } else if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
    } else if (c == '#') {
      in_comment = true;
    } else if (c == '"') {
      in_string = true;
    } else if (c == ')') {
      last = i;
    }
  }
  if (last) {
    out.erase(*last, 1);
  } else {
    out.insert(end, "(\n");
  }
  return out;
}

std::string FaultyBackend::complete(const std::vector<ChatMessage>& messages,
                                    const CallContext& ctx) {
  std::string response = inner_->complete(messages, ctx);
  int left = remaining_.load();
  while (left > 0 && !remaining_.compare_exchange_weak(left, left - 1)) {
  }
  return left > 0 ? inject_syntax_fault(response) : response;
}

// ---- templates --------------------------------------------------------------

const RoleTemplate& TemplateSet::get(PromptRole r) const {
  switch (r) {
    case PromptRole::simplify: return simplify;
    case PromptRole::solve: return solve;
    case PromptRole::summarize: return summarize;
    case PromptRole::supervise: return supervise;
  }
  return solve;
}

namespace {

// A template field is either a string or a list of lines.
std::string text_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return {};
  const auto& v = obj[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw Error(where + "." + key + " must hold strings");
      if (i) out += "\n";
      out += v[i].get<std::string>();
    }
    return out;
  }
  throw Error(where + "." + key + " must be a string or a list of strings");
}

}  // namespace

TemplateSet TemplateSet::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error("templates: top level must be an object");
  TemplateSet set;
  for (auto [role, slot] : {std::pair{PromptRole::simplify, &set.simplify},
                            std::pair{PromptRole::solve, &set.solve},
                            std::pair{PromptRole::summarize, &set.summarize},
                            std::pair{PromptRole::supervise, &set.supervise}}) {
    std::string key(to_string(role));
    std::string where = "templates." + key;
    if (!doc.contains(key) || !doc[key].is_object()) throw Error(where + " is missing");
    RoleTemplate t;
    t.role = role;
    t.intro = text_field(doc[key], "intro", where);
    t.rules = text_field(doc[key], "rules", where);
    t.exemplars = text_field(doc[key], "exemplars", where);
    if (blank(t.intro)) throw Error(where + ".intro must not be empty");
    *slot = std::move(t);
  }
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read templates file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("templates file " + path.string() + ": " + e.what());
  }
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = from_json(nlohmann::json::parse(assets::templates));
  return set;
}

// ---- prompt builders --------------------------------------------------------

std::vector<ChatMessage> build_simplify_prompt(const RoleTemplate& tpl, std::string_view env_obs,
                                               std::string_view x_high) {
  if (blank(env_obs)) throw Error("simplification prompt needs an environment observation");
  if (blank(x_high)) throw Error("simplification prompt needs an instruction");
  std::string system = std::string(trim(tpl.intro)) + "\n\n" + std::string(kEnvironmentHeader) +
                       "\n" + std::string(trim(env_obs));
  std::string user = std::string(kRulesHeader) + "\n" + std::string(trim(tpl.rules)) + "\n\n";
  if (!blank(tpl.exemplars)) {
    user += std::string(kExamplesHeader) + "\n" + std::string(trim(tpl.exemplars)) + "\n\n";
  }
  user += std::string(kInstructionHeader) + "\n" + std::string(trim(x_high));
  return {{ChatMessage::Role::system, std::move(system)}, {ChatMessage::Role::user, std::move(user)}};
}

std::string render_demonstration(const Demonstration& demo) {
  return "[task description]\n" + std::string(trim(demo.task_description)) + "\n[thought]\n" +
         std::string(trim(demo.thought)) + "\n[examples]\n" + fenced(demo.examples);
}

SolvePrompt build_solve_prompt(const RoleTemplate& tpl, std::string_view context,
                               const std::vector<std::string>& api_docs,
                               const std::vector<Demonstration>& demos, std::string_view x_low) {
  SolvePrompt p;
  p.system = std::string(trim(tpl.intro)) + "\n\n" + std::string(kRulesHeader) + "\n" +
             std::string(trim(tpl.rules));
  if (!blank(tpl.exemplars)) {
    p.system += "\n\n" + std::string(kExamplesHeader) + "\n" + std::string(trim(tpl.exemplars));
  }
  p.sections.push_back(
      {SolveSection::context, std::string(kContextHeader) + "\n" + std::string(trim(context))});
  p.sections.push_back({SolveSection::apis, std::string(kApisHeader) + "\n" + join(api_docs, "\n")});
  if (!demos.empty()) {
    std::vector<std::string> rendered;
    for (const auto& d : demos) rendered.push_back(render_demonstration(d));
    p.sections.push_back(
        {SolveSection::demos, std::string(kDemosHeader) + "\n" + join(rendered, "\n\n")});
  }
  p.sections.push_back(
      {SolveSection::task, std::string(kTaskHeader) + "\n" + std::string(trim(x_low))});
  return p;
}

std::vector<ChatMessage> SolvePrompt::messages() const {
  std::vector<std::string> parts;
  for (const auto& s : sections) parts.push_back(s.text);
  return {{ChatMessage::Role::system, system}, {ChatMessage::Role::user, join(parts, "\n\n")}};
}

ChatMessage build_feedback_message(const std::vector<lang::Diagnostic>& diagnostics,
                                   std::string_view x_low) {
  std::string text = "The previous code was rejected before execution:\n";
  for (const auto& d : diagnostics) text += d.to_line() + "\n";
  text += "Fix these problems and answer with the complete corrected code in one fenced block.\n\n";
  text += std::string(kTaskHeader) + "\n" + std::string(trim(x_low));
  return {ChatMessage::Role::user, std::move(text)};
}

std::vector<ChatMessage> build_summary_prompt(const RoleTemplate& tpl, std::string_view env_obs,
                                              const std::vector<std::string>& api_docs,
                                              std::string_view x_low, std::string_view code) {
  std::string system = std::string(trim(tpl.intro)) + "\n\n" + std::string(kEnvironmentHeader) +
                       "\n" + std::string(trim(env_obs)) + "\n\n" + std::string(kApisHeader) +
                       "\n" + join(api_docs, "\n");
  std::string user = std::string(kRulesHeader) + "\n" + std::string(trim(tpl.rules)) + "\n\n";
  if (!blank(tpl.exemplars)) {
    user += std::string(kExamplesHeader) + "\n" + std::string(trim(tpl.exemplars)) + "\n\n";
  }
  user += std::string(kTaskHeader) + "\n" + std::string(trim(x_low)) + "\n\n" +
          std::string(kCodeHeader) + "\n" + fenced(code);
  return {{ChatMessage::Role::system, std::move(system)}, {ChatMessage::Role::user, std::move(user)}};
}

std::vector<ChatMessage> build_supervise_prompt(const RoleTemplate& tpl,
                                                const SummaryProposal& proposal) {
  std::string system = std::string(trim(tpl.intro)) + "\n\n" + std::string(kRulesHeader) + "\n" +
                       std::string(trim(tpl.rules));
  std::string user = std::string(kProposalHeader) + "\n" + fenced(proposal.api_source) + "\n\n" +
                     std::string(kProposedDemoHeader) + "\n" + render_demonstration(proposal.demo);
  return {{ChatMessage::Role::system, std::move(system)}, {ChatMessage::Role::user, std::move(user)}};
}

// ---- parsers ----------------------------------------------------------------

Result<std::vector<std::string>, ResponseError> parse_simplification(std::string_view text) {
  std::vector<std::string> tasks;
  for (auto line : split_lines(text)) {
    auto t = trim(line);
    if (!starts_with(t, "TASK:")) continue;
    auto body = trim(t.substr(5));
    if (!body.empty()) tasks.emplace_back(body);
  }
  if (tasks.empty()) return ResponseError{"response contains no 'TASK: ' lines"};
  return tasks;
}

Result<std::string, ResponseError> parse_code(std::string_view text) {
  std::string_view code = text;
  if (auto fence = first_fence(text)) code = text.substr(fence->begin, fence->end - fence->begin);
  if (blank(code)) return ResponseError{"response contains no code"};
  return with_newline(trim(code));
}

Result<std::optional<SummaryProposal>, ResponseError> parse_summary(std::string_view text) {
  if (trim(text) == "SKIP") return std::optional<SummaryProposal>{};
  static constexpr std::string_view kHeaders[] = {"API:", "TASK_DESCRIPTION:", "THOUGHT:",
                                                  "EXAMPLES:"};
  std::optional<std::string> sections[4];
  int current = -1;
  bool in_fence = false;
  for (auto line : split_lines(text)) {
    auto t = trim(line);
    if (!in_fence) {
      bool header = false;
      for (int h = 0; h < 4; ++h) {
        if (!starts_with(t, kHeaders[h])) continue;
        if (sections[h]) {
          return ResponseError{"summary repeats the " +
                               std::string(kHeaders[h].substr(0, kHeaders[h].size() - 1)) +
                               " section"};
        }
        sections[h] = std::string(t.substr(kHeaders[h].size())) + "\n";
        current = h;
        header = true;
        break;
      }
      if (header) continue;
    }
    if (starts_with(t, "```")) in_fence = !in_fence;
    if (current >= 0) *sections[current] += std::string(line) + "\n";
  }
  for (int h = 0; h < 4; ++h) {
    std::string name(kHeaders[h].substr(0, kHeaders[h].size() - 1));
    if (!sections[h] || blank(*sections[h])) return ResponseError{"summary is missing the " + name + " section"};
    if (auto fence = first_fence(*sections[h])) {
      *sections[h] = sections[h]->substr(fence->begin, fence->end - fence->begin);
      if (blank(*sections[h])) return ResponseError{"summary has an empty " + name + " block"};
    }
  }
  SummaryProposal p;
  p.api_source = with_newline(trim(*sections[0]));
  p.demo.task_description = std::string(trim(*sections[1]));
  p.demo.thought = std::string(trim(*sections[2]));
  p.demo.examples = with_newline(trim(*sections[3]));
  p.demo.source = DemoSource::learned;
  return std::optional<SummaryProposal>(std::move(p));
}

// ---- supervisor -------------------------------------------------------------

Verdict supervise(Backend& backend, const TemplateSet& templates, const SummaryProposal& proposal,
                  const lang::ApiRegistry& registry, const CallContext& ctx) {
  auto def = registry.validate(proposal.api_source);
  if (!def) return {false, "API rejected: " + def.error().to_line()};
  try {
    validate_demonstration(proposal.demo);
  } catch (const Error& e) {
    return {false, std::string("demonstration rejected: ") + e.what()};
  }
  lang::ApiRegistry extended = registry;
  if (auto diag = extended.register_api(proposal.api_source)) {
    return {false, "API rejected: " + diag->to_line()};
  }
  auto examples = lang::parse(proposal.demo.examples);
  if (!examples) return {false, "demonstration examples: " + examples.error().to_line()};
  auto diags = lang::static_check(*examples, extended, nullptr);
  if (!diags.empty()) return {false, "demonstration examples: " + diags.front().to_line()};
  if (!lang::called_names(examples->statements).count(def->name)) {
    return {false, "demonstration examples never call " + def->name};
  }

  if (backend.kind() != BackendKind::remote) return {true, "passed deterministic validation"};
  CallContext sup = ctx;
  sup.role = PromptRole::supervise;
  std::string reply;
  try {
    reply = backend.complete(build_supervise_prompt(templates.supervise, proposal), sup);
  } catch (const GatewayError& e) {
    return {false, std::string("supervisor unavailable: ") + e.what()};
  }
  auto t = trim(reply);
  if (starts_with(t, "ACCEPT")) return {true, "supervisor accepted"};
  if (starts_with(t, "REJECT")) {
    auto why = trim(t.substr(6));
    if (!why.empty() && why.front() == ':') why = trim(why.substr(1));
    return {false, why.empty() ? "supervisor rejected" : "supervisor: " + std::string(why)};
  }
  return {false, "supervisor reply has no ACCEPT or REJECT verdict"};
}

}  // namespace triples
