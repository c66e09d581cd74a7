#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triples/common.hpp"
#include "triples/demo_store.hpp"
#include "triples/lang/registry.hpp"
#include "triples/task.hpp"

namespace triples {

struct ChatMessage {
  enum class Role { system, user, assistant };
  Role role = Role::user;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

std::string_view to_string(ChatMessage::Role r);

/// Which stage a request belongs to.
enum class PromptRole { simplify, solve, summarize, supervise };

std::string_view to_string(PromptRole r);

/// Per-call information that is not part of the prompt text. The oracle
/// backend reads the active task from here, so one backend instance can serve
/// concurrent episodes.
struct CallContext {
  PromptRole role = PromptRole::solve;
  const TaskSpec* task = nullptr;
};

enum class BackendKind { remote, scripted, oracle, faulty };

std::string_view to_string(BackendKind k);

/// Chat-completion backend. Implementations are safe for concurrent
/// `complete` calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendKind kind() const = 0;
  /// Throws GatewayError when no response can be produced.
  virtual std::string complete(const std::vector<ChatMessage>& messages,
                               const CallContext& ctx) = 0;
};

/// OpenAI-compatible `/v1/chat/completions` client, temperature 0.
class RemoteBackend final : public Backend {
 public:
  struct Config {
    std::string endpoint;
    std::string model = "gpt-3.5-turbo";
    std::string api_key;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    int max_in_flight = 4;
  };

  /// Endpoint from `TRIPLES_ENDPOINT` when `endpoint` is empty, key from
  /// `TRIPLES_API_KEY` when `api_key` is empty. Throws Error if no endpoint.
  static Config config_from_env(Config base);

  explicit RemoteBackend(Config config);
  BackendKind kind() const override { return BackendKind::remote; }
  std::string complete(const std::vector<ChatMessage>& messages, const CallContext& ctx) override;
  const Config& config() const { return config_; }

 private:
  Config config_;
  std::counting_semaphore<1024> in_flight_;
};

/// Canned responses. A rule fires when every one of its substrings occurs in
/// the final user message; the first such rule wins.
class ScriptedBackend final : public Backend {
 public:
  struct Rule {
    std::vector<std::string> match;
    std::string response;
  };

  explicit ScriptedBackend(std::vector<Rule> rules);
  /// JSON list of {match: string | [string...], response: string}.
  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& doc);
  static std::shared_ptr<ScriptedBackend> load(const std::filesystem::path& path);

  BackendKind kind() const override { return BackendKind::scripted; }
  std::string complete(const std::vector<ChatMessage>& messages, const CallContext& ctx) override;
  const std::vector<Rule>& rules() const { return rules_; }

 private:
  std::vector<Rule> rules_;
};

/// Answers from the active task's ground-truth code: step markers become
/// minimal tasks, the segment whose step text matches the requested minimal
/// task becomes the code, and summaries are always `SKIP`.
class OracleBackend final : public Backend {
 public:
  BackendKind kind() const override { return BackendKind::oracle; }
  std::string complete(const std::vector<ChatMessage>& messages, const CallContext& ctx) override;
};

/// Corrupts the wrapped backend's first `faults` responses by deleting the last
/// `)` of the code (or appending `(` when there is none), then delegates.
class FaultyBackend final : public Backend {
 public:
  FaultyBackend(std::shared_ptr<Backend> inner, int faults)
      : inner_(std::move(inner)), remaining_(faults) {}
  BackendKind kind() const override { return BackendKind::faulty; }
  std::string complete(const std::vector<ChatMessage>& messages, const CallContext& ctx) override;
  int remaining() const { return remaining_.load(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::atomic<int> remaining_;
};

/// Deletes the last `)` outside strings and comments, or appends `(`.
std::string inject_syntax_fault(std::string_view response);

// ---- prompt templates -------------------------------------------------------

struct RoleTemplate {
  PromptRole role = PromptRole::solve;
  std::string intro;
  std::string rules;
  std::string exemplars;
};

struct TemplateSet {
  RoleTemplate simplify;
  RoleTemplate solve;
  RoleTemplate summarize;
  RoleTemplate supervise;

  const RoleTemplate& get(PromptRole r) const;
  /// `{simplify: {intro, rules, exemplars}, solve: ..., ...}`; throws Error.
  static TemplateSet from_json(const nlohmann::json& doc);
  static TemplateSet load(const std::filesystem::path& path);
  /// The templates compiled into the binary.
  static const TemplateSet& builtin();
};

// Section headers. Builders emit them and the oracle and tests look them up.
inline constexpr std::string_view kEnvironmentHeader = "### Environment";
inline constexpr std::string_view kRulesHeader = "### Rules";
inline constexpr std::string_view kExamplesHeader = "### Examples";
inline constexpr std::string_view kInstructionHeader = "### Instruction";
inline constexpr std::string_view kContextHeader = "### Context";
inline constexpr std::string_view kApisHeader = "### APIs";
inline constexpr std::string_view kDemosHeader = "### Demonstrations";
inline constexpr std::string_view kTaskHeader = "### Task";
inline constexpr std::string_view kCodeHeader = "### Code";
inline constexpr std::string_view kProposalHeader = "### Proposed API";
inline constexpr std::string_view kProposedDemoHeader = "### Proposed demonstration";

/// Throws Error if `env_obs` or `x_high` is blank.
std::vector<ChatMessage> build_simplify_prompt(const RoleTemplate& tpl, std::string_view env_obs,
                                               std::string_view x_high);

enum class SolveSection { context, apis, demos, task };

struct TaggedSection {
  SolveSection tag;
  std::string text;
};

/// Solution prompt before flattening. The user message is the sections
/// joined in order; the demos section is omitted when there are none.
struct SolvePrompt {
  std::string system;
  std::vector<TaggedSection> sections;

  std::vector<ChatMessage> messages() const;
};

std::string render_demonstration(const Demonstration& demo);

SolvePrompt build_solve_prompt(const RoleTemplate& tpl, std::string_view context,
                               const std::vector<std::string>& api_docs,
                               const std::vector<Demonstration>& demos, std::string_view x_low);

/// Follow-up user message sent after a rejected attempt.
ChatMessage build_feedback_message(const std::vector<lang::Diagnostic>& diagnostics,
                                   std::string_view x_low);

std::vector<ChatMessage> build_summary_prompt(const RoleTemplate& tpl, std::string_view env_obs,
                                              const std::vector<std::string>& api_docs,
                                              std::string_view x_low, std::string_view code);

// ---- response parsers -------------------------------------------------------

struct ResponseError {
  std::string message;
};

/// Minimal tasks from `TASK: ` lines, in order; error text when there are none.
Result<std::vector<std::string>, ResponseError> parse_simplification(std::string_view text);

/// First fenced block, else the whole response.
Result<std::string, ResponseError> parse_code(std::string_view text);

struct SummaryProposal {
  std::string api_source;
  Demonstration demo;
};

/// nullopt for `SKIP`; error text when a section is missing or blank.
Result<std::optional<SummaryProposal>, ResponseError> parse_summary(std::string_view text);

struct Verdict {
  bool accepted = false;
  std::string reason;
};

std::vector<ChatMessage> build_supervise_prompt(const RoleTemplate& tpl,
                                                const SummaryProposal& proposal);

/// Deterministic validation, then (remote backends only) one confirmation
/// call whose ACCEPT/REJECT verdict is honored.
Verdict supervise(Backend& backend, const TemplateSet& templates, const SummaryProposal& proposal,
                  const lang::ApiRegistry& registry, const CallContext& ctx = {});

}  // namespace triples
