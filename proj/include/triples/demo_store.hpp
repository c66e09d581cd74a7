#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triples/common.hpp"

namespace triples {

/// Unit-length embedding.
struct EmbeddingVector {
  std::vector<double> components;
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Dot product of two unit vectors. Throws Error on a dimension mismatch.
double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Throws Error when the text is empty after trimming.
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::string name() const = 0;
};

/// Lowercases and splits on every non-alphanumeric ASCII byte.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr std::size_t kEmbeddingDim = 256;

/// Hashed bag of tokens: each token's FNV-1a 64 hash selects a component
/// (hash mod dim) that is incremented; the result is L2-normalized. Text with
/// no tokens maps to the first basis vector.
class HashedBagOfWords final : public EmbeddingProvider {
 public:
  explicit HashedBagOfWords(std::size_t dim = kEmbeddingDim) : dim_(dim) {}
  EmbeddingVector embed(std::string_view text) const override;
  std::string name() const override { return "hashed-bow-" + std::to_string(dim_); }

 private:
  std::size_t dim_;
};

/// Calls an OpenAI-compatible `/v1/embeddings` endpoint and normalizes the
/// returned vector. Transport failures and 5xx replies surface as
/// `GatewayError` after the retry budget is spent.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  struct Config {
    std::string endpoint;
    std::string model = "all-MiniLM-L6-v2";
    std::string api_key;
    std::chrono::milliseconds timeout{10000};
    int max_retries = 2;
  };
  explicit RemoteEmbeddingProvider(Config config) : config_(std::move(config)) {}
  EmbeddingVector embed(std::string_view text) const override;
  std::string name() const override { return "remote:" + config_.model; }

 private:
  Config config_;
};

enum class DemoSource { seed, learned };
enum class UpdateMode { none, append, append_delete };

std::string_view to_string(DemoSource s);
std::string_view to_string(UpdateMode m);
std::optional<UpdateMode> update_mode_from_string(std::string_view s);

struct Demonstration {
  std::int64_t id = 0;
  std::string task_description;
  std::string thought;
  std::string examples;
  DemoSource source = DemoSource::seed;
  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

/// Throws Error if a section is blank or `examples` is not valid policy code.
void validate_demonstration(const Demonstration& demo);

struct UpsertResult {
  std::int64_t id = 0;
  std::vector<std::int64_t> removed;
};

/// Demonstration library keyed on task-description embeddings.
///
/// Reads are safe to run concurrently; `add` and `upsert` need exclusive access.
class DemoLibrary {
 public:
  explicit DemoLibrary(std::shared_ptr<const EmbeddingProvider> provider);

  /// Appends with a fresh id and returns it.
  std::int64_t add(std::string task_description, std::string thought, std::string examples,
                   DemoSource source = DemoSource::seed);

  /// The min(k, n) demonstrations most similar to `query`, best first, ties
  /// broken by smaller id. Throws Error if k < 1.
  std::vector<Demonstration> retrieve_top_k(std::string_view query, std::size_t k) const;

  /// append: adds `demo` under a fresh id. append_delete: first removes every
  /// demonstration whose task-description similarity to `demo` is >= theta_dup.
  /// The incoming id is ignored.
  UpsertResult upsert(Demonstration demo, double theta_dup, UpdateMode mode);

  const std::vector<Demonstration>& demos() const { return demos_; }
  std::size_t size() const { return demos_.size(); }
  const Demonstration* find(std::int64_t id) const;
  const EmbeddingVector& embedding(std::int64_t id) const;
  const EmbeddingProvider& provider() const { return *provider_; }
  std::shared_ptr<const EmbeddingProvider> provider_handle() const { return provider_; }

  /// Digest over ids and text; independent of the embedding provider.
  std::uint64_t digest() const;

  nlohmann::json to_json() const;
  /// Throws Error naming the first malformed record.
  static DemoLibrary from_json(const nlohmann::json& doc,
                               std::shared_ptr<const EmbeddingProvider> provider);

  void save(const std::filesystem::path& path) const;
  static DemoLibrary load(const std::filesystem::path& path,
                          std::shared_ptr<const EmbeddingProvider> provider);

 private:
  void insert(Demonstration demo);

  std::shared_ptr<const EmbeddingProvider> provider_;
  std::vector<Demonstration> demos_;
  std::vector<EmbeddingVector> cache_;  // parallel to demos_
  std::int64_t next_id_ = 1;
};

}  // namespace triples
