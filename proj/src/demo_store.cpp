#include "triples/demo_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "triples/http.hpp"
#include "triples/lang/parser.hpp"

namespace triples {

namespace {

bool is_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

EmbeddingVector normalized(std::vector<double> v) {
  double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (norm == 0.0) throw Error("cannot normalize a zero embedding");
  for (double& x : v) x /= norm;
  return EmbeddingVector{std::move(v)};
}

}  // namespace

double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.components.size() != b.components.size()) {
    throw Error("embedding dimensions differ: " + std::to_string(a.components.size()) + " vs " +
                std::to_string(b.components.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.components.size(); ++i) dot += a.components[i] * b.components[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (is_alnum(c)) {
      current += lower(c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

EmbeddingVector HashedBagOfWords::embed(std::string_view text) const {
  if (blank(text)) throw Error("cannot embed empty text");
  std::vector<double> v(dim_, 0.0);
  auto tokens = tokenize(text);
  if (tokens.empty()) {
    v[0] = 1.0;
    return EmbeddingVector{std::move(v)};
  }
  for (const auto& t : tokens) v[fnv1a64(t) % dim_] += 1.0;
  return normalized(std::move(v));
}

EmbeddingVector RemoteEmbeddingProvider::embed(std::string_view text) const {
  if (blank(text)) throw Error("cannot embed empty text");
  nlohmann::json req{{"model", config_.model}, {"input", std::string(text)}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  auto endpoint = http::parse_endpoint(config_.endpoint);
  http::RetryPolicy retry;
  retry.max_retries = config_.max_retries;
  auto res = http::post_json_with_retries(endpoint, "/v1/embeddings", req.dump(), headers,
                                          config_.timeout, retry);
  if (res.status != 200) {
    throw GatewayError("embedding endpoint returned HTTP " + std::to_string(res.status));
  }
  try {
    auto doc = nlohmann::json::parse(res.body);
    auto values = doc.at("data").at(0).at("embedding").get<std::vector<double>>();
    return normalized(std::move(values));
  } catch (const nlohmann::json::exception& e) {
    throw GatewayError(std::string("malformed embedding response: ") + e.what());
  }
}

std::string_view to_string(DemoSource s) { return s == DemoSource::seed ? "seed" : "learned"; }

std::string_view to_string(UpdateMode m) {
  switch (m) {
    case UpdateMode::none: return "none";
    case UpdateMode::append: return "append";
    case UpdateMode::append_delete: return "append_delete";
  }
  return "?";
}

std::optional<UpdateMode> update_mode_from_string(std::string_view s) {
  if (s == "none") return UpdateMode::none;
  if (s == "append") return UpdateMode::append;
  if (s == "append_delete") return UpdateMode::append_delete;
  return std::nullopt;
}

void validate_demonstration(const Demonstration& demo) {
  if (blank(demo.task_description)) throw Error("demonstration task description is empty");
  if (blank(demo.thought)) throw Error("demonstration thought is empty");
  if (blank(demo.examples)) throw Error("demonstration examples are empty");
  auto parsed = lang::parse(demo.examples);
  if (!parsed) {
    throw Error("demonstration examples do not parse: " + parsed.error().to_line());
  }
}

DemoLibrary::DemoLibrary(std::shared_ptr<const EmbeddingProvider> provider)
    : provider_(std::move(provider)) {
  if (!provider_) throw Error("demonstration library needs an embedding provider");
}

void DemoLibrary::insert(Demonstration demo) {
  validate_demonstration(demo);
  cache_.push_back(provider_->embed(demo.task_description));
  next_id_ = std::max(next_id_, demo.id + 1);
  demos_.push_back(std::move(demo));
}

std::int64_t DemoLibrary::add(std::string task_description, std::string thought,
                              std::string examples, DemoSource source) {
  Demonstration d{next_id_, std::move(task_description), std::move(thought), std::move(examples),
                  source};
  insert(std::move(d));
  return demos_.back().id;
}

std::vector<Demonstration> DemoLibrary::retrieve_top_k(std::string_view query,
                                                       std::size_t k) const {
  if (k < 1) throw Error("top-k retrieval needs k >= 1");
  if (demos_.empty()) return {};
  EmbeddingVector q = provider_->embed(query);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(demos_.size());
  for (std::size_t i = 0; i < demos_.size(); ++i) scored.emplace_back(cosine_sim(q, cache_[i]), i);
  std::size_t take = std::min(k, scored.size());
  auto better = [this](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return demos_[a.second].id < demos_[b.second].id;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), better);
  std::vector<Demonstration> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(demos_[scored[i].second]);
  return out;
}

UpsertResult DemoLibrary::upsert(Demonstration demo, double theta_dup, UpdateMode mode) {
  validate_demonstration(demo);
  UpsertResult result;
  if (mode == UpdateMode::none) throw Error("upsert needs update mode append or append_delete");
  EmbeddingVector key = provider_->embed(demo.task_description);
  if (mode == UpdateMode::append_delete) {
    std::vector<Demonstration> kept;
    std::vector<EmbeddingVector> kept_cache;
    for (std::size_t i = 0; i < demos_.size(); ++i) {
      if (cosine_sim(key, cache_[i]) >= theta_dup) {
        result.removed.push_back(demos_[i].id);
      } else {
        kept.push_back(std::move(demos_[i]));
        kept_cache.push_back(std::move(cache_[i]));
      }
    }
    demos_ = std::move(kept);
    cache_ = std::move(kept_cache);
  }
  demo.id = next_id_;
  result.id = demo.id;
  next_id_ += 1;
  demos_.push_back(std::move(demo));
  cache_.push_back(std::move(key));
  return result;
}

const Demonstration* DemoLibrary::find(std::int64_t id) const {
  for (const auto& d : demos_) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

const EmbeddingVector& DemoLibrary::embedding(std::int64_t id) const {
  for (std::size_t i = 0; i < demos_.size(); ++i) {
    if (demos_[i].id == id) return cache_[i];
  }
  throw Error("no demonstration with id " + std::to_string(id));
}

std::uint64_t DemoLibrary::digest() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& d : demos_) {
    h = fnv1a64(std::to_string(d.id), h);
    for (const std::string* s : {&d.task_description, &d.thought, &d.examples}) {
      h = fnv1a64("\x1f", h);
      h = fnv1a64(*s, h);
    }
    h = fnv1a64(to_string(d.source), h);
    h = fnv1a64("\x1e", h);
  }
  return h;
}

nlohmann::json DemoLibrary::to_json() const {
  nlohmann::json demos = nlohmann::json::array();
  for (const auto& d : demos_) {
    demos.push_back({{"id", d.id},
                     {"task_description", d.task_description},
                     {"thought", d.thought},
                     {"examples", d.examples},
                     {"source", std::string(to_string(d.source))}});
  }
  return {{"version", 1}, {"demos", std::move(demos)}};
}

DemoLibrary DemoLibrary::from_json(const nlohmann::json& doc,
                                   std::shared_ptr<const EmbeddingProvider> provider) {
  if (!doc.is_object()) throw Error("library: top level must be an object");
  if (!doc.contains("version") || doc["version"] != 1) throw Error("library: unsupported version");
  if (!doc.contains("demos") || !doc["demos"].is_array()) throw Error("library: missing demos array");
  DemoLibrary lib(std::move(provider));
  std::int64_t last_id = 0;
  const auto& demos = doc["demos"];
  for (std::size_t i = 0; i < demos.size(); ++i) {
    std::string where = "library: demos[" + std::to_string(i) + "]";
    const auto& rec = demos[i];
    if (!rec.is_object()) throw Error(where + " is not an object");
    Demonstration d;
    try {
      d.id = rec.at("id").get<std::int64_t>();
      d.task_description = rec.at("task_description").get<std::string>();
      d.thought = rec.at("thought").get<std::string>();
      d.examples = rec.at("examples").get<std::string>();
      std::string source = rec.at("source").get<std::string>();
      if (source != "seed" && source != "learned") throw Error("unknown source '" + source + "'");
      d.source = source == "seed" ? DemoSource::seed : DemoSource::learned;
    } catch (const nlohmann::json::exception& e) {
      throw Error(where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
    if (d.id <= last_id) throw Error(where + ": ids must be positive and increasing");
    last_id = d.id;
    try {
      lib.insert(std::move(d));
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
  }
  return lib;
}

void DemoLibrary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write library file " + path.string());
  out << to_json().dump(2) << "\n";
  if (!out) throw Error("failed writing library file " + path.string());
}

DemoLibrary DemoLibrary::load(const std::filesystem::path& path,
                              std::shared_ptr<const EmbeddingProvider> provider) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read library file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("library " + path.string() + ": " + e.what());
  }
  return from_json(doc, std::move(provider));
}

}  // namespace triples
