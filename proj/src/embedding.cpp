#include "maestro/embedding.hpp"

#include <cmath>
#include <limits>
#include <mutex>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "maestro/errors.hpp"
#include "maestro/rng.hpp"

namespace maestro {

Embedding normalized(std::vector<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) {
    std::fill(v.begin(), v.end(), 0.0);
    if (!v.empty()) v[0] = 1.0;
    return Embedding{std::move(v)};
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return Embedding{std::move(v)};
}

std::vector<Embedding> Embedder::embed_batch(const std::vector<std::string>& texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ < 16) throw ConfigError("embedding dimension must be at least 16");
}

Embedding HashEmbedder::embed(const std::string& text) const {
  std::vector<double> v(dim_, 0.0);
  if (text.empty()) {
    v[0] = 1.0;
    return Embedding{std::move(v)};
  }
  // Boundary markers give short strings at least one 3-gram.
  const std::string padded = "\x02" + text + "\x03";
  for (std::size_t n = 3; n <= 5; ++n) {
    if (padded.size() < n) break;
    for (std::size_t i = 0; i + n <= padded.size(); ++i) {
      const std::uint64_t h = mix64(fnv1a64(std::string_view(padded).substr(i, n)) + n);
      const std::size_t bucket = static_cast<std::size_t>(h % dim_);
      v[bucket] += (h >> 63) != 0 ? -1.0 : 1.0;
    }
  }
  return normalized(std::move(v));
}

RemoteEmbedder::RemoteEmbedder(RemoteEndpoint endpoint, std::size_t expected_dim)
    : endpoint_(std::move(endpoint)), dim_(expected_dim) {
  if (endpoint_.base_url.empty()) throw ConfigError("remote embedder requires base_url");
  if (endpoint_.model.empty()) throw ConfigError("remote embedder requires a model name");
}

std::size_t RemoteEmbedder::dim() const {
  if (dim_.load() == 0) {
    // Provider-reported: probe once.
    embed(" ");
  }
  return dim_.load();
}

Embedding RemoteEmbedder::embed(const std::string& text) const { return embed_batch({text}).at(0); }

std::vector<Embedding> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) const {
  if (texts.empty()) return {};
  const auto url = detail::parse_base_url(endpoint_.base_url);
  auto headers = detail::auth_headers(endpoint_.api_key_env);
  if (!headers) throw EmbeddingError("credential variable " + endpoint_.api_key_env + " is not set", true);

  nlohmann::json body = {{"model", endpoint_.model}, {"input", texts}};
  auto client = detail::make_client(url.origin, endpoint_.timeout_s);
  auto res = client->Post(url.path + "/embeddings", *headers, body.dump(), "application/json");
  if (!res) throw EmbeddingError("embedding request failed: " + httplib::to_string(res.error()), true);
  if (res->status == 401 || res->status == 403) throw EmbeddingError("embedding endpoint rejected credentials", true);
  if (res->status != 200) {
    throw EmbeddingError("embedding endpoint returned HTTP " + std::to_string(res->status), true);
  }

  std::vector<Embedding> out(texts.size());
  try {
    const auto j = nlohmann::json::parse(res->body);
    const auto& data = j.at("data");
    if (data.size() != texts.size()) throw EmbeddingError("embedding response has the wrong item count", false);
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto& item = data[k];
      const std::size_t idx = item.contains("index") ? item["index"].get<std::size_t>() : k;
      if (idx >= out.size()) throw EmbeddingError("embedding response index out of range", false);
      auto values = item.at("embedding").get<std::vector<double>>();
      if (values.empty()) throw EmbeddingError("empty embedding in response", false);
      for (double x : values) {
        if (!std::isfinite(x)) throw EmbeddingError("non-finite embedding value", false);
      }
      std::size_t expected = dim_.load();
      if (expected == 0) {
        dim_.compare_exchange_strong(expected, values.size());
        expected = dim_.load();
      }
      if (values.size() != expected) throw EmbeddingError("embedding dimension changed between calls", false);
      out[idx] = normalized(std::move(values));
    }
  } catch (const nlohmann::json::exception& e) {
    throw EmbeddingError(std::string("malformed embedding response: ") + e.what(), false);
  }
  for (const auto& e : out) {
    if (e.values.empty()) throw EmbeddingError("embedding response is missing an item", false);
  }
  return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg) {
  switch (cfg.kind) {
    case EmbedderConfig::Kind::Hash:
      return std::make_unique<HashEmbedder>(cfg.dim);
    case EmbedderConfig::Kind::Remote:
      return std::make_unique<RemoteEmbedder>(cfg.remote);
  }
  throw ConfigError("unknown embedder kind");
}

std::optional<Embedding> EmbeddingCache::get(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = slots_.find(key);
  if (it == slots_.end()) return std::nullopt;
  it->second->last_used.store(++clock_, std::memory_order_relaxed);
  return it->second->value;
}

void EmbeddingCache::put(const std::string& key, Embedding value) {
  std::unique_lock lock(mu_);
  if (auto it = slots_.find(key); it != slots_.end()) {
    it->second->value = std::move(value);
    it->second->last_used.store(++clock_, std::memory_order_relaxed);
    return;
  }
  if (capacity_ == 0) return;
  if (slots_.size() >= capacity_) {
    auto victim = slots_.begin();
    for (auto it = slots_.begin(); it != slots_.end(); ++it) {
      if (it->second->last_used.load(std::memory_order_relaxed) < victim->second->last_used.load(std::memory_order_relaxed)) {
        victim = it;
      }
    }
    slots_.erase(victim);
  }
  auto slot = std::make_unique<Slot>();
  slot->value = std::move(value);
  slot->last_used.store(++clock_, std::memory_order_relaxed);
  slots_.emplace(key, std::move(slot));
}

Embedding EmbeddingCache::get_or_compute(const std::string& key, const std::function<Embedding()>& compute) {
  if (auto hit = get(key)) return *std::move(hit);
  Embedding e = compute();
  put(key, e);
  return e;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mu_);
  return slots_.size();
}

}  // namespace maestro
