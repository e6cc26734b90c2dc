#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace maestro {

// Unit-norm dense text embedding.
struct Embedding {
  std::vector<double> values;

  [[nodiscard]] std::size_t dim() const noexcept { return values.size(); }
  [[nodiscard]] std::span<const double> span() const noexcept { return values; }
  bool operator==(const Embedding&) const = default;
};

struct RemoteEndpoint {
  std::string base_url;      // e.g. "http://127.0.0.1:8000/v1"
  std::string api_key_env;   // name of the environment variable holding the bearer token
  std::string model;
  double timeout_s = 60.0;
};

struct EmbedderConfig {
  enum class Kind { Hash, Remote };
  Kind kind = Kind::Hash;
  std::size_t dim = 256;  // hash kind; the remote kind reports its own
  RemoteEndpoint remote;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(const std::string& text) const = 0;
  virtual std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) const;
  [[nodiscard]] virtual std::size_t dim() const = 0;
};

// Signed feature hashing of byte 3/4/5-grams into `dim` buckets, L2-normalized.
// The empty string maps to the unit vector along coordinate 0.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 256);
  Embedding embed(const std::string& text) const override;
  [[nodiscard]] std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
};

// OpenAI-compatible /embeddings client.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(RemoteEndpoint endpoint, std::size_t expected_dim = 0);
  Embedding embed(const std::string& text) const override;
  std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) const override;
  [[nodiscard]] std::size_t dim() const override;

 private:
  RemoteEndpoint endpoint_;
  mutable std::atomic<std::size_t> dim_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg);

// Scales `v` to unit L2 norm; a zero vector becomes e_0.
Embedding normalized(std::vector<double> v);

// Bounded LRU cache keyed by digest strings. Lookups share a reader lock and
// only bump an atomic recency stamp; inserts are exclusive.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::size_t capacity = 10000) : capacity_(capacity) {}

  std::optional<Embedding> get(const std::string& key) const;
  void put(const std::string& key, Embedding value);
  Embedding get_or_compute(const std::string& key, const std::function<Embedding()>& compute);

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }

 private:
  struct Slot {
    Embedding value;
    mutable std::atomic<std::uint64_t> last_used{0};
  };
  std::size_t capacity_;
  mutable std::shared_mutex mu_;
  mutable std::atomic<std::uint64_t> clock_{0};
  std::unordered_map<std::string, std::unique_ptr<Slot>> slots_;
};

}  // namespace maestro
