#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "maestro/cost.hpp"
#include "maestro/embedding.hpp"
#include "maestro/state.hpp"

namespace maestro {

struct GenerationRequest {
  std::string prompt;
  int max_tokens = 512;
  double temperature = 0.0;  // always 0; kept explicit for the wire format
  std::uint64_t seed = 0;
};

struct Completion {
  std::string text;
  std::vector<double> token_logprobs;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double latency_s = 0.0;
  bool operator==(const Completion&) const = default;
};

// What a scripted rule does with the arithmetic problem in the prompt.
enum class MockBehavior {
  Fixed,  // emit `text` as is
  Solve,  // substitute the correct value of the first `backtick` expression for {answer}
  Wrong,  // substitute a deliberately wrong value
};

struct MockRule {
  std::string match;                   // substring of the prompt; empty matches everything
  std::string text;                    // response template; {answer} and {expr} placeholders
  std::vector<double> logprobs{-0.1};  // per-token values, cycled over the response
  MockBehavior behavior = MockBehavior::Fixed;
  double error_rate = 0.0;             // seeded chance that Solve answers wrongly
};

// Rules are tried in declaration order; the default fires when none matches.
struct MockScript {
  std::vector<MockRule> rules;
  MockRule fallback{"", "I cannot help with that.", {-2.0}, MockBehavior::Fixed, 0.0};
};

struct RetryPolicy {
  int attempts = 3;
  double initial_backoff_s = 0.5;
};

struct RemoteBackendSettings {
  std::string base_url;
  std::string api_key_env;
  std::string model;  // provider-side model name
  double timeout_s = 60.0;
  int max_in_flight = 4;
  RetryPolicy retry;
};

struct BackendSpec {
  enum class Kind { Mock, Remote };
  ModelId model;
  Kind kind = Kind::Mock;
  PriceEntry price;
  std::shared_ptr<const MockScript> script;
  std::string script_name;
  double latency_per_token = 0.0;
  RemoteBackendSettings remote;
};

class Backend {
 public:
  explicit Backend(BackendSpec spec) : spec_(std::move(spec)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  // Counts the call, then delegates to do_generate.
  Completion generate(const GenerationRequest& req);

  [[nodiscard]] std::uint64_t count_calls() const noexcept { return calls_.load(); }
  void reset_calls() noexcept { calls_.store(0); }
  [[nodiscard]] const BackendSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const ModelId& model() const noexcept { return spec_.model; }

 protected:
  virtual Completion do_generate(const GenerationRequest& req) = 0;

 private:
  BackendSpec spec_;
  std::atomic<std::uint64_t> calls_{0};
};

class MockBackend final : public Backend {
 public:
  explicit MockBackend(BackendSpec spec);

 protected:
  Completion do_generate(const GenerationRequest& req) override;
};

class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(BackendSpec spec);

 protected:
  Completion do_generate(const GenerationRequest& req) override;

 private:
  Completion attempt(const GenerationRequest& req);

  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

std::unique_ptr<Backend> make_backend(BackendSpec spec);

// Backends in registry order.
class BackendPool {
 public:
  BackendPool() = default;
  explicit BackendPool(std::vector<BackendSpec> specs);

  [[nodiscard]] Backend& at(const ModelId& model) const;
  [[nodiscard]] Backend& at(std::size_t index) const { return *backends_.at(index); }
  [[nodiscard]] std::size_t index_of(const ModelId& model) const;
  [[nodiscard]] const std::vector<ModelId>& ids() const noexcept { return ids_; }
  [[nodiscard]] std::size_t size() const noexcept { return backends_.size(); }
  [[nodiscard]] std::uint64_t total_calls() const;
  void reset_calls();

 private:
  std::vector<std::unique_ptr<Backend>> backends_;
  std::vector<ModelId> ids_;
};

// Whitespace token count used by mocks.
std::int64_t whitespace_tokens(std::string_view text);

// First `...` span in the text, if any.
std::optional<std::string> first_backtick_expression(std::string_view text);

}  // namespace maestro
