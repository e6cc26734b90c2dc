#include "maestro/backends.hpp"

#include <chrono>
#include <cctype>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "maestro/arith.hpp"
#include "maestro/errors.hpp"
#include "maestro/rng.hpp"

namespace maestro {

std::int64_t whitespace_tokens(std::string_view text) {
  std::int64_t n = 0;
  bool in_token = false;
  for (char c : text) {
    const bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!ws && !in_token) ++n;
    in_token = !ws;
  }
  return n;
}

std::optional<std::string> first_backtick_expression(std::string_view text) {
  const auto open = text.find('`');
  if (open == std::string_view::npos) return std::nullopt;
  const auto close = text.find('`', open + 1);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(text.substr(open + 1, close - open - 1));
}

Completion Backend::generate(const GenerationRequest& req) {
  if (req.prompt.empty()) throw ContractError("generation prompt is empty");
  calls_.fetch_add(1);
  return do_generate(req);
}

// ---------------------------------------------------------------------------
// Mock

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

// Keeps the text up to the end of its `limit`-th whitespace token.
std::string truncate_tokens(const std::string& text, std::int64_t limit) {
  std::int64_t n = 0;
  bool in_token = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const bool ws = std::isspace(static_cast<unsigned char>(text[i])) != 0;
    if (ws && in_token && n == limit) return text.substr(0, i);
    if (!ws && !in_token) ++n;
    in_token = !ws;
  }
  return text;
}

}  // namespace

MockBackend::MockBackend(BackendSpec spec) : Backend(std::move(spec)) {
  if (!this->spec().script) throw ConfigError("mock backend " + model().name + " has no script");
}

Completion MockBackend::do_generate(const GenerationRequest& req) {
  const MockScript& script = *spec().script;
  const MockRule* rule = &script.fallback;
  for (const auto& r : script.rules) {
    if (req.prompt.find(r.match) != std::string::npos) {
      rule = &r;
      break;
    }
  }

  std::string text = rule->text;
  if (rule->behavior != MockBehavior::Fixed) {
    bool wrong = rule->behavior == MockBehavior::Wrong;
    if (!wrong && rule->error_rate > 0.0) {
      Rng rng(derive_seed(req.seed, "mock-error", fnv1a64(req.prompt) ^ fnv1a64(model().name)));
      wrong = rng.uniform() < rule->error_rate;
    }
    const auto expr = first_backtick_expression(req.prompt);
    const auto value = expr ? evaluate_arithmetic(*expr) : std::nullopt;
    std::string answer = "unknown";
    if (value) answer = format_number(wrong ? *value + 1.0 : *value);
    replace_all(text, "{answer}", answer);
    replace_all(text, "{expr}", expr.value_or(""));
  }
  if (req.max_tokens > 0 && whitespace_tokens(text) > req.max_tokens) text = truncate_tokens(text, req.max_tokens);

  Completion c;
  c.tokens_in = whitespace_tokens(req.prompt);
  c.tokens_out = whitespace_tokens(text);
  c.text = std::move(text);
  c.token_logprobs.reserve(static_cast<std::size_t>(c.tokens_out));
  for (std::int64_t i = 0; i < c.tokens_out; ++i) {
    c.token_logprobs.push_back(rule->logprobs[static_cast<std::size_t>(i) % rule->logprobs.size()]);
  }
  c.latency_s = static_cast<double>(c.tokens_out) * spec().latency_per_token;
  return c;
}

// ---------------------------------------------------------------------------
// Remote

RemoteBackend::RemoteBackend(BackendSpec spec) : Backend(std::move(spec)) {
  const auto& r = this->spec().remote;
  if (r.base_url.empty()) throw ConfigError("remote backend " + model().name + " has no base_url");
  if (r.max_in_flight < 1) throw ConfigError("remote backend max_in_flight must be at least 1");
  if (r.retry.attempts < 1) throw ConfigError("remote backend needs at least one attempt");
}

Completion RemoteBackend::do_generate(const GenerationRequest& req) {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < spec().remote.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    RemoteBackend* self;
    ~Release() {
      {
        std::lock_guard lock(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};

  const auto& retry = spec().remote.retry;
  double backoff = retry.initial_backoff_s;
  for (int i = 1;; ++i) {
    try {
      return attempt(req);
    } catch (const BackendError& e) {
      if (!e.retriable() || i >= retry.attempts) {
        throw BackendError(model().name + ": " + e.what() + " (after " + std::to_string(i) + " attempts)",
                           e.retriable());
      }
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    backoff *= 2.0;
  }
}

Completion RemoteBackend::attempt(const GenerationRequest& req) {
  const auto& r = spec().remote;
  const auto url = detail::parse_base_url(r.base_url);
  auto headers = detail::auth_headers(r.api_key_env);
  if (!headers) throw BackendError("credential variable " + r.api_key_env + " is not set", true);

  nlohmann::json body = {
      {"model", r.model.empty() ? model().name : r.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
      {"temperature", req.temperature},
      {"max_tokens", req.max_tokens},
      {"logprobs", true},
      {"seed", req.seed},
  };

  auto client = detail::make_client(url.origin, r.timeout_s);
  const auto start = std::chrono::steady_clock::now();
  auto res = client->Post(url.path + "/chat/completions", *headers, body.dump(), "application/json");
  const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!res) throw BackendError("transport failure: " + httplib::to_string(res.error()), true);
  if (res->status == 401 || res->status == 403) throw BackendError("credentials rejected", true);
  if (res->status == 429 || res->status >= 500) {
    throw BackendError("HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body, false);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw BackendError(std::string("malformed response: ") + e.what(), true);
  }
  if (!j.contains("choices") || j["choices"].empty()) throw BackendError("response has no choices", false);
  const auto& choice = j["choices"][0];

  Completion c;
  c.text = choice.value("/message/content"_json_pointer, std::string{});
  const auto lp_ptr = "/logprobs/content"_json_pointer;
  if (!choice.contains(lp_ptr) || !choice[lp_ptr].is_array()) {
    throw ConfigError(model().name + ": provider response carries no token logprobs; enable logprobs on the endpoint");
  }
  for (const auto& tok : choice[lp_ptr]) {
    if (!tok.contains("logprob") || !tok["logprob"].is_number()) {
      throw ConfigError(model().name + ": token entry without a logprob");
    }
    c.token_logprobs.push_back(tok["logprob"].get<double>());
  }
  if (c.token_logprobs.empty()) throw BackendError("empty generation", true);

  // Output count follows the logprob sequence so tokens_out always matches it.
  c.tokens_out = static_cast<std::int64_t>(c.token_logprobs.size());
  c.tokens_in = j.value("/usage/prompt_tokens"_json_pointer, std::int64_t{0});
  c.latency_s = latency;
  return c;
}

std::unique_ptr<Backend> make_backend(BackendSpec spec) {
  switch (spec.kind) {
    case BackendSpec::Kind::Mock:
      return std::make_unique<MockBackend>(std::move(spec));
    case BackendSpec::Kind::Remote:
      return std::make_unique<RemoteBackend>(std::move(spec));
  }
  throw ConfigError("unknown backend kind");
}

BackendPool::BackendPool(std::vector<BackendSpec> specs) {
  for (auto& s : specs) {
    if (s.model.empty()) throw ConfigError("backend without a model id");
    for (const auto& id : ids_) {
      if (id == s.model) throw ConfigError("duplicate backend " + s.model.name);
    }
    ids_.push_back(s.model);
    backends_.push_back(make_backend(std::move(s)));
  }
}

std::size_t BackendPool::index_of(const ModelId& model) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == model) return i;
  }
  throw ConfigError("unknown backend '" + model.name + "'");
}

Backend& BackendPool::at(const ModelId& model) const { return *backends_[index_of(model)]; }

std::uint64_t BackendPool::total_calls() const {
  std::uint64_t n = 0;
  for (const auto& b : backends_) n += b->count_calls();
  return n;
}

void BackendPool::reset_calls() {
  for (auto& b : backends_) b->reset_calls();
}

}  // namespace maestro
