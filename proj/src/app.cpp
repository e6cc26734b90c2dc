#include "maestro/app.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "maestro/errors.hpp"

namespace maestro {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Rejects keys outside `allowed` so typos fail loudly instead of silently defaulting.
void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

MockBehavior behavior_from(const std::string& s, std::string_view where) {
  if (s == "fixed") return MockBehavior::Fixed;
  if (s == "solve") return MockBehavior::Solve;
  if (s == "wrong") return MockBehavior::Wrong;
  throw ConfigError(std::string(where) + ": unknown behavior \"" + s + "\"");
}

MockRule parse_rule(const json& j, const std::string& where, MockRule rule) {
  check_keys(j, where, {"match", "text", "logprobs", "behavior", "error_rate"});
  read(j, "match", rule.match, where);
  read(j, "text", rule.text, where);
  read(j, "logprobs", rule.logprobs, where);
  std::string behavior = "fixed";
  read(j, "behavior", behavior, where);
  rule.behavior = behavior_from(behavior, where);
  read(j, "error_rate", rule.error_rate, where);
  if (rule.logprobs.empty()) throw ConfigError(where + ": logprobs must not be empty");
  for (double v : rule.logprobs) {
    if (!(v <= 0.0)) throw ConfigError(where + ": logprobs must be <= 0");
  }
  if (!(rule.error_rate >= 0.0 && rule.error_rate <= 1.0)) throw ConfigError(where + ": error_rate must lie in [0, 1]");
  return rule;
}

std::shared_ptr<const MockScript> parse_script(const json& j, const std::string& where) {
  check_keys(j, where, {"rules", "fallback"});
  auto script = std::make_shared<MockScript>();
  if (const auto it = j.find("rules"); it != j.end()) {
    if (!it->is_array()) throw ConfigError(where + ".rules: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      script->rules.push_back(parse_rule((*it)[i], where + ".rules[" + std::to_string(i) + "]", MockRule{}));
    }
  }
  if (const auto it = j.find("fallback"); it != j.end()) {
    script->fallback = parse_rule(*it, where + ".fallback", script->fallback);
  }
  return script;
}

PriceTable parse_prices(const json& j) {
  check_keys(j, "prices", {"base", "fit_known", "fit_reference", "entries"});
  const PriceTable def = PriceTable::defaults();
  std::string base = def.base().name;
  std::string known = def.fit_known().name;
  std::string reference = def.fit_reference().name;
  read(j, "base", base, "prices");
  read(j, "fit_known", known, "prices");
  read(j, "fit_reference", reference, "prices");
  std::vector<PriceEntry> entries;
  if (const auto it = j.find("entries"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("prices.entries: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& e = (*it)[i];
      const std::string where = "prices.entries[" + std::to_string(i) + "]";
      check_keys(e, where, {"model", "price_in", "price_out", "params_b"});
      PriceEntry p;
      std::string model;
      read(e, "model", model, where);
      if (model.empty()) throw ConfigError(where + ": model is required");
      p.model = ModelId{model};
      p.price_in = -1.0;
      read(e, "price_in", p.price_in, where);
      p.price_out = p.price_in;
      read(e, "price_out", p.price_out, where);
      if (e.contains("params_b")) {
        double b = 0.0;
        read(e, "params_b", b, where);
        p.params_b = b;
      }
      entries.push_back(std::move(p));
    }
  } else {
    for (const auto& id : def.order()) {
      PriceEntry p = def.at(id);
      if (p.extrapolated) p.price_in = p.price_out = -1.0;
      entries.push_back(std::move(p));
    }
  }
  return PriceTable(std::move(entries), ModelId{base}, ModelId{known}, ModelId{reference});
}

RoutingMode mode_from(const std::string& s) {
  if (s == "greedy") return RoutingMode::Greedy;
  if (s == "sample") return RoutingMode::Sample;
  throw ConfigError("conductor.mode: expected \"greedy\" or \"sample\", got \"" + s + "\"");
}

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  check_keys(root, source,
             {"seed", "embedder", "latent_dim", "confidence", "prices", "scripts", "backends", "roles", "conductor",
              "training", "paths", "split"});

  RunConfig cfg;
  read(root, "seed", cfg.seed, "seed");
  read(root, "latent_dim", cfg.latent_dim, "latent_dim");
  if (cfg.latent_dim < 1) throw ConfigError("latent_dim must be positive");

  if (const auto it = root.find("embedder"); it != root.end()) {
    check_keys(*it, "embedder", {"kind", "dim", "base_url", "model", "api_key_env", "timeout_s"});
    std::string kind = "hash";
    read(*it, "kind", kind, "embedder");
    if (kind == "hash") {
      cfg.embedder.kind = EmbedderConfig::Kind::Hash;
    } else if (kind == "remote") {
      cfg.embedder.kind = EmbedderConfig::Kind::Remote;
    } else {
      throw ConfigError("embedder.kind: expected \"hash\" or \"remote\"");
    }
    read(*it, "dim", cfg.embedder.dim, "embedder");
    read(*it, "base_url", cfg.embedder.remote.base_url, "embedder");
    read(*it, "model", cfg.embedder.remote.model, "embedder");
    read(*it, "api_key_env", cfg.embedder.remote.api_key_env, "embedder");
    read(*it, "timeout_s", cfg.embedder.remote.timeout_s, "embedder");
    if (cfg.embedder.kind == EmbedderConfig::Kind::Hash && cfg.embedder.dim < 16) {
      throw ConfigError("embedder.dim must be at least 16");
    }
    if (cfg.embedder.kind == EmbedderConfig::Kind::Remote && cfg.embedder.remote.base_url.empty()) {
      throw ConfigError("embedder.base_url is required for the remote kind");
    }
  }

  if (const auto it = root.find("confidence"); it != root.end()) {
    check_keys(*it, "confidence", {"window", "warmup", "low_percentile", "high_percentile"});
    read(*it, "window", cfg.confidence.window, "confidence");
    read(*it, "warmup", cfg.confidence.warmup, "confidence");
    read(*it, "low_percentile", cfg.confidence.low_percentile, "confidence");
    read(*it, "high_percentile", cfg.confidence.high_percentile, "confidence");
    if (cfg.confidence.window < 1 || cfg.confidence.warmup < 1) throw ConfigError("confidence window and warmup must be positive");
    if (!(cfg.confidence.low_percentile >= 0.0 && cfg.confidence.low_percentile < cfg.confidence.high_percentile &&
          cfg.confidence.high_percentile <= 100.0)) {
      throw ConfigError("confidence percentiles must satisfy 0 <= low < high <= 100");
    }
  }

  if (const auto it = root.find("prices"); it != root.end()) cfg.prices = parse_prices(*it);

  std::map<std::string, std::shared_ptr<const MockScript>> scripts;
  if (const auto it = root.find("scripts"); it != root.end()) {
    if (!it->is_object()) throw ConfigError("scripts: expected an object of named scripts");
    for (const auto& [name, body] : it->items()) scripts[name] = parse_script(body, "scripts." + name);
  }

  if (const auto it = root.find("backends"); it != root.end()) {
    if (!it->is_array()) throw ConfigError("backends: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& b = (*it)[i];
      const std::string where = "backends[" + std::to_string(i) + "]";
      check_keys(b, where,
                 {"model", "kind", "price", "script", "latency_per_token", "base_url", "api_key_env", "provider_model",
                  "timeout_s", "max_in_flight", "retry_attempts", "retry_backoff_s"});
      BackendSpec spec;
      std::string model;
      read(b, "model", model, where);
      if (model.empty()) throw ConfigError(where + ": model is required");
      spec.model = ModelId{model};
      std::string kind = "mock";
      read(b, "kind", kind, where);
      std::string price = model;
      read(b, "price", price, where);
      if (!cfg.prices.contains(ModelId{price})) {
        throw ConfigError(where + ": references undefined price entry \"" + price + "\"");
      }
      spec.price = cfg.prices.at(ModelId{price});
      spec.price.model = spec.model;
      read(b, "latency_per_token", spec.latency_per_token, where);
      if (kind == "mock") {
        spec.kind = BackendSpec::Kind::Mock;
        read(b, "script", spec.script_name, where);
        if (spec.script_name.empty()) throw ConfigError(where + ": mock backend needs a script");
        const auto s = scripts.find(spec.script_name);
        if (s == scripts.end()) throw ConfigError(where + ": undefined script \"" + spec.script_name + "\"");
        spec.script = s->second;
      } else if (kind == "remote") {
        spec.kind = BackendSpec::Kind::Remote;
        read(b, "base_url", spec.remote.base_url, where);
        read(b, "api_key_env", spec.remote.api_key_env, where);
        spec.remote.model = model;
        read(b, "provider_model", spec.remote.model, where);
        read(b, "timeout_s", spec.remote.timeout_s, where);
        read(b, "max_in_flight", spec.remote.max_in_flight, where);
        read(b, "retry_attempts", spec.remote.retry.attempts, where);
        read(b, "retry_backoff_s", spec.remote.retry.initial_backoff_s, where);
        if (spec.remote.base_url.empty()) throw ConfigError(where + ": remote backend needs base_url");
        if (spec.remote.max_in_flight < 1 || spec.remote.retry.attempts < 1) {
          throw ConfigError(where + ": max_in_flight and retry_attempts must be positive");
        }
      } else {
        throw ConfigError(where + ": kind must be \"mock\" or \"remote\"");
      }
      for (const auto& prev : cfg.backends) {
        if (prev.model == spec.model) throw ConfigError(where + ": duplicate backend " + model);
      }
      cfg.backends.push_back(std::move(spec));
    }
  }
  if (cfg.backends.empty()) throw ConfigError("backends: at least one backend is required");

  if (const auto it = root.find("roles"); it != root.end()) {
    if (!it->is_array()) throw ConfigError("roles: expected an array");
    cfg.roles.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& r = (*it)[i];
      const std::string where = "roles[" + std::to_string(i) + "]";
      check_keys(r, where, {"id", "description", "template", "kind"});
      RoleSpec spec;
      std::string id;
      std::string kind = "generate";
      read(r, "id", id, where);
      read(r, "description", spec.description, where);
      read(r, "template", spec.templ, where);
      read(r, "kind", kind, where);
      spec.id = RoleId{id};
      spec.kind = role_kind_from_string(kind);
      cfg.roles.push_back(std::move(spec));
    }
  }
  RoleRegistry{cfg.roles};

  std::string large;
  if (const auto it = root.find("conductor"); it != root.end()) {
    check_keys(*it, "conductor", {"max_turns", "theta", "char_budget", "max_tokens", "mode", "large_backend"});
    read(*it, "max_turns", cfg.conductor.max_turns, "conductor");
    read(*it, "theta", cfg.conductor.theta, "conductor");
    read(*it, "char_budget", cfg.conductor.char_budget, "conductor");
    read(*it, "max_tokens", cfg.conductor.max_tokens, "conductor");
    std::string mode = "greedy";
    read(*it, "mode", mode, "conductor");
    cfg.conductor.mode = mode_from(mode);
    read(*it, "large_backend", large, "conductor");
  }
  if (large.empty()) {
    // Default: the most expensive backend.
    const auto top = std::max_element(cfg.backends.begin(), cfg.backends.end(), [](const auto& a, const auto& b) {
      return a.price.price_in < b.price.price_in;
    });
    large = top->model.name;
  } else if (std::none_of(cfg.backends.begin(), cfg.backends.end(),
                          [&](const auto& b) { return b.model.name == large; })) {
    throw ConfigError("conductor.large_backend: no backend named \"" + large + "\"");
  }
  cfg.conductor.large_backend = ModelId{large};
  cfg.conductor.seed = cfg.seed;

  if (const auto it = root.find("training"); it != root.end()) {
    check_keys(*it, "training",
               {"lambda", "lr", "batch_size", "baseline_decay", "epochs", "max_episodes", "clip_norm",
                "disable_model_router", "disable_cost_term", "disable_conf_weight"});
    auto& t = cfg.training;
    read(*it, "lambda", t.lambda, "training");
    read(*it, "lr", t.lr, "training");
    read(*it, "batch_size", t.batch_size, "training");
    read(*it, "baseline_decay", t.baseline_decay, "training");
    read(*it, "epochs", t.epochs, "training");
    read(*it, "max_episodes", t.max_episodes, "training");
    read(*it, "clip_norm", t.clip_norm, "training");
    read(*it, "disable_model_router", t.disable_model_router, "training");
    read(*it, "disable_cost_term", t.disable_cost_term, "training");
    read(*it, "disable_conf_weight", t.disable_conf_weight, "training");
  }
  cfg.conductor.disable_model_router = cfg.training.disable_model_router;

  if (const auto it = root.find("paths"); it != root.end()) {
    check_keys(*it, "paths", {"log_dir", "checkpoint_dir", "dataset"});
    read(*it, "log_dir", cfg.paths.log_dir, "paths");
    read(*it, "checkpoint_dir", cfg.paths.checkpoint_dir, "paths");
    read(*it, "dataset", cfg.paths.dataset, "paths");
  }
  if (const auto it = root.find("split"); it != root.end()) {
    check_keys(*it, "split", {"train", "test", "seed"});
    read(*it, "train", cfg.split_train, "split");
    read(*it, "test", cfg.split_test, "split");
    if (it->contains("seed")) {
      std::uint64_t v = 0;
      read(*it, "seed", v, "split");
      cfg.split_seed = v;
    }
    if (cfg.split_train < 0 || cfg.split_test < 0 || cfg.split_train + cfg.split_test == 0) {
      throw ConfigError("split: parts must be non-negative with a positive total");
    }
  }

  cfg.conductor.validate();
  cfg.training.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), path.string());
  // Relative dataset paths resolve against the config's directory.
  if (!cfg.paths.dataset.empty() && std::filesystem::path(cfg.paths.dataset).is_relative()) {
    const auto candidate = path.parent_path() / cfg.paths.dataset;
    if (std::filesystem::exists(candidate)) cfg.paths.dataset = candidate.string();
  }
  return cfg;
}

Runtime::Runtime(const RunConfig& cfg)
    : cfg_(cfg),
      embedder_(make_embedder(cfg.embedder)),
      roles_(cfg.roles),
      pool_(std::make_unique<BackendPool>(cfg.backends)) {}

std::unique_ptr<Conductor> Runtime::conductor(RoutingMode mode) const {
  ConductorConfig cc = cfg_.conductor;
  cc.mode = mode;
  return conductor(std::move(cc));
}

std::unique_ptr<Conductor> Runtime::conductor(ConductorConfig cc) const {
  return std::make_unique<Conductor>(*embedder_, roles_, *pool_, std::move(cc));
}

TrainerState Runtime::initial_state() const {
  return initial_trainer_state(embedder_->dim(), cfg_.latent_dim, pool_->size(), cfg_.seed, cfg_.confidence);
}

Checkpoint make_checkpoint(const TrainerState& state, std::uint64_t seed, const BackendPool& pool) {
  Checkpoint c;
  c.seed = seed;
  for (const auto& id : pool.ids()) c.models.push_back(id.name);
  c.params = state.params;
  c.stats = state.stats.all();
  c.baseline = state.baseline.value;
  c.step = state.step;
  c.episodes_seen = state.episodes_seen;
  return c;
}

TrainerState restore_state(const Checkpoint& ckpt, const ConfidenceParams& conf) {
  TrainerState s{ckpt.params, RunningStats(conf), Baseline{ckpt.baseline}, ckpt.step, ckpt.episodes_seen};
  s.stats.restore(ckpt.stats);
  return s;
}

namespace {

ordered_json matrix_json(const Matrix& m) {
  ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data().begin(), m.data().end());
  return j;
}

Matrix matrix_from(const json& j, const std::string& name) {
  try {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) {
      throw ConfigError("checkpoint " + name + ": shape header " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " does not match " + std::to_string(data.size()) + " values");
    }
    return Matrix(rows, cols, std::move(data));
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint " + name + ": " + e.what());
  }
}

}  // namespace

ordered_json checkpoint_json(const Checkpoint& c) {
  ordered_json j;
  j["format_version"] = c.format_version;
  j["seed"] = c.seed;
  j["step"] = c.step;
  j["episodes_seen"] = c.episodes_seen;
  j["baseline"] = c.baseline ? ordered_json(*c.baseline) : ordered_json(nullptr);
  j["models"] = c.models;
  j["role_params"] = {{"w_state", matrix_json(c.params.role.w_state)}, {"w_role", matrix_json(c.params.role.w_role)}};
  j["model_params"] = {{"w_ctx", matrix_json(c.params.model.w_ctx)}, {"table", matrix_json(c.params.model.table)}};
  ordered_json stats = ordered_json::object();
  for (const auto& [name, snap] : c.stats) stats[name] = {{"count", snap.count}, {"window", snap.window}};
  j["stats"] = std::move(stats);
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  try {
    c.format_version = j.at("format_version").get<int>();
  } catch (const json::exception&) {
    throw ConfigError("checkpoint has no format_version");
  }
  if (c.format_version != kCheckpointVersion) {
    throw ConfigError("checkpoint format_version " + std::to_string(c.format_version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.step = j.at("step").get<std::uint64_t>();
    c.episodes_seen = j.at("episodes_seen").get<std::uint64_t>();
    if (!j.at("baseline").is_null()) c.baseline = j.at("baseline").get<double>();
    c.models = j.at("models").get<std::vector<std::string>>();
    const auto& rp = j.at("role_params");
    const auto& mp = j.at("model_params");
    c.params.role.w_state = matrix_from(rp.at("w_state"), "role_params.w_state");
    c.params.role.w_role = matrix_from(rp.at("w_role"), "role_params.w_role");
    c.params.model.w_ctx = matrix_from(mp.at("w_ctx"), "model_params.w_ctx");
    c.params.model.table = matrix_from(mp.at("table"), "model_params.table");
    for (const auto& [name, s] : j.at("stats").items()) {
      c.stats[name] = {s.at("window").get<std::vector<double>>(), s.at("count").get<std::uint64_t>()};
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("corrupt checkpoint: ") + e.what());
  }
  const auto& r = c.params.role;
  const auto& m = c.params.model;
  const std::size_t d = r.w_role.cols();
  const std::size_t lat = r.w_role.rows();
  if (r.w_state.rows() != lat || r.w_state.cols() != 2 * d || m.w_ctx.rows() != lat || m.w_ctx.cols() != 3 * d ||
      m.table.cols() != lat || m.table.rows() != c.models.size()) {
    throw ConfigError("corrupt checkpoint: inconsistent parameter shapes");
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    out << checkpoint_json(ckpt).dump(1) << '\n';
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

void check_compatible(const Checkpoint& ckpt, const Runtime& rt) {
  std::vector<std::string> names;
  for (const auto& id : rt.backends().ids()) names.push_back(id.name);
  if (names != ckpt.models) throw ConfigError("checkpoint backends do not match the configured backends");
  if (ckpt.params.role.embed_dim() != rt.embedder().dim()) {
    throw ConfigError("checkpoint embedding dimension " + std::to_string(ckpt.params.role.embed_dim()) +
                      " does not match the embedder (" + std::to_string(rt.embedder().dim()) + ")");
  }
}

}  // namespace maestro
