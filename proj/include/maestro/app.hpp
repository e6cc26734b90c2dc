#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "maestro/backends.hpp"
#include "maestro/conductor.hpp"
#include "maestro/confidence.hpp"
#include "maestro/cost.hpp"
#include "maestro/embedding.hpp"
#include "maestro/roles.hpp"
#include "maestro/trainer.hpp"

namespace maestro {

struct PathsConfig {
  std::string log_dir = "runs/logs";
  std::string checkpoint_dir = "runs/checkpoints";
  std::string dataset;
};

struct RunConfig {
  std::uint64_t seed = 0;
  EmbedderConfig embedder;
  std::size_t latent_dim = 64;
  ConfidenceParams confidence;
  PriceTable prices = PriceTable::defaults();
  std::vector<BackendSpec> backends;
  std::vector<RoleSpec> roles = RoleRegistry::defaults().roles();
  ConductorConfig conductor;
  TrainingConfig training;
  PathsConfig paths;
  int split_train = 4;
  int split_test = 1;
  std::optional<std::uint64_t> split_seed;  // defaults to `seed`

  [[nodiscard]] std::uint64_t effective_split_seed() const noexcept { return split_seed.value_or(seed); }
};

// Parses, defaults and validates a JSON run configuration. Unknown keys are rejected;
// `source` prefixes diagnostics.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

// Every component the conductor borrows, owned in one place.
class Runtime {
 public:
  explicit Runtime(const RunConfig& cfg);
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  // A conductor over this runtime with the config's settings and the given mode.
  [[nodiscard]] std::unique_ptr<Conductor> conductor(RoutingMode mode) const;
  [[nodiscard]] std::unique_ptr<Conductor> conductor(ConductorConfig cc) const;

  [[nodiscard]] TrainerState initial_state() const;

  [[nodiscard]] const RunConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const Embedder& embedder() const noexcept { return *embedder_; }
  [[nodiscard]] const RoleRegistry& roles() const noexcept { return roles_; }
  [[nodiscard]] BackendPool& backends() const noexcept { return *pool_; }

 private:
  RunConfig cfg_;
  std::unique_ptr<Embedder> embedder_;
  RoleRegistry roles_;
  std::unique_ptr<BackendPool> pool_;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointVersion;
  std::uint64_t seed = 0;
  std::vector<std::string> models;  // backend order of the model table rows
  PolicyParams params;
  std::map<std::string, RunningStats::Snapshot> stats;
  std::optional<double> baseline;
  std::uint64_t step = 0;
  std::uint64_t episodes_seen = 0;
};

Checkpoint make_checkpoint(const TrainerState& state, std::uint64_t seed, const BackendPool& pool);
// Rebuilds a trainer state; stats use `conf` for window sizes.
TrainerState restore_state(const Checkpoint& ckpt, const ConfidenceParams& conf);

nlohmann::ordered_json checkpoint_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws ConfigError when the checkpoint does not fit the runtime (dimensions, backends).
void check_compatible(const Checkpoint& ckpt, const Runtime& rt);

}  // namespace maestro
