#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maestro/conductor.hpp"
#include "maestro/confidence.hpp"
#include "maestro/harness.hpp"
#include "maestro/model_router.hpp"
#include "maestro/role_router.hpp"

namespace maestro {

struct TrainingConfig {
  double lambda = 200.0;
  double lr = 0.01;
  std::size_t batch_size = 16;
  double baseline_decay = 0.9;
  int epochs = 1;
  std::size_t max_episodes = 0;  // 0: no cap beyond epochs
  double clip_norm = 10.0;
  bool disable_model_router = false;
  bool disable_cost_term = false;
  bool disable_conf_weight = false;

  void validate() const;
};

struct EpisodeLoss {
  int reward = 0;
  double penalty = 0.0;
  double penalized_return = 0.0;
  double trajectory_logprob = 0.0;
};

// reward - lambda * sum_calls conf_adj * cost, with the ablation substitutions.
EpisodeLoss penalized_return(const Trajectory& traj, int reward, const TrainingConfig& cfg);

struct PolicyParams {
  RolePolicyParams role;
  ModelPolicyParams model;
  bool operator==(const PolicyParams&) const = default;
};

PolicyParams zeros_like(const PolicyParams& p);
double squared_norm(const PolicyParams& p);

// Sum of every logged selection and routed model-choice log-probability.
double trajectory_logprob(const EpisodeTrace& trace, std::span<const Embedding> role_embs,
                          const PolicyParams& params);

// Gradient of trajectory_logprob.
PolicyParams grad_trajectory_logprob(const EpisodeTrace& trace, std::span<const Embedding> role_embs,
                                     const PolicyParams& params);

// Moving-average reward baseline. Unset until the first batch, which seeds it with
// that batch's mean return.
struct Baseline {
  std::optional<double> value;
};

struct BatchItem {
  const EpisodeTrace* trace = nullptr;
  double penalized_return = 0.0;
};

// REINFORCE: -(1/|B|) sum_e (R_e - b) grad log pi_e; then b <- decay b + (1 - decay) mean R.
PolicyParams policy_gradient(std::span<const BatchItem> batch, std::span<const Embedding> role_embs,
                             const PolicyParams& params, Baseline& baseline, const TrainingConfig& cfg);

// params - lr * clip(grads, clip_norm). Returns a new snapshot.
PolicyParams sgd_update(const PolicyParams& params, const PolicyParams& grads, double lr, double clip_norm = 10.0);

struct CurvePoint {
  std::uint64_t batch = 0;
  double mean_return = 0.0;
  double accuracy = 0.0;
  double mean_cost = 0.0;
  double mean_turns = 0.0;
  double mean_call_price = 0.0;  // mean input price of the chosen backends, per call
};

std::string format_curve(std::span<const CurvePoint> curve);

struct TrainerState {
  PolicyParams params;
  RunningStats stats;
  Baseline baseline;
  std::uint64_t step = 0;           // completed updates
  std::uint64_t episodes_seen = 0;  // drives data order and per-episode seeds
};

// Fresh state with seeded parameter initialization.
TrainerState initial_trainer_state(std::size_t embed_dim, std::size_t latent_dim, std::size_t n_models,
                                   std::uint64_t seed, ConfidenceParams conf = {});

class Trainer {
 public:
  // `conductor` must be configured for sample mode; its seed drives data order too.
  Trainer(const Conductor& conductor, TrainingConfig cfg);

  // One update on the next batch_size episodes of the (epoch-shuffled) dataset.
  CurvePoint step(TrainerState& state, const Dataset& data) const;

  // Runs until epochs (or max_episodes) are exhausted. `on_epoch` fires after each epoch.
  std::vector<CurvePoint> train(TrainerState& state, const Dataset& data,
                                const std::function<void(int epoch, const TrainerState&)>& on_epoch = {}) const;

  [[nodiscard]] const TrainingConfig& config() const noexcept { return cfg_; }

 private:
  const TaskRecord& record_for(const Dataset& data, std::uint64_t episode) const;

  const Conductor& conductor_;
  TrainingConfig cfg_;
};

}  // namespace maestro
