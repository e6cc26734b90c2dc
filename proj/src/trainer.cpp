#include "maestro/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "maestro/errors.hpp"

namespace maestro {

void TrainingConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw ConfigError("baseline_decay must lie in [0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
}

EpisodeLoss penalized_return(const Trajectory& traj, int reward, const TrainingConfig& cfg) {
  if (reward != 0 && reward != 1) throw ContractError("reward must be 0 or 1");
  EpisodeLoss loss;
  loss.reward = reward;
  double weighted = 0.0;
  for (const auto& turn : traj.turns) {
    loss.trajectory_logprob += turn.selection_logprob;
    for (const auto& c : turn.calls) {
      loss.trajectory_logprob += c.model_logprob;
      weighted += (cfg.disable_conf_weight ? 1.0 : c.conf_adj) * c.cost;
    }
  }
  loss.penalty = cfg.disable_cost_term ? 0.0 : cfg.lambda * weighted;
  loss.penalized_return = static_cast<double>(reward) - loss.penalty;
  return loss;
}

PolicyParams zeros_like(const PolicyParams& p) {
  return {RolePolicyParams::zeros(p.role.embed_dim(), p.role.latent_dim()),
          ModelPolicyParams::zeros(p.model.embed_dim(), p.model.latent_dim(), p.model.n_models())};
}

double squared_norm(const PolicyParams& p) {
  return squared_norm(p.role.w_state.data()) + squared_norm(p.role.w_role.data()) +
         squared_norm(p.model.w_ctx.data()) + squared_norm(p.model.table.data());
}

namespace {

void axpy(Matrix& y, const Matrix& x, double a) {
  if (!y.same_shape(x)) throw ContractError("parameter shape mismatch");
  auto yd = y.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += a * xd[i];
}

void axpy(PolicyParams& y, const PolicyParams& x, double a) {
  axpy(y.role.w_state, x.role.w_state, a);
  axpy(y.role.w_role, x.role.w_role, a);
  axpy(y.model.w_ctx, x.model.w_ctx, a);
  axpy(y.model.table, x.model.table, a);
}

}  // namespace

double trajectory_logprob(const EpisodeTrace& trace, std::span<const Embedding> role_embs,
                          const PolicyParams& params) {
  double lp = 0.0;
  for (const auto& turn : trace.turns) {
    lp += role_selection_logprob(trace.q_emb, turn.c_emb, role_embs, params.role, turn.selected);
    for (const auto& call : turn.calls) {
      if (!call.routed) continue;
      lp += model_choice_logprob(trace.q_emb, turn.c_emb, role_embs[call.role_index], params.model,
                                 call.model_index);
    }
  }
  return lp;
}

PolicyParams grad_trajectory_logprob(const EpisodeTrace& trace, std::span<const Embedding> role_embs,
                                     const PolicyParams& params) {
  PolicyParams g = zeros_like(params);
  for (const auto& turn : trace.turns) {
    const auto gr = grad_role_logprob(trace.q_emb, turn.c_emb, role_embs, params.role, turn.selected);
    axpy(g.role.w_state, gr.w_state, 1.0);
    axpy(g.role.w_role, gr.w_role, 1.0);
    for (const auto& call : turn.calls) {
      if (!call.routed) continue;
      const auto gm = grad_model_logprob(trace.q_emb, turn.c_emb, role_embs[call.role_index], params.model,
                                         call.model_index);
      axpy(g.model.w_ctx, gm.w_ctx, 1.0);
      axpy(g.model.table, gm.table, 1.0);
    }
  }
  return g;
}

PolicyParams policy_gradient(std::span<const BatchItem> batch, std::span<const Embedding> role_embs,
                             const PolicyParams& params, Baseline& baseline, const TrainingConfig& cfg) {
  if (batch.empty()) throw ContractError("policy_gradient needs a non-empty batch");
  double mean = 0.0;
  for (const auto& item : batch) mean += item.penalized_return;
  mean /= static_cast<double>(batch.size());
  const double b = baseline.value.value_or(mean);

  PolicyParams grad = zeros_like(params);
  const double scale = -1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    const double advantage = item.penalized_return - b;
    if (advantage == 0.0) continue;
    axpy(grad, grad_trajectory_logprob(*item.trace, role_embs, params), scale * advantage);
  }
  baseline.value = cfg.baseline_decay * b + (1.0 - cfg.baseline_decay) * mean;
  return grad;
}

PolicyParams sgd_update(const PolicyParams& params, const PolicyParams& grads, double lr, double clip_norm) {
  if (!params.role.same_shape(grads.role) || !params.model.same_shape(grads.model)) {
    throw ContractError("gradient shape does not match the parameters");
  }
  const double norm = std::sqrt(squared_norm(grads));
  const double factor = norm > clip_norm ? clip_norm / norm : 1.0;
  PolicyParams next = params;
  axpy(next, grads, -lr * factor);
  return next;
}

std::string format_curve(std::span<const CurvePoint> curve) {
  std::string out = "batch\tmean_return\taccuracy\tmean_cost\tmean_turns\tmean_call_price\n";
  char buf[256];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%llu\t%.6f\t%.4f\t%.8f\t%.3f\t%.4f\n", static_cast<unsigned long long>(p.batch),
                  p.mean_return, p.accuracy, p.mean_cost, p.mean_turns, p.mean_call_price);
    out += buf;
  }
  return out;
}

TrainerState initial_trainer_state(std::size_t embed_dim, std::size_t latent_dim, std::size_t n_models,
                                   std::uint64_t seed, ConfidenceParams conf) {
  Rng rng(derive_seed(seed, "init"));
  TrainerState s{{RolePolicyParams::init(embed_dim, latent_dim, rng),
                  ModelPolicyParams::init(embed_dim, latent_dim, n_models, rng)},
                 RunningStats(conf),
                 {},
                 0,
                 0};
  return s;
}

Trainer::Trainer(const Conductor& conductor, TrainingConfig cfg) : conductor_(conductor), cfg_(cfg) {
  cfg_.validate();
  if (conductor_.config().mode != RoutingMode::Sample) throw ConfigError("training requires sample-mode routing");
  if (conductor_.config().disable_model_router != cfg_.disable_model_router) {
    throw ConfigError("conductor and training config disagree on disable_model_router");
  }
}

const TaskRecord& Trainer::record_for(const Dataset& data, std::uint64_t episode) const {
  const std::uint64_t n = data.size();
  const std::uint64_t epoch = episode / n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(conductor_.config().seed, "shuffle", epoch));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return data[order[episode % n]];
}

CurvePoint Trainer::step(TrainerState& state, const Dataset& data) const {
  if (data.empty()) throw ContractError("training dataset is empty");
  std::vector<EpisodeResult> episodes;
  std::vector<EpisodeLoss> losses;
  episodes.reserve(cfg_.batch_size);

  CurvePoint point;
  point.batch = state.step;
  std::size_t calls = 0;
  double price_sum = 0.0;
  for (std::size_t k = 0; k < cfg_.batch_size; ++k) {
    const std::uint64_t ep = state.episodes_seen++;
    const TaskRecord& rec = record_for(data, ep);
    auto result = conductor_.run_episode(rec.id, rec.query, rec.gold, state.params.role, state.params.model,
                                         state.stats, ep);
    const int reward = result.trajectory.failed ? 0 : judge(result.final_answer, rec.gold);
    result.trajectory.reward = reward;
    losses.push_back(penalized_return(result.trajectory, reward, cfg_));
    point.mean_return += losses.back().penalized_return;
    point.accuracy += reward;
    point.mean_cost += result.trajectory.total_cost;
    point.mean_turns += static_cast<double>(result.trajectory.turns.size());
    for (const auto& turn : result.trajectory.turns) {
      for (const auto& c : turn.calls) {
        price_sum += conductor_.backends().at(c.model).spec().price.price_in;
        ++calls;
      }
    }
    episodes.push_back(std::move(result));
  }
  const double n = static_cast<double>(cfg_.batch_size);
  point.mean_return /= n;
  point.accuracy /= n;
  point.mean_cost /= n;
  point.mean_turns /= n;
  point.mean_call_price = calls ? price_sum / static_cast<double>(calls) : 0.0;

  // Failed episodes stay out of the gradient.
  std::vector<BatchItem> batch;
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    if (!episodes[k].trajectory.failed) batch.push_back({&episodes[k].trace, losses[k].penalized_return});
  }
  if (!batch.empty()) {
    const auto grads = policy_gradient(batch, conductor_.role_embeddings(), state.params, state.baseline, cfg_);
    state.params = sgd_update(state.params, grads, cfg_.lr, cfg_.clip_norm);
  }
  ++state.step;
  return point;
}

std::vector<CurvePoint> Trainer::train(TrainerState& state, const Dataset& data,
                                       const std::function<void(int, const TrainerState&)>& on_epoch) const {
  validate_dataset(data);
  std::uint64_t budget = static_cast<std::uint64_t>(cfg_.epochs) * data.size();
  if (cfg_.max_episodes > 0) budget = std::min<std::uint64_t>(budget, cfg_.max_episodes);
  std::vector<CurvePoint> curve;
  int epoch_reported = static_cast<int>(state.episodes_seen / data.size());
  while (state.episodes_seen + cfg_.batch_size <= budget) {
    curve.push_back(step(state, data));
    const int epoch_now = static_cast<int>(state.episodes_seen / data.size());
    while (epoch_reported < epoch_now) {
      if (on_epoch) on_epoch(epoch_reported, state);
      ++epoch_reported;
    }
  }
  return curve;
}

}  // namespace maestro
