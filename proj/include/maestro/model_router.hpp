#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "maestro/embedding.hpp"
#include "maestro/matrix.hpp"
#include "maestro/rng.hpp"
#include "maestro/state.hpp"

namespace maestro {

// Model network parameters. score_j = <W_ctx [q; c; r], v_j> / sqrt(d_lat), with one
// learnable vector v_j per backend (rows of `table`, registry order).
struct ModelPolicyParams {
  Matrix w_ctx;  // d_lat x 3d
  Matrix table;  // |M| x d_lat

  static ModelPolicyParams zeros(std::size_t embed_dim, std::size_t latent_dim, std::size_t n_models);
  static ModelPolicyParams init(std::size_t embed_dim, std::size_t latent_dim, std::size_t n_models, Rng& rng);

  [[nodiscard]] std::size_t latent_dim() const noexcept { return w_ctx.rows(); }
  [[nodiscard]] std::size_t embed_dim() const noexcept { return w_ctx.cols() / 3; }
  [[nodiscard]] std::size_t n_models() const noexcept { return table.rows(); }
  [[nodiscard]] bool same_shape(const ModelPolicyParams& o) const noexcept {
    return w_ctx.same_shape(o.w_ctx) && table.same_shape(o.table);
  }
  bool operator==(const ModelPolicyParams&) const = default;
};

struct ModelDistribution {
  std::vector<ModelId> models;  // registry order
  std::vector<double> probs;
  std::vector<double> log_probs;
};

struct Greedy {};
struct Sample {
  Rng* rng;
};
using ChoiceMode = std::variant<Greedy, Sample>;

struct ModelChoice {
  std::size_t index = 0;
  ModelId model;
  double prob = 0.0;
  double logprob = 0.0;
};

std::vector<double> model_scores(const Embedding& q_emb, const Embedding& c_emb, const Embedding& role_emb,
                                 const ModelPolicyParams& params);

ModelDistribution model_distribution(const Embedding& q_emb, const Embedding& c_emb, const Embedding& role_emb,
                                     std::span<const ModelId> model_ids, const ModelPolicyParams& params);

// Greedy: argmax with ties to the earliest backend. Sample: inverse-CDF draw.
ModelChoice choose_model(const ModelDistribution& dist, ChoiceMode mode);

// Gradient of log p_chosen with respect to W_ctx and the model table.
ModelPolicyParams grad_model_logprob(const Embedding& q_emb, const Embedding& c_emb, const Embedding& role_emb,
                                     const ModelPolicyParams& params, std::size_t chosen);

double model_choice_logprob(const Embedding& q_emb, const Embedding& c_emb, const Embedding& role_emb,
                            const ModelPolicyParams& params, std::size_t chosen);

}  // namespace maestro
