#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "maestro/embedding.hpp"
#include "maestro/matrix.hpp"
#include "maestro/state.hpp"

namespace maestro {

// Role network parameters. score_i = <W_state [q; c], W_role e_i> / sqrt(d_lat).
struct RolePolicyParams {
  Matrix w_state;  // d_lat x 2d
  Matrix w_role;   // d_lat x d

  static RolePolicyParams zeros(std::size_t embed_dim, std::size_t latent_dim);
  // Entries uniform in [-1/sqrt(d), 1/sqrt(d)].
  static RolePolicyParams init(std::size_t embed_dim, std::size_t latent_dim, Rng& rng);

  [[nodiscard]] std::size_t latent_dim() const noexcept { return w_state.rows(); }
  [[nodiscard]] std::size_t embed_dim() const noexcept { return w_role.cols(); }
  [[nodiscard]] bool same_shape(const RolePolicyParams& o) const noexcept {
    return w_state.same_shape(o.w_state) && w_role.same_shape(o.w_role);
  }
  bool operator==(const RolePolicyParams&) const = default;
};

struct RoleDistribution {
  std::vector<RoleId> roles;  // registry order
  std::vector<double> probs;
};

struct RoleSelection {
  std::vector<RoleId> selected;      // descending probability, ties by registry order
  std::vector<std::size_t> indices;  // registry indices of `selected`
  std::vector<double> probs;
  double selection_logprob = 0.0;
  bool early_stop = false;
};

// Raw scores in registry order; exposed for tests of shift invariance.
std::vector<double> role_scores(const Embedding& q_emb, const Embedding& c_emb,
                                std::span<const Embedding> role_embs, const RolePolicyParams& params);

RoleDistribution role_distribution(const Embedding& q_emb, const Embedding& c_emb,
                                   std::span<const Embedding> role_embs, std::span<const RoleId> role_ids,
                                   const RolePolicyParams& params);

// Minimal descending-probability prefix whose mass reaches theta.
RoleSelection select_roles(const RoleDistribution& dist, double theta);

// Gradient of sum_{i in selected} log p_i with respect to both parameter blocks.
RolePolicyParams grad_role_logprob(const Embedding& q_emb, const Embedding& c_emb,
                                   std::span<const Embedding> role_embs, const RolePolicyParams& params,
                                   std::span<const std::size_t> selected);

// Sum of log p over `selected` for the given parameters (the quantity differentiated above).
double role_selection_logprob(const Embedding& q_emb, const Embedding& c_emb,
                              std::span<const Embedding> role_embs, const RolePolicyParams& params,
                              std::span<const std::size_t> selected);

}  // namespace maestro
