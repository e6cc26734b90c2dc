#include "maestro/role_router.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maestro/errors.hpp"

namespace maestro {

namespace {

std::vector<double> concat(const Embedding& a, const Embedding& b) {
  std::vector<double> x;
  x.reserve(a.dim() + b.dim());
  x.insert(x.end(), a.values.begin(), a.values.end());
  x.insert(x.end(), b.values.begin(), b.values.end());
  return x;
}

void check_dims(const Embedding& q, const Embedding& c, std::span<const Embedding> roles, const RolePolicyParams& p) {
  const std::size_t d = p.embed_dim();
  if (q.dim() != d || c.dim() != d) throw ConfigError("role router: state embedding dimension mismatch");
  if (p.w_state.cols() != 2 * d || p.w_role.rows() != p.w_state.rows()) {
    throw ConfigError("role router: parameter shapes are inconsistent");
  }
  for (const auto& r : roles) {
    if (r.dim() != d) throw ConfigError("role router: role embedding dimension mismatch");
  }
}

struct Forward {
  std::vector<double> x;                 // [q; c]
  std::vector<double> u;                 // W_state x
  std::vector<std::vector<double>> keys; // W_role e_i
  std::vector<double> scores;
};

Forward forward(const Embedding& q, const Embedding& c, std::span<const Embedding> roles, const RolePolicyParams& p) {
  check_dims(q, c, roles, p);
  Forward f;
  f.x = concat(q, c);
  f.u = p.w_state.apply(f.x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.latent_dim()));
  f.keys.reserve(roles.size());
  f.scores.reserve(roles.size());
  for (const auto& r : roles) {
    f.keys.push_back(p.w_role.apply(r.values));
    f.scores.push_back(dot(f.u, f.keys.back()) * scale);
  }
  return f;
}

}  // namespace

RolePolicyParams RolePolicyParams::zeros(std::size_t embed_dim, std::size_t latent_dim) {
  return {Matrix(latent_dim, 2 * embed_dim), Matrix(latent_dim, embed_dim)};
}

RolePolicyParams RolePolicyParams::init(std::size_t embed_dim, std::size_t latent_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  RolePolicyParams p;
  p.w_state = Matrix::uniform(latent_dim, 2 * embed_dim, bound, rng);
  p.w_role = Matrix::uniform(latent_dim, embed_dim, bound, rng);
  return p;
}

std::vector<double> role_scores(const Embedding& q_emb, const Embedding& c_emb,
                                std::span<const Embedding> role_embs, const RolePolicyParams& params) {
  return forward(q_emb, c_emb, role_embs, params).scores;
}

RoleDistribution role_distribution(const Embedding& q_emb, const Embedding& c_emb,
                                   std::span<const Embedding> role_embs, std::span<const RoleId> role_ids,
                                   const RolePolicyParams& params) {
  if (role_embs.size() != role_ids.size()) throw ConfigError("role router: ids and embeddings differ in length");
  if (role_embs.empty()) throw ConfigError("role router: empty role registry");
  RoleDistribution dist;
  dist.roles.assign(role_ids.begin(), role_ids.end());
  dist.probs = softmax(role_scores(q_emb, c_emb, role_embs, params));
  return dist;
}

RoleSelection select_roles(const RoleDistribution& dist, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw ContractError("theta must lie in (0, 1]");
  if (dist.probs.empty() || dist.probs.size() != dist.roles.size()) throw ContractError("invalid role distribution");

  std::vector<std::size_t> order(dist.probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist.probs[a] > dist.probs[b]; });

  // Mass that falls short of theta only by rounding still counts as reaching it.
  constexpr double kSlack = 1e-12;
  RoleSelection sel;
  double mass = 0.0;
  for (std::size_t idx : order) {
    sel.indices.push_back(idx);
    sel.selected.push_back(dist.roles[idx]);
    sel.probs.push_back(dist.probs[idx]);
    sel.selection_logprob += std::log(dist.probs[idx]);
    if (dist.roles[idx] == kEarlyStop) sel.early_stop = true;
    mass += dist.probs[idx];
    if (mass >= theta - kSlack) break;
  }
  return sel;
}

RolePolicyParams grad_role_logprob(const Embedding& q_emb, const Embedding& c_emb,
                                   std::span<const Embedding> role_embs, const RolePolicyParams& params,
                                   std::span<const std::size_t> selected) {
  const Forward f = forward(q_emb, c_emb, role_embs, params);
  const std::vector<double> p = softmax(f.scores);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.latent_dim()));

  // d/ds_j sum_{i in S} log p_i = 1[j in S] - |S| p_j
  std::vector<double> g(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) g[j] = -static_cast<double>(selected.size()) * p[j];
  for (std::size_t i : selected) g.at(i) += 1.0;

  RolePolicyParams grad = RolePolicyParams::zeros(params.embed_dim(), params.latent_dim());
  std::vector<double> grad_u(params.latent_dim(), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (g[j] == 0.0) continue;
    for (std::size_t k = 0; k < grad_u.size(); ++k) grad_u[k] += g[j] * scale * f.keys[j][k];
    // d s_j / d W_role = scale * u e_j^T
    grad.w_role.add_outer(f.u, role_embs[j].values, g[j] * scale);
  }
  grad.w_state.add_outer(grad_u, f.x, 1.0);
  return grad;
}

double role_selection_logprob(const Embedding& q_emb, const Embedding& c_emb,
                              std::span<const Embedding> role_embs, const RolePolicyParams& params,
                              std::span<const std::size_t> selected) {
  const auto lp_all = log_softmax(role_scores(q_emb, c_emb, role_embs, params));
  double lp = 0.0;
  for (std::size_t i : selected) lp += lp_all.at(i);
  return lp;
}

}  // namespace maestro
