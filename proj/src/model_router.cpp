#include "maestro/model_router.hpp"

#include <cmath>

#include "maestro/errors.hpp"

namespace maestro {

namespace {

struct Forward {
  std::vector<double> x;  // [q; c; r]
  std::vector<double> h;  // W_ctx x
  std::vector<double> scores;
};

Forward forward(const Embedding& q, const Embedding& c, const Embedding& r, const ModelPolicyParams& p) {
  const std::size_t d = p.embed_dim();
  if (p.w_ctx.cols() != 3 * d || p.table.cols() != p.latent_dim()) {
    throw ConfigError("model router: parameter shapes are inconsistent");
  }
  if (q.dim() != d || c.dim() != d || r.dim() != d) throw ConfigError("model router: embedding dimension mismatch");
  Forward f;
  f.x.reserve(3 * d);
  for (const Embedding* e : {&q, &c, &r}) f.x.insert(f.x.end(), e->values.begin(), e->values.end());
  f.h = p.w_ctx.apply(f.x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.latent_dim()));
  f.scores.resize(p.n_models());
  for (std::size_t j = 0; j < p.n_models(); ++j) f.scores[j] = dot(f.h, p.table.row(j)) * scale;
  return f;
}

}  // namespace

ModelPolicyParams ModelPolicyParams::zeros(std::size_t embed_dim, std::size_t latent_dim, std::size_t n_models) {
  return {Matrix(latent_dim, 3 * embed_dim), Matrix(n_models, latent_dim)};
}

ModelPolicyParams ModelPolicyParams::init(std::size_t embed_dim, std::size_t latent_dim, std::size_t n_models,
                                          Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  ModelPolicyParams p;
  p.w_ctx = Matrix::uniform(latent_dim, 3 * embed_dim, bound, rng);
  p.table = Matrix::uniform(n_models, latent_dim, bound, rng);
  return p;
}

std::vector<double> model_scores(const Embedding& q_emb, const Embedding& c_emb, const Embedding& role_emb,
                                 const ModelPolicyParams& params) {
  return forward(q_emb, c_emb, role_emb, params).scores;
}

ModelDistribution model_distribution(const Embedding& q_emb, const Embedding& c_emb, const Embedding& role_emb,
                                     std::span<const ModelId> model_ids, const ModelPolicyParams& params) {
  if (model_ids.size() != params.n_models()) throw ConfigError("model router: backend count does not match the table");
  if (model_ids.empty()) throw ConfigError("model router: empty backend pool");
  const auto scores = model_scores(q_emb, c_emb, role_emb, params);
  ModelDistribution dist;
  dist.models.assign(model_ids.begin(), model_ids.end());
  dist.probs = softmax(scores);
  dist.log_probs = log_softmax(scores);
  return dist;
}

ModelChoice choose_model(const ModelDistribution& dist, ChoiceMode mode) {
  if (dist.probs.empty() || dist.probs.size() != dist.models.size()) throw ContractError("invalid model distribution");
  std::size_t pick = 0;
  if (std::holds_alternative<Greedy>(mode)) {
    for (std::size_t j = 1; j < dist.probs.size(); ++j) {
      if (dist.probs[j] > dist.probs[pick]) pick = j;
    }
  } else {
    Rng& rng = *std::get<Sample>(mode).rng;
    const double u = rng.uniform();
    double cdf = 0.0;
    pick = dist.probs.size() - 1;
    for (std::size_t j = 0; j < dist.probs.size(); ++j) {
      cdf += dist.probs[j];
      if (u < cdf) {
        pick = j;
        break;
      }
    }
  }
  const double lp = dist.log_probs.size() == dist.probs.size() ? dist.log_probs[pick] : std::log(dist.probs[pick]);
  return {pick, dist.models[pick], dist.probs[pick], lp};
}

ModelPolicyParams grad_model_logprob(const Embedding& q_emb, const Embedding& c_emb, const Embedding& role_emb,
                                     const ModelPolicyParams& params, std::size_t chosen) {
  const Forward f = forward(q_emb, c_emb, role_emb, params);
  if (chosen >= f.scores.size()) throw ContractError("chosen backend index out of range");
  const std::vector<double> p = softmax(f.scores);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.latent_dim()));

  ModelPolicyParams grad = ModelPolicyParams::zeros(params.embed_dim(), params.latent_dim(), params.n_models());
  std::vector<double> grad_h(params.latent_dim(), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double g = (j == chosen ? 1.0 : 0.0) - p[j];
    if (g == 0.0) continue;
    auto vj = params.table.row(j);
    auto gj = grad.table.row(j);
    for (std::size_t k = 0; k < grad_h.size(); ++k) {
      grad_h[k] += g * scale * vj[k];
      gj[k] += g * scale * f.h[k];
    }
  }
  grad.w_ctx.add_outer(grad_h, f.x, 1.0);
  return grad;
}

double model_choice_logprob(const Embedding& q_emb, const Embedding& c_emb, const Embedding& role_emb,
                            const ModelPolicyParams& params, std::size_t chosen) {
  return log_softmax(model_scores(q_emb, c_emb, role_emb, params)).at(chosen);
}

}  // namespace maestro
