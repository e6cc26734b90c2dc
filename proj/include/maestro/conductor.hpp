#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maestro/backends.hpp"
#include "maestro/confidence.hpp"
#include "maestro/embedding.hpp"
#include "maestro/model_router.hpp"
#include "maestro/role_router.hpp"
#include "maestro/roles.hpp"
#include "maestro/state.hpp"

namespace maestro {

enum class RoutingMode { Greedy, Sample };

struct ConductorConfig {
  int max_turns = 4;
  double theta = 0.3;
  std::size_t char_budget = 4000;
  int max_tokens = 512;
  RoutingMode mode = RoutingMode::Greedy;
  std::uint64_t seed = 0;
  // Ablation: skip the model router and send every call to `large_backend`.
  bool disable_model_router = false;
  ModelId large_backend;
  VerifierHook verifier = arithmetic_verifier;

  void validate() const;
};

enum class Termination { EarlyStop, TurnLimit, Failed };
std::string_view to_string(Termination t);

// Everything the trainer needs to re-evaluate the episode's log-probabilities.
struct CallTrace {
  std::size_t role_index = 0;
  std::size_t model_index = 0;
  bool routed = true;  // false when the model router was bypassed
};

struct TurnTrace {
  Embedding c_emb;
  std::vector<std::size_t> selected;  // registry indices, selection order
  std::vector<CallTrace> calls;
};

struct EpisodeTrace {
  Embedding q_emb;
  std::vector<TurnTrace> turns;
};

struct EpisodeResult {
  Trajectory trajectory;
  std::string final_answer;
  Termination terminated_by = Termination::TurnLimit;
  EpisodeTrace trace;
};

struct TurnResult {
  TurnRecord record;
  std::optional<ReasoningState> next;  // empty when the episode terminates at this turn
  TurnTrace trace;
};

// Joint role/model routing loop. Holds references only; the caller keeps the
// embedder, registry and backends alive for the conductor's lifetime.
class Conductor {
 public:
  Conductor(const Embedder& embedder, const RoleRegistry& roles, BackendPool& backends, ConductorConfig config);

  TurnResult run_turn(const ReasoningState& state, const Embedding& q_emb, const RolePolicyParams& role_params,
                      const ModelPolicyParams& model_params, RunningStats& stats, Rng& sampler,
                      std::uint64_t generation_seed) const;

  // `episode_index` selects the episode's sampling and generation streams.
  EpisodeResult run_episode(const std::string& episode_id, const std::string& query,
                            const std::optional<std::string>& gold, const RolePolicyParams& role_params,
                            const ModelPolicyParams& model_params, RunningStats& stats,
                            std::uint64_t episode_index) const;

  [[nodiscard]] const ConductorConfig& config() const noexcept { return config_; }
  [[nodiscard]] const std::vector<Embedding>& role_embeddings() const noexcept { return role_embs_; }
  [[nodiscard]] const RoleRegistry& roles() const noexcept { return roles_; }
  [[nodiscard]] BackendPool& backends() const noexcept { return backends_; }
  [[nodiscard]] const Embedder& embedder() const noexcept { return embedder_; }

  Embedding embed_query(const std::string& query) const;
  Embedding embed_context(const ReasoningState& state) const;

 private:
  const Embedder& embedder_;
  const RoleRegistry& roles_;
  BackendPool& backends_;
  ConductorConfig config_;
  std::vector<Embedding> role_embs_;
  std::size_t large_index_ = 0;
  mutable EmbeddingCache cache_;
};

// Ensembler answer of the last working turn, else the last extracted answer.
std::string resolve_final_answer(const Trajectory& traj);

}  // namespace maestro
