#include "maestro/conductor.hpp"

#include "maestro/errors.hpp"

namespace maestro {

void ConductorConfig::validate() const {
  if (max_turns < 1) throw ConfigError("max_turns must be at least 1");
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
  if (char_budget < 64) throw ConfigError("char_budget must be at least 64");
  if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::EarlyStop: return "early_stop";
    case Termination::TurnLimit: return "turn_limit";
    case Termination::Failed: return "failed";
  }
  return "failed";
}

Conductor::Conductor(const Embedder& embedder, const RoleRegistry& roles, BackendPool& backends,
                     ConductorConfig config)
    : embedder_(embedder), roles_(roles), backends_(backends), config_(std::move(config)) {
  config_.validate();
  if (backends_.size() == 0) throw ConfigError("conductor needs at least one backend");
  if (config_.disable_model_router) {
    if (config_.large_backend.empty()) throw ConfigError("disable_model_router requires a large_backend");
    large_index_ = backends_.index_of(config_.large_backend);
  }
  std::vector<std::string> descriptions;
  for (const auto& r : roles_.roles()) descriptions.push_back(r.description);
  role_embs_ = embedder_.embed_batch(descriptions);
}

Embedding Conductor::embed_query(const std::string& query) const {
  return cache_.get_or_compute("q:" + sha256_hex(query), [&] { return embedder_.embed(query); });
}

Embedding Conductor::embed_context(const ReasoningState& state) const {
  return cache_.get_or_compute("c:" + state_digest(state),
                               [&] { return embedder_.embed(render_context(state, config_.char_budget)); });
}

TurnResult Conductor::run_turn(const ReasoningState& state, const Embedding& q_emb,
                               const RolePolicyParams& role_params, const ModelPolicyParams& model_params,
                               RunningStats& stats, Rng& sampler, std::uint64_t generation_seed) const {
  if (state.turn >= config_.max_turns) throw ContractError("run_turn called at the turn cap");

  TurnResult out;
  out.trace.c_emb = embed_context(state);
  const auto dist = role_distribution(q_emb, out.trace.c_emb, role_embs_, roles_.ids(), role_params);
  const auto sel = select_roles(dist, config_.theta);

  out.record.turn = state.turn;
  out.record.selection_logprob = sel.selection_logprob;
  for (std::size_t k = 0; k < sel.selected.size(); ++k) out.record.selected.push_back({sel.selected[k], sel.probs[k]});
  out.trace.selected = sel.indices;

  if (sel.early_stop) {
    out.record.early_stop = true;
    return out;
  }

  ExecutionOptions exec{config_.char_budget, config_.max_tokens, config_.verifier};
  std::vector<ContextEntry> entries;
  std::uint64_t call_no = 0;
  for (std::size_t role_idx : roles_.execution_order(sel.indices)) {
    const RoleSpec& spec = roles_.roles()[role_idx];

    CallTrace ct{role_idx, large_index_, false};
    double model_prob = 1.0;
    double model_logprob = 0.0;
    if (!config_.disable_model_router) {
      const auto mdist =
          model_distribution(q_emb, out.trace.c_emb, role_embs_[role_idx], backends_.ids(), model_params);
      const auto choice = config_.mode == RoutingMode::Greedy ? choose_model(mdist, Greedy{})
                                                              : choose_model(mdist, Sample{&sampler});
      ct = {role_idx, choice.index, true};
      model_prob = choice.prob;
      model_logprob = choice.logprob;
    }
    Backend& backend = backends_.at(ct.model_index);

    const auto ex = execute_role(spec, backend, state, mix64(generation_seed + call_no++), exec);

    CallRecord call;
    call.role = spec.id;
    call.model = backend.model();
    call.model_prob = model_prob;
    call.model_logprob = model_logprob;
    call.conf_base = conf_base(ex.completion.token_logprobs);
    call.conf_adj = conf_adj(call.conf_base, call.model, stats);
    stats.observe(call.model, call.conf_base);
    call.tokens_in = ex.cost.tokens_in;
    call.tokens_out = ex.cost.tokens_out;
    call.cost = ex.cost.usd;
    call.latency = ex.completion.latency_s;
    call.answer = ex.output.answer;
    out.record.calls.push_back(std::move(call));
    out.trace.calls.push_back(ct);

    entries.push_back(ContextEntry{state.turn, spec.id, backend.model(), ex.output.text});
  }
  out.next = state.advanced(std::move(entries));
  return out;
}

std::string resolve_final_answer(const Trajectory& traj) {
  for (auto it = traj.turns.rbegin(); it != traj.turns.rend(); ++it) {
    if (it->calls.empty()) continue;
    for (auto c = it->calls.rbegin(); c != it->calls.rend(); ++c) {
      if (c->role.name == "Ensembler" && c->answer) return *c->answer;
    }
    break;
  }
  for (auto it = traj.turns.rbegin(); it != traj.turns.rend(); ++it) {
    for (auto c = it->calls.rbegin(); c != it->calls.rend(); ++c) {
      if (c->answer) return *c->answer;
    }
  }
  return {};
}

EpisodeResult Conductor::run_episode(const std::string& episode_id, const std::string& query,
                                     const std::optional<std::string>& gold, const RolePolicyParams& role_params,
                                     const ModelPolicyParams& model_params, RunningStats& stats,
                                     std::uint64_t episode_index) const {
  if (query.empty()) throw ContractError("query is empty");
  EpisodeResult result;
  Trajectory& traj = result.trajectory;
  traj.episode_id = episode_id;
  traj.query = query;
  traj.gold = gold;

  Rng sampler(derive_seed(config_.seed, "sampling", episode_index));
  const std::uint64_t gen_root = derive_seed(config_.seed, "generation", episode_index);

  result.trace.q_emb = embed_query(query);
  ReasoningState state = ReasoningState::initial(query);
  result.terminated_by = Termination::TurnLimit;
  while (state.turn < config_.max_turns) {
    TurnResult turn;
    try {
      turn = run_turn(state, result.trace.q_emb, role_params, model_params, stats, sampler,
                      mix64(gen_root + static_cast<std::uint64_t>(state.turn)));
    } catch (const BackendError& e) {
      traj.failed = true;
      traj.failure = e.what();
      result.terminated_by = Termination::Failed;
      break;
    }
    for (const auto& c : turn.record.calls) {
      traj.total_cost += c.cost;
      traj.total_latency += c.latency;
    }
    traj.turns.push_back(std::move(turn.record));
    result.trace.turns.push_back(std::move(turn.trace));
    if (!turn.next) {
      result.terminated_by = Termination::EarlyStop;
      break;
    }
    state = std::move(*turn.next);
  }
  traj.final_answer = resolve_final_answer(traj);
  result.final_answer = traj.final_answer;
  return result;
}

}  // namespace maestro
