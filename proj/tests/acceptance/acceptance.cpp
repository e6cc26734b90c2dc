// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "maestro/app.hpp"
#include "maestro/confidence.hpp"
#include "maestro/cost.hpp"
#include "maestro/harness.hpp"
#include "maestro/role_router.hpp"
#include "maestro/trainer.hpp"
#include "maestro/trajectory_log.hpp"

using namespace maestro;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path kSource = MAESTRO_SOURCE_DIR;

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("maestro-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

Outcome price_law() {
  const PriceTable t = PriceTable::defaults();
  const double alpha = t.alpha();
  // Independent recomputation from the two listed points.
  const double oracle = std::log(0.88 / 0.18) / std::log(70.0 / 8.0);
  const double p3 = t.at(ModelId{"Qwen2.5-3B"}).price_in;
  const bool ok = std::abs(alpha - 0.73) <= 0.005 && std::abs(alpha - oracle) < 1e-12 &&
                  std::abs(alpha - 0.7317) < 1e-4 && std::abs(p3 - 0.16) <= 0.005;
  return {ok, "alpha=" + fmt("%.4f", alpha) + " Qwen2.5-3B=$" + fmt("%.4f", p3)};
}

// --- 2 ---------------------------------------------------------------------

Outcome confidence_identities() {
  Rng rng(20240601);
  std::size_t bad_const = 0;
  for (int i = 0; i < 1000; ++i) {
    const double c = -rng.uniform(0.0, 5.0);
    std::vector<double> lp(1 + rng.below(200), c);
    if (conf_base(lp) != c) ++bad_const;
  }
  const ConfidenceParams params;
  const bool cold = conf_adj_from(0.0, {}, 0, params) == 1.0 &&
                    conf_adj(0.0, ModelId{"unseen"}, RunningStats(params)) == 1.0;

  std::size_t out_of_range = 0, non_monotone = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> window(rng.below(64));
    for (double& v : window) v = -rng.uniform(0.0, 3.0);
    const std::uint64_t count = window.size() + rng.below(3) * rng.below(100);
    double a = -rng.uniform(0.0, 4.0), b = -rng.uniform(0.0, 4.0);
    if (a > b) std::swap(a, b);
    const double ya = conf_adj_from(a, window, count, params);
    const double yb = conf_adj_from(b, window, count, params);
    if (ya < 0.0 || ya > 1.0 || yb < 0.0 || yb > 1.0) ++out_of_range;
    if (ya > yb + 1e-15) ++non_monotone;
  }
  const bool ok = bad_const == 0 && cold && out_of_range == 0 && non_monotone == 0;
  return {ok, "const mismatches=" + std::to_string(bad_const) + " cold=" + (cold ? "1.0" : "wrong") +
                  " range violations=" + std::to_string(out_of_range) + " monotonicity violations=" +
                  std::to_string(non_monotone)};
}

// --- 3 ---------------------------------------------------------------------

std::vector<RoleId> role_ids(std::size_t n) {
  std::vector<RoleId> ids;
  for (std::size_t i = 0; i < n; ++i) ids.emplace_back("r" + std::to_string(i));
  return ids;
}

Outcome selection_semantics() {
  Rng rng(77);
  const std::size_t d = 16;
  HashEmbedder emb(d);
  const auto reg = RoleRegistry::defaults();
  std::vector<Embedding> role_embs;
  for (const auto& r : reg.roles()) role_embs.push_back(emb.embed(r.description));

  double worst_sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Rng init(rng.next_u64());
    auto params = RolePolicyParams::init(d, 8, init);
    for (double& v : params.w_state.data()) v *= rng.uniform(0.0, 40.0);
    const auto q = emb.embed("query " + std::to_string(i));
    const auto c = emb.embed("context " + std::to_string(i));
    const auto dist = role_distribution(q, c, role_embs, reg.ids(), params);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(dist.probs.begin(), dist.probs.end(), 0.0) - 1.0));
  }

  RoleDistribution uniform{role_ids(9), std::vector<double>(9, 1.0 / 9.0)};
  const std::size_t n_uniform = select_roles(uniform, 0.3).selected.size();

  std::size_t not_minimal = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.below(9);
    std::vector<double> w(n);
    for (double& v : w) v = -std::log(1.0 - rng.uniform());
    const double z = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= z;
    const double theta = rng.uniform(0.01, 0.99);
    const auto sel = select_roles(RoleDistribution{role_ids(n), w}, theta);
    // Oracle: sort probabilities descending and accumulate.
    std::vector<double> sorted = w;
    std::sort(sorted.rbegin(), sorted.rend());
    double mass = 0.0, dropped = 0.0;
    for (double p : sel.probs) mass += p;
    for (std::size_t k = 0; k + 1 < sel.probs.size(); ++k) dropped += sel.probs[k];
    bool is_prefix = true;
    for (std::size_t k = 0; k < sel.probs.size(); ++k) is_prefix = is_prefix && sel.probs[k] == sorted[k];
    if (!is_prefix || mass < theta - 1e-12 || dropped >= theta) ++not_minimal;
  }
  const bool ok = worst_sum <= 1e-9 && n_uniform == 3 && not_minimal == 0;
  return {ok, "max |sum-1|=" + fmt("%.1e", worst_sum) + " uniform-9 selects " + std::to_string(n_uniform) +
                  " non-minimal=" + std::to_string(not_minimal)};
}

// --- 4 ---------------------------------------------------------------------

std::vector<double> flatten(const PolicyParams& p) {
  std::vector<double> out;
  for (const Matrix* m : {&p.role.w_state, &p.role.w_role, &p.model.w_ctx, &p.model.table})
    out.insert(out.end(), m->data().begin(), m->data().end());
  return out;
}

double* nth_entry(PolicyParams& p, std::size_t k) {
  for (Matrix* m : {&p.role.w_state, &p.role.w_role, &p.model.w_ctx, &p.model.table}) {
    if (k < m->size()) return &m->data()[k];
    k -= m->size();
  }
  return nullptr;
}

Embedding random_unit(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return normalized(std::move(v));
}

Outcome gradient_check() {
  Rng rng(4242);
  const std::size_t d = 4, lat = 3;
  double worst_role = 0.0, worst_model = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    std::vector<Embedding> roles{random_unit(d, rng), random_unit(d, rng)};
    PolicyParams p{RolePolicyParams::init(d, lat, rng), ModelPolicyParams::init(d, lat, 2, rng)};
    for (Matrix* m : {&p.role.w_state, &p.role.w_role, &p.model.w_ctx, &p.model.table})
      for (double& v : m->data()) v *= 4.0;
    EpisodeTrace trace{random_unit(d, rng), {}};
    const std::size_t turns = 1 + rng.below(3);
    for (std::size_t t = 0; t < turns; ++t) {
      TurnTrace tt{random_unit(d, rng), {}, {}};
      tt.selected = rng.below(2) ? std::vector<std::size_t>{0} : std::vector<std::size_t>{1, 0};
      for (std::size_t r : tt.selected) tt.calls.push_back({r, rng.below(2), true});
      trace.turns.push_back(std::move(tt));
    }
    const auto analytic = flatten(grad_trajectory_logprob(trace, roles, p));
    std::vector<double> numeric(analytic.size());
    const double eps = 1e-5;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      PolicyParams hi = p, lo = p;
      *nth_entry(hi, k) += eps;
      *nth_entry(lo, k) -= eps;
      numeric[k] = (trajectory_logprob(trace, roles, hi) - trajectory_logprob(trace, roles, lo)) / (2 * eps);
    }
    // Norm-wise relative error per parameter block.
    const std::size_t role_size = p.role.w_state.size() + p.role.w_role.size();
    auto rel = [&](std::size_t from, std::size_t to) {
      double num = 0.0, den = 0.0;
      for (std::size_t k = from; k < to; ++k) {
        num += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
        den += numeric[k] * numeric[k];
      }
      return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
    };
    worst_role = std::max(worst_role, rel(0, role_size));
    worst_model = std::max(worst_model, rel(role_size, analytic.size()));
  }
  const bool ok = worst_role < 1e-4 && worst_model < 1e-4;
  return {ok, "max relative error role=" + fmt("%.2e", worst_role) + " model=" + fmt("%.2e", worst_model)};
}

// --- 5 ---------------------------------------------------------------------

struct SyntheticRun {
  bool pass = false;
  std::string detail;
};

SyntheticRun synthetic_run(RunConfig cfg) {
  Runtime rt(cfg);
  const Dataset all = make_arithmetic_tasks(500, 0.7, 11);
  const auto [train_set, test_set] = split(all, cfg.split_train, cfg.split_test, cfg.effective_split_seed());

  auto sampler = rt.conductor(RoutingMode::Sample);
  TrainerState st = rt.initial_state();
  Trainer trainer(*sampler, cfg.training);
  trainer.train(st, train_set);

  auto greedy = rt.conductor(RoutingMode::Greedy);
  RunningStats s_run = st.stats;
  const auto res = evaluate(*greedy, st.params.role, st.params.model, s_run, test_set);

  ConductorConfig ac = cfg.conductor;
  ac.mode = RoutingMode::Greedy;
  ac.disable_model_router = true;
  auto ablated = rt.conductor(ac);
  RunningStats s_abl = st.stats;
  const auto abl = evaluate(*ablated, st.params.role, st.params.model, s_abl, test_set);

  const std::string cheap = "Qwen2.5-7B", strong = "Llama3.1-70B";
  std::size_t easy = 0, easy_cheap = 0, hard = 0, hard_strong = 0;
  for (std::size_t k = 0; k < test_set.size(); ++k) {
    // An episode is routed to the backend that served its last call.
    std::string last;
    for (const auto& t : res.episodes[k].trajectory.turns)
      for (const auto& c : t.calls) last = c.model.name;
    if (test_set[k].family == std::optional<std::string>("easy")) {
      ++easy;
      easy_cheap += last == cheap;
    } else {
      ++hard;
      hard_strong += last == strong;
    }
  }
  const double f_easy = easy ? static_cast<double>(easy_cheap) / easy : 0.0;
  const double f_hard = hard ? static_cast<double>(hard_strong) / hard : 0.0;
  const double ratio = abl.report.total_cost > 0 ? res.report.total_cost / abl.report.total_cost : 1.0;
  SyntheticRun out;
  out.pass = f_easy >= 0.8 && f_hard >= 0.8 && res.report.accuracy >= 0.95 && ratio <= 0.6;
  out.detail = "episodes=" + std::to_string(st.episodes_seen) + " easy->cheap=" + fmt("%.2f", f_easy) +
               " hard->strong=" + fmt("%.2f", f_hard) + " accuracy=" + fmt("%.3f", res.report.accuracy) +
               " cost ratio vs always-strong=" + fmt("%.3f", ratio);
  return out;
}

Outcome synthetic_learning() {
  const RunConfig cfg = load_config(kSource / "configs" / "synthetic.json");
  const auto r = synthetic_run(cfg);
  return {r.pass, r.detail};
}

// Not a criterion: how often other training seeds meet the same targets.
void synthetic_seed_sweep() {
  RunConfig cfg = load_config(kSource / "configs" / "synthetic.json");
  int passed = 0;
  for (std::uint64_t s = 1; s <= 8; ++s) {
    cfg.seed = s;
    cfg.conductor.seed = s;
    passed += synthetic_run(cfg).pass ? 1 : 0;
  }
  std::printf("INFO criterion 5 seed sweep: %d/8 training seeds meet every target\n", passed);
}

// --- 6 ---------------------------------------------------------------------

std::shared_ptr<MockScript> answer_four() {
  auto s = std::make_shared<MockScript>();
  s->fallback = {"", "Working.\nAnswer: 4", {-0.2}, MockBehavior::Fixed, 0.0};
  return s;
}

std::vector<BackendSpec> two_mocks() {
  const auto prices = PriceTable::defaults();
  std::vector<BackendSpec> specs;
  for (const char* m : {"Qwen2.5-7B", "Llama3.1-70B"}) {
    BackendSpec b;
    b.model = ModelId{m};
    b.price = prices.at(b.model);
    b.script = answer_four();
    b.script_name = "four";
    specs.push_back(std::move(b));
  }
  return specs;
}

// Solves X E = T for X (rows d_lat) given role embeddings E (columns) via the Gram system.
Matrix fit_role_matrix(const std::vector<Embedding>& embs, const std::vector<std::vector<double>>& targets) {
  const std::size_t n = embs.size(), d = embs[0].dim(), lat = targets.size();
  std::vector<std::vector<double>> g(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g[i][j] = dot(embs[i].span(), embs[j].span());
  Matrix out(lat, d);
  for (std::size_t r = 0; r < lat; ++r) {
    // Solve G a = t_r, then row r = sum_i a_i e_i.
    auto a = g;
    std::vector<double> b = targets[r];
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t piv = c;
      for (std::size_t k = c + 1; k < n; ++k)
        if (std::abs(a[k][c]) > std::abs(a[piv][c])) piv = k;
      std::swap(a[c], a[piv]);
      std::swap(b[c], b[piv]);
      for (std::size_t k = 0; k < n; ++k) {
        if (k == c) continue;
        const double f = a[k][c] / a[c][c];
        for (std::size_t j = c; j < n; ++j) a[k][j] -= f * a[c][j];
        b[k] -= f * b[c];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double coef = b[i] / a[i][i];
      for (std::size_t j = 0; j < d; ++j) out(r, j) += coef * embs[i].values[j];
    }
  }
  return out;
}

Outcome early_stop_discipline() {
  HashEmbedder emb(256);
  const auto reg = RoleRegistry::defaults();
  BackendPool pool(two_mocks());
  ConductorConfig cc;
  cc.large_backend = ModelId{"Llama3.1-70B"};
  Conductor conductor(emb, reg, pool, cc);
  const auto& role_embs = conductor.role_embeddings();
  const std::size_t d = emb.dim();

  // Latent axis 0 scores EarlyStop, axis 1 scores Generator. Axis 0 is driven by the
  // query and axis 1 by similarity to the empty context, so Generator leads at turn 0
  // and EarlyStop leads once the context has content.
  const std::size_t n = reg.size(), stop = reg.index_of(kEarlyStop), gen = reg.index_of(RoleId{"Generator"});
  std::vector<std::vector<double>> targets(2, std::vector<double>(n, 0.0));
  targets[0][stop] = 1.0;
  targets[1][gen] = 1.0;
  const double k = 40.0;
  const std::vector<std::string> queries{"What is `2 + 2`?", "Compute `3 * 7`.", "Evaluate `(1 + 2) * 3`.",
                                         "Quick sum: `9 + 10`", "Find `100 - 58`."};
  std::size_t premise_failures = 0, leaked_calls = 0, too_long = 0;
  for (const auto& q : queries) {
    RolePolicyParams rp = RolePolicyParams::zeros(d, 2);
    rp.w_role = fit_role_matrix(role_embs, targets);
    const auto q_emb = conductor.embed_query(q);
    const auto c0 = conductor.embed_context(ReasoningState::initial(q));
    for (std::size_t j = 0; j < d; ++j) {
      rp.w_state(0, j) = k * q_emb.values[j];
      rp.w_state(1, d + j) = 2.0 * k * c0.values[j];
    }
    Rng init(9);
    const auto mp = ModelPolicyParams::init(d, 2, pool.size(), init);
    RunningStats stats;
    pool.reset_calls();
    const auto ep = conductor.run_episode("es", q, std::nullopt, rp, mp, stats, 0);
    const auto& turns = ep.trajectory.turns;
    std::size_t logged = 0;
    for (const auto& t : turns) logged += t.calls.size();
    const bool premise = turns.size() >= 2 && !turns[0].early_stop && turns[1].early_stop &&
                         turns[1].selected.front().role == kEarlyStop;
    if (!premise) ++premise_failures;
    if (pool.total_calls() != logged || !turns.back().calls.empty()) ++leaked_calls;
    if (turns.size() > 2) ++too_long;
  }

  const auto no_stop = reg.without(kEarlyStop);
  Conductor capped(emb, no_stop, pool, cc);
  Rng rng(31);
  std::size_t wrong_length = 0;
  for (int i = 0; i < 20; ++i) {
    const auto rp = RolePolicyParams::init(d, 8, rng);
    const auto mp = ModelPolicyParams::init(d, 8, pool.size(), rng);
    RunningStats stats;
    const auto ep = capped.run_episode("cap", "What is `" + std::to_string(i) + " + 1`?", std::nullopt, rp, mp,
                                       stats, static_cast<std::uint64_t>(i));
    if (ep.trajectory.turns.size() != 4 || ep.terminated_by != Termination::TurnLimit) ++wrong_length;
  }
  const bool ok = premise_failures == 0 && leaked_calls == 0 && too_long == 0 && wrong_length == 0;
  return {ok, "premise failures=" + std::to_string(premise_failures) + " calls after stop=" +
                  std::to_string(leaked_calls) + " over-long=" + std::to_string(too_long) +
                  " no-EarlyStop runs not at L=4: " + std::to_string(wrong_length) + "/20"};
}

// --- 7 ---------------------------------------------------------------------

Outcome objective_accounting() {
  Trajectory traj;
  traj.episode_id = "acct";
  traj.query = "q";
  traj.gold = "1";
  traj.reward = 1;
  TurnRecord t;
  t.turn = 0;
  t.selected = {{RoleId{"Generator"}, 1.0}};
  CallRecord a, b;
  a.role = b.role = RoleId{"Generator"};
  a.model = b.model = ModelId{"Qwen2.5-7B"};
  a.conf_adj = 0.9;
  a.cost = 0.0004;
  b.conf_adj = 0.5;
  b.cost = 0.0010;
  t.calls = {a, b};
  traj.turns = {t};
  traj.total_cost = 0.0014;

  const fs::path log = scratch_dir() / "accounting.jsonl";
  fs::remove(log);
  {
    TrajectoryLogWriter w(log);
    w.write(traj, "turn_limit");
  }
  const auto back = read_trajectory_log(log);

  // Independent re-summation straight from the log lines.
  std::ifstream in(log);
  std::string line;
  double weighted = 0.0, plain = 0.0;
  int reward = -1;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["record"] == "turn") {
      for (const auto& c : j["calls"]) {
        weighted += c["conf_adj"].get<double>() * c["cost"].get<double>();
        plain += c["cost"].get<double>();
      }
    } else {
      reward = j["reward"].get<int>();
    }
  }
  TrainingConfig base;
  TrainingConfig no_conf = base;
  no_conf.disable_conf_weight = true;
  TrainingConfig zero = base;
  zero.lambda = 0.0;
  const double r_base = penalized_return(back.at(0), 1, base).penalized_return;
  const double r_noconf = penalized_return(back.at(0), 1, no_conf).penalized_return;
  const double r_zero = penalized_return(back.at(0), 1, zero).penalized_return;
  const double o_base = reward - 200.0 * weighted, o_noconf = reward - 200.0 * plain;
  const bool ok = std::abs(r_base - 0.828) < 1e-12 && std::abs(r_noconf - 0.72) < 1e-12 && r_zero == 1.0 &&
                  std::abs(o_base - r_base) < 1e-12 && std::abs(o_noconf - r_noconf) < 1e-12;
  return {ok, "R=" + fmt("%.6f", r_base) + " no-conf=" + fmt("%.6f", r_noconf) + " lambda0=" + fmt("%.6f", r_zero) +
                  " log re-sum=" + fmt("%.6f", o_base)};
}

// --- 8 ---------------------------------------------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism_and_persistence() {
  const RunConfig mock = load_config(kSource / "configs" / "mock.json");
  const Dataset data = make_arithmetic_tasks(30, 0.5, 3);
  std::vector<std::string> logs;
  for (int run = 0; run < 2; ++run) {
    Runtime rt(mock);
    auto c = rt.conductor(RoutingMode::Greedy);
    auto st = rt.initial_state();
    const fs::path p = scratch_dir() / ("replay-" + std::to_string(run) + ".jsonl");
    fs::remove(p);
    TrajectoryLogWriter w(p);
    evaluate(*c, st.params.role, st.params.model, st.stats, data, &w);
    logs.push_back(p.string());
  }
  const std::string a = read_file(logs[0]), b = read_file(logs[1]);
  const bool identical = !a.empty() && strip_wall_clock(a) == strip_wall_clock(b);

  RunConfig cfg = load_config(kSource / "configs" / "synthetic.json");
  cfg.training.batch_size = 4;
  const auto [train_set, test_set] = split(make_arithmetic_tasks(60, 0.7, 11), 4, 1, 11);
  (void)test_set;
  Runtime rt(cfg);
  auto sampler = rt.conductor(RoutingMode::Sample);
  Trainer trainer(*sampler, cfg.training);

  TrainerState straight = rt.initial_state();
  for (int i = 0; i < 6; ++i) trainer.step(straight, train_set);

  TrainerState first = rt.initial_state();
  for (int i = 0; i < 5; ++i) trainer.step(first, train_set);
  const fs::path ckpt = scratch_dir() / "resume.json";
  save_checkpoint(make_checkpoint(first, cfg.seed, rt.backends()), ckpt);
  const Checkpoint loaded = load_checkpoint(ckpt);
  check_compatible(loaded, rt);
  TrainerState resumed = restore_state(loaded, cfg.confidence);
  trainer.step(resumed, train_set);

  const bool same = resumed.params == straight.params && resumed.baseline.value == straight.baseline.value &&
                    resumed.step == straight.step && resumed.episodes_seen == straight.episodes_seen &&
                    resumed.stats.all().size() == straight.stats.all().size();
  bool stats_same = same;
  if (same) {
    const auto sa = resumed.stats.all(), sb = straight.stats.all();
    for (const auto& [k, v] : sa) stats_same = stats_same && sb.at(k).window == v.window && sb.at(k).count == v.count;
  }
  const bool ok = identical && same && stats_same;
  return {ok, std::string("logs ") + (identical ? "byte-identical" : "differ") + "; resume " +
                  (same && stats_same ? "matches" : "diverges from") + " uninterrupted training"};
}

// --- 9 ---------------------------------------------------------------------

Outcome ablation_totality() {
  const RunConfig cfg = load_config(kSource / "configs" / "synthetic.json");
  Runtime rt(cfg);
  const Dataset data = make_arithmetic_tasks(40, 0.5, 5);
  const TrainerState st = rt.initial_state();
  const std::string large = cfg.conductor.large_backend.name;

  ConductorConfig forced = cfg.conductor;
  forced.mode = RoutingMode::Sample;
  forced.disable_model_router = true;
  auto c_forced = rt.conductor(forced);
  auto c_normal = rt.conductor(RoutingMode::Sample);

  std::size_t off_large = 0, model_grad_leak = 0, role_grad_diff = 0, term_leaks = 0, calls = 0;
  std::size_t normal_non_large = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    RunningStats s1 = st.stats, s2 = st.stats;
    const auto ef = c_forced->run_episode(data[i].id, data[i].query, data[i].gold, st.params.role, st.params.model,
                                          s1, i);
    const auto en = c_normal->run_episode(data[i].id, data[i].query, data[i].gold, st.params.role, st.params.model,
                                          s2, i);
    for (const auto& t : ef.trajectory.turns)
      for (const auto& c : t.calls) {
        ++calls;
        off_large += c.model.name != large;
      }
    for (const auto& t : en.trajectory.turns)
      for (const auto& c : t.calls) normal_non_large += c.model.name != large;

    // Forced episodes contribute no model-router gradient; the role block is the plain
    // sum of per-turn selection gradients.
    const auto g = grad_trajectory_logprob(ef.trace, rt.conductor(RoutingMode::Sample)->role_embeddings(), st.params);
    for (double v : g.model.w_ctx.data()) model_grad_leak += v != 0.0;
    for (double v : g.model.table.data()) model_grad_leak += v != 0.0;
    RolePolicyParams expect = RolePolicyParams::zeros(st.params.role.embed_dim(), st.params.role.latent_dim());
    for (const auto& t : ef.trace.turns) {
      const auto gr = grad_role_logprob(ef.trace.q_emb, t.c_emb, c_forced->role_embeddings(), st.params.role, t.selected);
      for (std::size_t k = 0; k < expect.w_state.size(); ++k) expect.w_state.data()[k] += gr.w_state.data()[k];
      for (std::size_t k = 0; k < expect.w_role.size(); ++k) expect.w_role.data()[k] += gr.w_role.data()[k];
    }
    for (std::size_t k = 0; k < expect.w_state.size(); ++k)
      role_grad_diff += std::abs(expect.w_state.data()[k] - g.role.w_state.data()[k]) > 1e-12;
    for (std::size_t k = 0; k < expect.w_role.size(); ++k)
      role_grad_diff += std::abs(expect.w_role.data()[k] - g.role.w_role.data()[k]) > 1e-12;

    // Objective flags: each changes only its own term.
    const int reward = judge(en.final_answer, data[i].gold);
    TrainingConfig base = cfg.training, no_cost = base, no_conf = base;
    no_cost.disable_cost_term = true;
    no_conf.disable_conf_weight = true;
    const auto lb = penalized_return(en.trajectory, reward, base);
    const auto lc = penalized_return(en.trajectory, reward, no_cost);
    const auto lw = penalized_return(en.trajectory, reward, no_conf);
    double plain = 0.0, weighted = 0.0;
    for (const auto& t : en.trajectory.turns)
      for (const auto& c : t.calls) {
        plain += c.cost;
        weighted += c.conf_adj * c.cost;
      }
    const bool confined = lc.reward == lb.reward && lc.penalty == 0.0 && lc.penalized_return == lb.reward &&
                          lc.trajectory_logprob == lb.trajectory_logprob && lw.reward == lb.reward &&
                          std::abs(lw.penalty - base.lambda * plain) < 1e-12 &&
                          std::abs(lb.penalty - base.lambda * weighted) < 1e-12 &&
                          lw.trajectory_logprob == lb.trajectory_logprob;
    term_leaks += confined ? 0 : 1;
  }
  const bool ok = calls > 0 && off_large == 0 && normal_non_large > 0 && model_grad_leak == 0 &&
                  role_grad_diff == 0 && term_leaks == 0;
  return {ok, "forced calls=" + std::to_string(calls) + " off-large=" + std::to_string(off_large) +
                  " model-grad leaks=" + std::to_string(model_grad_leak) + " role-grad mismatches=" +
                  std::to_string(role_grad_diff) + " objective-term leaks=" + std::to_string(term_leaks)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "price scaling law", 1.0, price_law},
      {2, "confidence identities", 5.0, confidence_identities},
      {3, "routing selection semantics", 5.0, selection_semantics},
      {4, "gradient correctness", 30.0, gradient_check},
      {5, "synthetic cost-aware learning", 120.0, synthetic_learning},
      {6, "early-stop discipline", 10.0, early_stop_discipline},
      {7, "objective accounting", 5.0, objective_accounting},
      {8, "determinism and persistence", 30.0, determinism_and_persistence},
      {9, "ablation totality", 30.0, ablation_totality},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s criterion %d: %s (%s; %.2fs of %.0fs)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  try {
    synthetic_seed_sweep();
  } catch (const std::exception& e) {
    std::printf("INFO criterion 5 seed sweep failed: %s\n", e.what());
  }
  std::error_code ec;
  fs::remove_all(scratch_dir(), ec);
  return failures == 0 ? 0 : 1;
}
