#include "maestro/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "maestro/arith.hpp"
#include "maestro/errors.hpp"
#include "maestro/roles.hpp"
#include "maestro/trajectory_log.hpp"

namespace maestro {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(where + ": record must be an object");
    TaskRecord r;
    try {
      for (const auto& [key, value] : j.items()) {
        if (key == "id") {
          r.id = value.is_string() ? value.get<std::string>() : value.dump();
        } else if (key == "query") {
          r.query = value.get<std::string>();
        } else if (key == "gold") {
          r.gold = value.is_string() ? value.get<std::string>() : value.dump();
        } else if (key == "difficulty") {
          if (!value.is_null()) r.difficulty = value.get<int>();
        } else if (key == "family") {
          if (!value.is_null()) r.family = value.get<std::string>();
        } else {
          throw ConfigError(where + ": unknown field \"" + key + "\"");
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
    data.push_back(std::move(r));
  }
  validate_dataset(data);
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  for (const auto& r : data) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["query"] = r.query;
    j["gold"] = r.gold;
    if (r.difficulty) j["difficulty"] = *r.difficulty;
    if (r.family) j["family"] = *r.family;
    out << j.dump() << '\n';
  }
}

void validate_dataset(const Dataset& data) {
  if (data.empty()) throw ConfigError("dataset is empty");
  std::unordered_set<std::string> seen;
  for (const auto& r : data) {
    if (r.id.empty()) throw ConfigError("dataset record without an id");
    if (!seen.insert(r.id).second) throw ConfigError("duplicate dataset id " + r.id);
    if (r.query.empty()) throw ConfigError("dataset record " + r.id + " has an empty query");
    if (trim(r.gold).empty()) throw ConfigError("dataset record " + r.id + " has an empty gold answer");
  }
}

std::string normalize_answer(std::string_view text) {
  std::string_view s = trim(text);
  if (!s.empty() && s.back() == '.') s = trim(s.substr(0, s.size() - 1));
  if (!s.empty() && s.front() == '+') s = trim(s.substr(1));
  std::string out(s);
  if (!out.empty()) {
    char* end = nullptr;
    const double v = std::strtod(out.c_str(), &end);
    if (end == out.c_str() + out.size() && std::isfinite(v)) return format_number(v);
  }
  return out;
}

int judge(std::string_view answer_text, std::string_view gold) {
  const auto line = extract_answer_line(answer_text);
  const std::string candidate = line ? *line : std::string(answer_text);
  return normalize_answer(candidate) == normalize_answer(gold) ? 1 : 0;
}

std::pair<Dataset, Dataset> split(const Dataset& data, int train_parts, int test_parts, std::uint64_t seed) {
  if (data.empty()) throw ContractError("cannot split an empty dataset");
  if (train_parts < 0 || test_parts < 0 || train_parts + test_parts == 0) {
    throw ConfigError("split ratio needs non-negative parts with a positive total");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(data.size()) * train_parts / static_cast<double>(train_parts + test_parts)));
  std::pair<Dataset, Dataset> out;
  for (std::size_t k = 0; k < order.size(); ++k) (k < n_train ? out.first : out.second).push_back(data[order[k]]);
  return out;
}

EvalReport summarize(std::span<const Trajectory> trajectories, std::span<const Termination> terminations) {
  if (terminations.size() != trajectories.size()) throw ContractError("one termination per trajectory expected");
  EvalReport r;
  r.episodes = trajectories.size();
  std::size_t correct = 0;
  std::size_t early = 0;
  double latency = 0.0;
  double turns = 0.0;
  double judged_cost = 0.0;
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto& t = trajectories[k];
    r.total_cost += t.total_cost;
    if (t.failed) {
      ++r.failed;
      continue;
    }
    ++r.judged;
    if (t.reward.value_or(0) == 1) ++correct;
    if (terminations[k] == Termination::EarlyStop) ++early;
    judged_cost += t.total_cost;
    latency += t.total_latency;
    turns += static_cast<double>(t.turns.size());
  }
  if (r.episodes > 0) r.accuracy = static_cast<double>(correct) / static_cast<double>(r.episodes);
  if (r.judged > 0) {
    const double n = static_cast<double>(r.judged);
    r.mean_cost = judged_cost / n;
    r.mean_latency = latency / n;
    r.mean_turns = turns / n;
    r.early_stop_rate = static_cast<double>(early) / n;
  }
  return r;
}

EvalResult evaluate(const Conductor& conductor, const RolePolicyParams& role_params,
                    const ModelPolicyParams& model_params, RunningStats& stats, const Dataset& data,
                    TrajectoryLogWriter* log) {
  if (conductor.config().mode != RoutingMode::Greedy) throw ContractError("evaluation requires greedy routing");
  validate_dataset(data);
  EvalResult out;
  out.episodes.reserve(data.size());
  std::vector<Trajectory> trajs;
  std::vector<Termination> terms;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& rec = data[k];
    auto ep = conductor.run_episode(rec.id, rec.query, rec.gold, role_params, model_params, stats, k);
    ep.trajectory.reward = ep.trajectory.failed ? 0 : judge(ep.final_answer, rec.gold);
    if (log) log->write(ep.trajectory, to_string(ep.terminated_by));
    trajs.push_back(ep.trajectory);
    terms.push_back(ep.terminated_by);
    out.episodes.push_back(std::move(ep));
  }
  out.report = summarize(trajs, terms);
  return out;
}

namespace {

struct Counter {
  std::map<std::string, std::map<std::string, std::size_t>> rows;
};

Histogram finish(const Counter& c, const std::vector<std::string>& models,
                 const std::vector<std::string>& row_order) {
  Histogram h;
  h.models = models;
  for (const auto& label : row_order) {
    const auto it = c.rows.find(label);
    if (it == c.rows.end()) continue;
    std::size_t total = 0;
    for (const auto& [m, n] : it->second) total += n;
    if (total == 0) continue;
    std::vector<double> row;
    for (const auto& m : models) {
      const auto f = it->second.find(m);
      row.push_back(f == it->second.end() ? 0.0 : static_cast<double>(f->second) / static_cast<double>(total));
    }
    h.row_labels.push_back(label);
    h.fractions.push_back(std::move(row));
    h.counts.push_back(total);
  }
  return h;
}

}  // namespace

RoutingReport routing_report(std::span<const Trajectory> trajectories, const Dataset& data,
                             std::span<const ModelId> model_order) {
  std::unordered_map<std::string, const TaskRecord*> by_id;
  for (const auto& r : data) by_id.emplace(r.id, &r);

  RoutingReport report;
  Counter by_level;
  Counter by_role;
  std::set<int> levels;
  bool unlevelled = false;
  std::vector<std::string> role_order;
  std::vector<std::string> seen_models;
  for (const auto& m : model_order) seen_models.push_back(m.name);

  for (const auto& t : trajectories) {
    const auto it = by_id.find(t.episode_id);
    if (it == by_id.end()) {
      ++report.skipped_episodes;
      continue;
    }
    const auto& rec = *it->second;
    const std::string level = rec.difficulty ? std::to_string(*rec.difficulty) : std::string("none");
    if (rec.difficulty) {
      levels.insert(*rec.difficulty);
    } else {
      unlevelled = true;
    }
    for (const auto& turn : t.turns) {
      for (const auto& c : turn.calls) {
        if (std::find(seen_models.begin(), seen_models.end(), c.model.name) == seen_models.end()) {
          seen_models.push_back(c.model.name);
        }
        if (std::find(role_order.begin(), role_order.end(), c.role.name) == role_order.end()) {
          role_order.push_back(c.role.name);
        }
        ++by_level.rows[level][c.model.name];
        ++by_role.rows[c.role.name][c.model.name];
      }
    }
  }
  if (report.skipped_episodes > 0) {
    std::cerr << "warning: " << report.skipped_episodes << " logged episode(s) have no dataset record\n";
  }
  std::vector<std::string> level_order;
  for (int l : levels) level_order.push_back(std::to_string(l));
  if (unlevelled) level_order.push_back("none");
  report.by_difficulty = finish(by_level, seen_models, level_order);
  report.by_role = finish(by_role, seen_models, role_order);
  return report;
}

std::string format_eval_report(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "episodes\tjudged\tfailed\taccuracy\ttotal_cost\tmean_cost\tmean_latency\tmean_turns\tearly_stop_rate\n"
                "%zu\t%zu\t%zu\t%.4f\t%.8f\t%.8f\t%.4f\t%.3f\t%.4f\n",
                r.episodes, r.judged, r.failed, r.accuracy, r.total_cost, r.mean_cost, r.mean_latency, r.mean_turns,
                r.early_stop_rate);
  return buf;
}

std::string format_histogram(const Histogram& h, std::string_view label_header) {
  std::string out(label_header);
  for (const auto& m : h.models) out += "\t" + m;
  out += "\tcalls\n";
  char buf[64];
  for (std::size_t i = 0; i < h.row_labels.size(); ++i) {
    out += h.row_labels[i];
    for (double f : h.fractions[i]) {
      std::snprintf(buf, sizeof buf, "\t%.4f", f);
      out += buf;
    }
    out += "\t" + std::to_string(h.counts[i]) + "\n";
  }
  return out;
}

std::string format_histogram_long(const Histogram& h, std::string_view label_header) {
  std::string out(label_header);
  out += "\tmodel\tfraction\n";
  char buf[64];
  for (std::size_t i = 0; i < h.row_labels.size(); ++i) {
    for (std::size_t j = 0; j < h.models.size(); ++j) {
      std::snprintf(buf, sizeof buf, "\t%.6f\n", h.fractions[i][j]);
      out += h.row_labels[i] + "\t" + h.models[j] + buf;
    }
  }
  return out;
}

namespace {

std::string solved(const std::string& expr) {
  const auto v = evaluate_arithmetic(expr);
  if (!v) throw ContractError("generator produced an unsolvable expression: " + expr);
  return format_number(*v);
}

std::string padded_id(std::string_view prefix, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", k);
  return std::string(prefix) + buf;
}

}  // namespace

Dataset make_arithmetic_tasks(std::size_t n, double easy_fraction, std::uint64_t seed) {
  if (!(easy_fraction >= 0.0 && easy_fraction <= 1.0)) throw ConfigError("easy_fraction must lie in [0, 1]");
  Rng rng(derive_seed(seed, "tasks"));
  const auto n_easy = static_cast<std::size_t>(std::llround(static_cast<double>(n) * easy_fraction));
  std::vector<std::size_t> kinds(n);
  std::iota(kinds.begin(), kinds.end(), 0);
  shuffle(kinds, rng);

  static constexpr const char* kOps[] = {"+", "-", "*"};
  Dataset data;
  for (std::size_t k = 0; k < n; ++k) {
    TaskRecord r;
    r.id = padded_id("arith-", k);
    if (kinds[k] < n_easy) {
      const auto a = 1 + rng.below(99);
      const auto b = 1 + rng.below(99);
      const std::string expr = std::to_string(a) + " + " + std::to_string(b);
      r.query = "Quick sum: a single addition of two small whole numbers. What is `" + expr + "`?";
      r.gold = solved(expr);
      r.difficulty = 1;
      r.family = "easy";
    } else {
      const int ops = 2 + static_cast<int>(rng.below(4));
      std::string expr = std::to_string(2 + rng.below(30));
      for (int o = 0; o < ops; ++o) {
        const char* op = kOps[rng.below(3)];
        const std::string operand = std::to_string(2 + rng.below(30));
        expr = (o % 2 == 1 ? "(" + expr + ")" : expr) + " " + op + " " + operand;
      }
      r.query = "Multi-step challenge: carefully work out `" + expr + "` and give the exact result.";
      r.gold = solved(expr);
      r.difficulty = ops;
      r.family = "hard";
    }
    data.push_back(std::move(r));
  }
  return data;
}

Dataset make_scripted_tasks(std::size_t n, double solvable_fraction, std::uint64_t seed) {
  if (!(solvable_fraction >= 0.0 && solvable_fraction <= 1.0)) {
    throw ConfigError("solvable_fraction must lie in [0, 1]");
  }
  Rng rng(derive_seed(seed, "tasks"));
  const auto n_ok = static_cast<std::size_t>(std::llround(static_cast<double>(n) * solvable_fraction));
  std::vector<std::size_t> kinds(n);
  std::iota(kinds.begin(), kinds.end(), 0);
  shuffle(kinds, rng);
  Dataset data;
  for (std::size_t k = 0; k < n; ++k) {
    const bool ok = kinds[k] < n_ok;
    const std::string expr = std::to_string(1 + rng.below(50)) + " * " + std::to_string(1 + rng.below(50));
    TaskRecord r;
    r.id = padded_id("scripted-", k);
    r.query = std::string(ok ? "[solvable]" : "[unsolvable]") + " compute `" + expr + "`";
    r.gold = solved(expr);
    r.family = ok ? "solvable" : "unsolvable";
    data.push_back(std::move(r));
  }
  return data;
}

}  // namespace maestro
