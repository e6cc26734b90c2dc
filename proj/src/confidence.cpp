#include "maestro/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "maestro/errors.hpp"

namespace maestro {

double conf_base(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw ContractError("empty generation");
  // Running mean: a constant sequence comes back bit-exact, which sum/T does not guarantee.
  double mean = 0.0;
  std::size_t k = 0;
  for (double v : token_logprobs) {
    if (!std::isfinite(v)) throw ContractError("non-finite token log-probability");
    mean += (v - mean) / static_cast<double>(++k);
  }
  return std::min(mean, 0.0);
}

double percentile_sorted(std::span<const double> sorted, double pct) {
  if (sorted.empty()) throw ContractError("percentile of an empty window");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

RunningStats::RunningStats(const RunningStats& other) {
  std::lock_guard lock(other.mu_);
  params_ = other.params_;
  rings_ = other.rings_;
}

RunningStats& RunningStats::operator=(const RunningStats& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  params_ = other.params_;
  rings_ = other.rings_;
  return *this;
}

void RunningStats::observe(const ModelId& model, double x) {
  x = std::min(x, 0.0);
  std::lock_guard lock(mu_);
  Ring& r = rings_[model.name];
  if (r.values.size() < params_.window) {
    r.values.push_back(x);
  } else if (params_.window > 0) {
    r.values[r.head] = x;
    r.head = (r.head + 1) % params_.window;
  }
  ++r.count;
}

RunningStats::Snapshot RunningStats::snapshot(const ModelId& model) const {
  std::lock_guard lock(mu_);
  Snapshot s;
  auto it = rings_.find(model.name);
  if (it == rings_.end()) return s;
  const Ring& r = it->second;
  s.count = r.count;
  s.window.reserve(r.values.size());
  for (std::size_t i = 0; i < r.values.size(); ++i) s.window.push_back(r.values[(r.head + i) % r.values.size()]);
  return s;
}

std::map<std::string, RunningStats::Snapshot> RunningStats::all() const {
  std::vector<std::string> names;
  {
    std::lock_guard lock(mu_);
    for (const auto& [name, _] : rings_) names.push_back(name);
  }
  std::map<std::string, Snapshot> out;
  for (const auto& n : names) out[n] = snapshot(ModelId{n});
  return out;
}

void RunningStats::restore(const std::map<std::string, Snapshot>& state) {
  std::lock_guard lock(mu_);
  rings_.clear();
  for (const auto& [name, snap] : state) {
    if (snap.window.size() > params_.window) throw ConfigError("stats window for " + name + " exceeds the configured size");
    for (double v : snap.window) {
      if (!(v <= 0.0)) throw ConfigError("stats window for " + name + " holds a positive value");
    }
    Ring r;
    r.values = snap.window;
    r.head = 0;
    r.count = snap.count;
    rings_[name] = std::move(r);
  }
}

double conf_adj_from(double x, std::span<const double> window, std::uint64_t count, const ConfidenceParams& params) {
  if (x > 0.0) {
    std::cerr << "warning: positive confidence " << x << " clamped to 0\n";
    x = 0.0;
  }
  const double fallback = std::exp(x);
  if (window.empty() || count == 0) return fallback;

  std::vector<double> sorted(window.begin(), window.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = percentile_sorted(sorted, params.low_percentile);
  const double hi = percentile_sorted(sorted, params.high_percentile);
  if (hi - lo < 1e-9) return fallback;

  const double score = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  const double w = params.warmup == 0
                       ? 1.0
                       : std::min(static_cast<double>(count) / static_cast<double>(params.warmup), 1.0);
  return std::clamp((1.0 - w) * fallback + w * score, 0.0, 1.0);
}

double conf_adj(double x, const ModelId& model, const RunningStats& stats) {
  const auto snap = stats.snapshot(model);
  return conf_adj_from(x, snap.window, snap.count, stats.params());
}

}  // namespace maestro
