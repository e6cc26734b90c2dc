#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "maestro/state.hpp"

namespace maestro {

struct ConfidenceScore {
  double base = 0.0;      // mean token log-probability, <= 0
  double adjusted = 0.0;  // calibrated, in [0, 1]
};

struct ConfidenceParams {
  std::size_t window = 512;     // ring buffer length per backend
  std::size_t warmup = 32;      // observations until the percentile score has full weight
  double low_percentile = 5.0;
  double high_percentile = 95.0;
};

// Mean of the token log-probabilities. Throws ContractError on an empty sequence.
double conf_base(std::span<const double> token_logprobs);

// Percentile with linear interpolation between order statistics of `sorted`
// (ascending): h = (N - 1) * pct / 100.
double percentile_sorted(std::span<const double> sorted, double pct);

// Per-backend running statistics of observed conf_base values. Updates are
// serialized; readers get a consistent snapshot.
class RunningStats {
 public:
  struct Snapshot {
    std::vector<double> window;  // oldest first
    std::uint64_t count = 0;     // total observations, not capped by the window
  };

  explicit RunningStats(ConfidenceParams params = {}) : params_(params) {}
  RunningStats(const RunningStats& other);
  RunningStats& operator=(const RunningStats& other);

  void observe(const ModelId& model, double x);
  [[nodiscard]] Snapshot snapshot(const ModelId& model) const;
  [[nodiscard]] std::map<std::string, Snapshot> all() const;
  void restore(const std::map<std::string, Snapshot>& state);
  [[nodiscard]] const ConfidenceParams& params() const noexcept { return params_; }

 private:
  struct Ring {
    std::vector<double> values;
    std::size_t head = 0;  // next write position once full
    std::uint64_t count = 0;
  };
  ConfidenceParams params_;
  mutable std::mutex mu_;
  std::map<std::string, Ring> rings_;
};

// Calibrated confidence: (1 - w) * exp(x) + w * clamp((x - p5) / (p95 - p5), 0, 1),
// w = min(n / warmup, 1). Falls back to exp(x) when the percentile spread is degenerate.
double conf_adj(double x, const ModelId& model, const RunningStats& stats);

// Same formula on an explicit window; exposed for property tests.
double conf_adj_from(double x, std::span<const double> window, std::uint64_t count, const ConfidenceParams& params);

}  // namespace maestro
