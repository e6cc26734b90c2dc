#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maestro/state.hpp"

namespace maestro {

// USD per one million tokens.
struct PriceEntry {
  ModelId model;
  double price_in = 0.0;
  double price_out = 0.0;
  std::optional<double> params_b;
  bool extrapolated = false;  // price imputed from the scaling law rather than listed
};

struct CostRecord {
  ModelId model;
  RoleId role;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double usd = 0.0;
};

struct ParamPrice {
  double params_b = 0.0;
  double price = 0.0;
};

double call_cost(std::int64_t tokens_in, std::int64_t tokens_out, const PriceEntry& entry);

// Exponent of price ~ params^alpha through two points.
double fit_alpha(ParamPrice known, ParamPrice base);

// base.price_in * (target / base.params_b)^alpha, full precision.
double extrapolate_price(double target_params_b, const PriceEntry& base, double alpha);

class PriceTable {
 public:
  PriceTable() = default;

  // Entries without prices (price_in < 0) are filled from the scaling law fitted on
  // the (fit_known, fit_reference) pair and anchored at `base`.
  PriceTable(std::vector<PriceEntry> entries, ModelId base, ModelId fit_known, ModelId fit_reference);

  [[nodiscard]] const PriceEntry& at(const ModelId& model) const;
  [[nodiscard]] bool contains(const ModelId& model) const { return entries_.contains(model.name); }
  [[nodiscard]] const ModelId& base() const noexcept { return base_; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] const ModelId& fit_known() const noexcept { return fit_known_; }
  [[nodiscard]] const ModelId& fit_reference() const noexcept { return fit_reference_; }
  [[nodiscard]] const std::vector<ModelId>& order() const noexcept { return order_; }

  // Table as shipped: Llama3.1-70B, Llama3.1-8B, Qwen2.5-7B listed; Qwen2.5-3B imputed.
  static PriceTable defaults();

 private:
  std::map<std::string, PriceEntry> entries_;
  std::vector<ModelId> order_;
  ModelId base_;
  ModelId fit_known_;
  ModelId fit_reference_;
  double alpha_ = 0.0;
};

// Human-readable report: fitted exponent and the per-model price table.
std::string price_fit_report(const PriceTable& table);

}  // namespace maestro
