#include "maestro/cost.hpp"

#include <cmath>
#include <cstdio>

#include "maestro/errors.hpp"

namespace maestro {

double call_cost(std::int64_t tokens_in, std::int64_t tokens_out, const PriceEntry& entry) {
  if (tokens_in < 0 || tokens_out < 0) throw ContractError("token counts must be non-negative");
  return (static_cast<double>(tokens_in) * entry.price_in + static_cast<double>(tokens_out) * entry.price_out) / 1e6;
}

double fit_alpha(ParamPrice known, ParamPrice base) {
  if (!(known.params_b > 0 && known.price > 0 && base.params_b > 0 && base.price > 0)) {
    throw ContractError("fit_alpha needs positive parameter counts and prices");
  }
  if (known.params_b == base.params_b) throw ContractError("fit_alpha needs two distinct parameter counts");
  return std::log(known.price / base.price) / std::log(known.params_b / base.params_b);
}

double extrapolate_price(double target_params_b, const PriceEntry& base, double alpha) {
  if (!(target_params_b > 0) || !base.params_b || !(*base.params_b > 0)) {
    throw ContractError("extrapolate_price needs positive parameter counts");
  }
  if (target_params_b == *base.params_b) return base.price_in;
  return base.price_in * std::pow(target_params_b / *base.params_b, alpha);
}

PriceTable::PriceTable(std::vector<PriceEntry> entries, ModelId base, ModelId fit_known, ModelId fit_reference)
    : base_(std::move(base)), fit_known_(std::move(fit_known)), fit_reference_(std::move(fit_reference)) {
  for (auto& e : entries) {
    if (e.model.empty()) throw ConfigError("price entry without a model id");
    if (e.params_b && !(*e.params_b > 0)) throw ConfigError("params_b must be positive for " + e.model.name);
    if (entries_.contains(e.model.name)) throw ConfigError("duplicate price entry " + e.model.name);
    order_.push_back(e.model);
    entries_.emplace(e.model.name, std::move(e));
  }
  auto listed = [&](const ModelId& id, const char* what) -> const PriceEntry& {
    auto it = entries_.find(id.name);
    if (it == entries_.end()) throw ConfigError(std::string(what) + " model '" + id.name + "' has no price entry");
    if (it->second.price_in < 0 || !it->second.params_b) {
      throw ConfigError(std::string(what) + " model '" + id.name + "' needs both a price and params_b");
    }
    return it->second;
  };
  const PriceEntry& b = listed(base_, "base");

  bool needs_fit = false;
  for (const auto& [_, e] : entries_) needs_fit |= e.price_in < 0 || e.price_out < 0;
  if (!fit_known_.empty() && !fit_reference_.empty()) {
    const PriceEntry& k = listed(fit_known_, "fit");
    const PriceEntry& r = listed(fit_reference_, "fit");
    alpha_ = fit_alpha({*k.params_b, k.price_in}, {*r.params_b, r.price_in});
  } else if (needs_fit) {
    throw ConfigError("price table has unpriced entries but no fit pair");
  }

  for (auto& [name, e] : entries_) {
    if (e.price_in >= 0 && e.price_out >= 0) continue;
    if (!e.params_b) throw ConfigError("unpriced entry " + name + " needs params_b");
    const double p = extrapolate_price(*e.params_b, b, alpha_);
    if (e.price_in < 0) e.price_in = p;
    if (e.price_out < 0) e.price_out = b.price_in == 0 ? 0 : p * (b.price_out / b.price_in);
    e.extrapolated = true;
  }
}

const PriceEntry& PriceTable::at(const ModelId& model) const {
  auto it = entries_.find(model.name);
  if (it == entries_.end()) throw ConfigError("no price entry for model '" + model.name + "'");
  return it->second;
}

PriceTable PriceTable::defaults() {
  std::vector<PriceEntry> e{
      {ModelId{"Llama3.1-70B"}, 0.88, 0.88, 70.0, false},
      {ModelId{"Llama3.1-8B"}, 0.18, 0.18, 8.0, false},
      {ModelId{"Qwen2.5-7B"}, 0.30, 0.30, 7.0, false},
      {ModelId{"Qwen2.5-3B"}, -1.0, -1.0, 3.0, false},
  };
  return PriceTable(std::move(e), ModelId{"Qwen2.5-7B"}, ModelId{"Llama3.1-70B"}, ModelId{"Llama3.1-8B"});
}

std::string price_fit_report(const PriceTable& table) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "alpha = %.2f (%.6f) fitted on %s / %s; base %s\n", table.alpha(), table.alpha(),
                table.fit_known().name.c_str(), table.fit_reference().name.c_str(), table.base().name.c_str());
  out += buf;
  std::snprintf(buf, sizeof buf, "%-16s %8s %10s %10s  %s\n", "Model", "Params", "Input($)", "Output($)", "Source");
  out += buf;
  for (const auto& id : table.order()) {
    const auto& e = table.at(id);
    char params[32] = "-";
    if (e.params_b) std::snprintf(params, sizeof params, "%gB", *e.params_b);
    std::snprintf(buf, sizeof buf, "%-16s %8s %10.2f %10.2f  %s\n", id.name.c_str(), params, e.price_in,
                  e.price_out, e.extrapolated ? "scaling law" : "listed");
    out += buf;
  }
  return out;
}

}  // namespace maestro
