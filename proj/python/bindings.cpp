#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "maestro/app.hpp"
#include "maestro/confidence.hpp"
#include "maestro/cost.hpp"
#include "maestro/errors.hpp"
#include "maestro/harness.hpp"
#include "maestro/role_router.hpp"
#include "maestro/trajectory_log.hpp"

namespace py = pybind11;
using namespace maestro;

namespace {

// Structured results cross the boundary as JSON text; the Python side decodes them.
std::string dataset_json(const Dataset& data) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : data) {
    nlohmann::ordered_json j{{"id", r.id}, {"query", r.query}, {"gold", r.gold}};
    if (r.difficulty) j["difficulty"] = *r.difficulty;
    if (r.family) j["family"] = *r.family;
    out.push_back(std::move(j));
  }
  return out.dump();
}

Dataset dataset_from_json(const std::string& text) {
  Dataset data;
  for (const auto& j : nlohmann::json::parse(text)) {
    TaskRecord r;
    r.id = j.at("id").get<std::string>();
    r.query = j.at("query").get<std::string>();
    r.gold = j.at("gold").get<std::string>();
    if (j.contains("difficulty")) r.difficulty = j["difficulty"].get<int>();
    if (j.contains("family")) r.family = j["family"].get<std::string>();
    data.push_back(std::move(r));
  }
  validate_dataset(data);
  return data;
}

std::string episode_json(const EpisodeResult& ep) {
  nlohmann::ordered_json turns = nlohmann::ordered_json::array();
  for (const auto& t : ep.trajectory.turns) {
    auto j = turn_record_json(ep.trajectory.episode_id, t);
    j.erase("wall_clock");
    turns.push_back(std::move(j));
  }
  auto summary = episode_summary_json(ep.trajectory, to_string(ep.terminated_by));
  summary.erase("wall_clock");
  return nlohmann::ordered_json{{"summary", summary}, {"turns", turns}}.dump();
}

std::string report_json(const EvalReport& r) {
  return nlohmann::ordered_json{{"episodes", r.episodes},         {"judged", r.judged},
                                {"failed", r.failed},             {"accuracy", r.accuracy},
                                {"total_cost", r.total_cost},     {"mean_cost", r.mean_cost},
                                {"mean_latency", r.mean_latency}, {"mean_turns", r.mean_turns},
                                {"early_stop_rate", r.early_stop_rate}}
      .dump();
}

class Session {
 public:
  explicit Session(const std::filesystem::path& config) : cfg_(load_config(config)) {
    rt_ = std::make_unique<Runtime>(cfg_);
    state_ = rt_->initial_state();
  }

  std::string route(const std::string& query, bool greedy) {
    auto c = rt_->conductor(greedy ? RoutingMode::Greedy : RoutingMode::Sample);
    const auto ep = c->run_episode("query-0", query, std::nullopt, state_.params.role, state_.params.model,
                                   state_.stats, 0);
    return episode_json(ep);
  }

  std::string train(const std::string& data_json) {
    const auto data = dataset_from_json(data_json);
    auto c = rt_->conductor(RoutingMode::Sample);
    Trainer t(*c, cfg_.training);
    const auto curve = t.train(state_, data);
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& p : curve) {
      out.push_back({{"batch", p.batch},
                     {"mean_return", p.mean_return},
                     {"accuracy", p.accuracy},
                     {"mean_cost", p.mean_cost},
                     {"mean_turns", p.mean_turns},
                     {"mean_call_price", p.mean_call_price}});
    }
    return out.dump();
  }

  std::string evaluate(const std::string& data_json, bool disable_model_router) {
    const auto data = dataset_from_json(data_json);
    auto cc = cfg_.conductor;
    cc.mode = RoutingMode::Greedy;
    cc.disable_model_router = disable_model_router;
    auto c = rt_->conductor(cc);
    auto stats = state_.stats;
    return report_json(maestro::evaluate(*c, state_.params.role, state_.params.model, stats, data).report);
  }

  void save(const std::filesystem::path& path) const {
    save_checkpoint(make_checkpoint(state_, cfg_.seed, rt_->backends()), path);
  }

  void load(const std::filesystem::path& path) {
    const auto ckpt = load_checkpoint(path);
    check_compatible(ckpt, *rt_);
    state_ = restore_state(ckpt, cfg_.confidence);
  }

  [[nodiscard]] std::uint64_t step() const { return state_.step; }
  [[nodiscard]] std::string split_json(const std::string& data_json) const {
    const auto [train, test] =
        split(dataset_from_json(data_json), cfg_.split_train, cfg_.split_test, cfg_.effective_split_seed());
    return "[" + dataset_json(train) + "," + dataset_json(test) + "]";
  }

 private:
  RunConfig cfg_;
  std::unique_ptr<Runtime> rt_;
  TrainerState state_;
};

}  // namespace

PYBIND11_MODULE(_maestro, m) {
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

  m.def("fit_alpha", [](double known_params, double known_price, double base_params, double base_price) {
    return fit_alpha({known_params, known_price}, {base_params, base_price});
  });
  m.def("extrapolate_price", [](double target_params, double base_params, double base_price, double alpha) {
    PriceEntry base;
    base.price_in = base.price_out = base_price;
    base.params_b = base_params;
    return extrapolate_price(target_params, base, alpha);
  });
  m.def("call_cost", [](std::int64_t tokens_in, std::int64_t tokens_out, double price_in, double price_out) {
    PriceEntry e;
    e.price_in = price_in;
    e.price_out = price_out;
    return call_cost(tokens_in, tokens_out, e);
  });
  m.def("default_prices", [] {
    const auto t = PriceTable::defaults();
    py::dict out;
    for (const auto& id : t.order()) {
      const auto& e = t.at(id);
      out[py::str(id.name)] = py::make_tuple(e.price_in, e.price_out, e.extrapolated);
    }
    return py::make_tuple(t.alpha(), out);
  });
  m.def("price_fit_report", [] { return price_fit_report(PriceTable::defaults()); });

  m.def("conf_base", [](const std::vector<double>& lp) { return conf_base(lp); });
  m.def(
      "conf_adj",
      [](double x, const std::vector<double>& window, std::uint64_t count, std::size_t warmup) {
        ConfidenceParams p;
        p.warmup = warmup;
        return conf_adj_from(x, window, count, p);
      },
      py::arg("x"), py::arg("window"), py::arg("count"), py::arg("warmup") = ConfidenceParams{}.warmup);

  m.def("select_roles", [](const std::vector<double>& probs, double theta) {
    RoleDistribution d;
    d.probs = probs;
    for (std::size_t i = 0; i < probs.size(); ++i) d.roles.push_back(RoleId{"r" + std::to_string(i)});
    return select_roles(d, theta).indices;
  });

  m.def("judge", [](const std::string& text, const std::string& gold) { return judge(text, gold); });
  m.def("normalize_answer", [](const std::string& text) { return normalize_answer(text); });
  m.def("arithmetic_tasks_json", [](std::size_t n, double easy_fraction, std::uint64_t seed) {
    return dataset_json(make_arithmetic_tasks(n, easy_fraction, seed));
  });
  m.def("load_dataset_json", [](const std::filesystem::path& p) { return dataset_json(load_dataset(p)); });

  py::class_<Session>(m, "Session")
      .def(py::init<const std::filesystem::path&>())
      .def("route", &Session::route, py::arg("query"), py::arg("greedy") = true)
      .def("train", &Session::train, py::call_guard<py::gil_scoped_release>())
      .def("evaluate", &Session::evaluate, py::arg("data"), py::arg("disable_model_router") = false,
           py::call_guard<py::gil_scoped_release>())
      .def("split", &Session::split_json)
      .def("save", &Session::save)
      .def("load", &Session::load)
      .def_property_readonly("step", &Session::step);
}
