#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maestro/app.hpp"
#include "maestro/errors.hpp"
#include "maestro/harness.hpp"
#include "maestro/trainer.hpp"
#include "maestro/trajectory_log.hpp"

namespace fs = std::filesystem;
using namespace maestro;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config;
  std::string checkpoint;
  std::string dataset;
  std::string part = "all";
};

Dataset select_part(const RunConfig& cfg, const Dataset& data, const std::string& part) {
  if (part == "all") return data;
  auto [train, test] = split(data, cfg.split_train, cfg.split_test, cfg.effective_split_seed());
  if (part == "train") return train;
  if (part == "test") return test;
  throw ConfigError("--part must be one of all, train, test");
}

Dataset dataset_for(const RunConfig& cfg, const Common& c) {
  const std::string path = c.dataset.empty() ? cfg.paths.dataset : c.dataset;
  if (path.empty()) throw ConfigError("no dataset given (use --dataset or paths.dataset)");
  return select_part(cfg, load_dataset(path), c.part);
}

TrainerState state_for(const Runtime& rt, const std::string& checkpoint) {
  if (checkpoint.empty()) return rt.initial_state();
  const auto ckpt = load_checkpoint(checkpoint);
  check_compatible(ckpt, rt);
  return restore_state(ckpt, rt.config().confidence);
}

void print_trajectory(const EpisodeResult& ep) {
  const auto& t = ep.trajectory;
  std::printf("query: %s\n", t.query.c_str());
  for (const auto& turn : t.turns) {
    std::printf("turn %d:", turn.turn);
    for (const auto& s : turn.selected) std::printf(" %s(%.3f)", s.role.name.c_str(), s.prob);
    std::printf("  selection_logprob=%.4f%s\n", turn.selection_logprob, turn.early_stop ? "  [early stop]" : "");
    for (const auto& c : turn.calls) {
      std::printf("  %-13s -> %-14s p=%.3f conf_base=%.3f conf_adj=%.3f tokens=%lld/%lld cost=$%.8f answer=%s\n",
                  c.role.name.c_str(), c.model.name.c_str(), c.model_prob, c.conf_base, c.conf_adj,
                  static_cast<long long>(c.tokens_in), static_cast<long long>(c.tokens_out), c.cost,
                  c.answer ? c.answer->c_str() : "-");
    }
  }
  std::printf("terminated_by: %s\n", std::string(to_string(ep.terminated_by)).c_str());
  if (t.failed) std::printf("failure: %s\n", t.failure.c_str());
  std::printf("total cost: $%.8f  latency: %.3fs\n", t.total_cost, t.total_latency);
  std::printf("final answer: %s\n", ep.final_answer.c_str());
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad list value '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

int cmd_price_fit(const std::string& config) {
  const PriceTable table = config.empty() ? PriceTable::defaults() : load_config(config).prices;
  std::cout << price_fit_report(table);
  return 0;
}

int cmd_train(const Common& c, const std::string& out_dir_opt, const std::string& curve_path, int epochs) {
  RunConfig cfg = load_config(c.config);
  if (epochs > 0) cfg.training.epochs = epochs;
  cfg.training.validate();
  const Dataset data = dataset_for(cfg, c);
  Runtime rt(cfg);
  auto conductor = rt.conductor(RoutingMode::Sample);
  Trainer trainer(*conductor, cfg.training);
  TrainerState state = state_for(rt, c.checkpoint);

  const fs::path out_dir = out_dir_opt.empty() ? fs::path(cfg.paths.checkpoint_dir) : fs::path(out_dir_opt);
  fs::create_directories(out_dir);
  const auto curve = trainer.train(state, data, [&](int epoch, const TrainerState& s) {
    save_checkpoint(make_checkpoint(s, cfg.seed, rt.backends()), out_dir / ("epoch-" + std::to_string(epoch) + ".json"));
  });
  save_checkpoint(make_checkpoint(state, cfg.seed, rt.backends()), out_dir / "final.json");
  const std::string table = format_curve(curve);
  if (!curve_path.empty()) {
    std::ofstream(curve_path) << table;
  } else {
    std::cout << table;
  }
  std::cerr << "trained " << state.step << " updates over " << state.episodes_seen << " episodes; checkpoint "
            << (out_dir / "final.json").string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& log_path) {
  const RunConfig cfg = load_config(c.config);
  const Dataset data = dataset_for(cfg, c);
  Runtime rt(cfg);
  auto conductor = rt.conductor(RoutingMode::Greedy);
  TrainerState state = state_for(rt, c.checkpoint);
  fs::path log_file = log_path.empty() ? fs::path(cfg.paths.log_dir) / "eval.jsonl" : fs::path(log_path);
  if (log_file.has_parent_path()) fs::create_directories(log_file.parent_path());
  TrajectoryLogWriter log(log_file);
  const auto result = evaluate(*conductor, state.params.role, state.params.model, state.stats, data, &log);
  std::cout << format_eval_report(result.report);
  std::cerr << "trajectory log: " << log_file.string() << "\n";
  return 0;
}

int cmd_route(const Common& c, const std::string& query) {
  const RunConfig cfg = load_config(c.config);
  Runtime rt(cfg);
  auto conductor = rt.conductor(RoutingMode::Greedy);
  TrainerState state = state_for(rt, c.checkpoint);
  const auto ep = conductor->run_episode("route-0", query, std::nullopt, state.params.role, state.params.model,
                                         state.stats, 0);
  print_trajectory(ep);
  return ep.trajectory.failed ? kExitRuntime : 0;
}

int cmd_report(const std::string& log_path, const std::string& dataset, bool long_form) {
  const auto trajs = read_trajectory_log(log_path);
  const Dataset data = load_dataset(dataset);
  const auto report = routing_report(trajs, data);
  if (long_form) {
    std::cout << format_histogram_long(report.by_difficulty, "difficulty") << "\n"
              << format_histogram_long(report.by_role, "role");
  } else {
    std::cout << format_histogram(report.by_difficulty, "difficulty") << "\n" << format_histogram(report.by_role, "role");
  }
  if (report.skipped_episodes > 0) std::cout << "skipped_episodes\t" << report.skipped_episodes << "\n";
  return 0;
}

int cmd_sweep(const Common& c, const std::string& lambdas, const std::string& thetas, const std::string& turns) {
  const RunConfig base = load_config(c.config);
  const std::string path = c.dataset.empty() ? base.paths.dataset : c.dataset;
  if (path.empty()) throw ConfigError("no dataset given (use --dataset or paths.dataset)");
  const Dataset all = load_dataset(path);
  const auto [train_set, test_set] = split(all, base.split_train, base.split_test, base.effective_split_seed());
  if (test_set.empty()) throw ConfigError("sweep needs a non-empty test split");

  const auto ls = lambdas.empty() ? std::vector<double>{base.training.lambda} : parse_list(lambdas);
  const auto ts = thetas.empty() ? std::vector<double>{base.conductor.theta} : parse_list(thetas);
  const auto ns = turns.empty() ? std::vector<double>{static_cast<double>(base.conductor.max_turns)} : parse_list(turns);

  std::cout << "lambda\ttheta\tmax_turns\taccuracy\ttotal_cost\tmean_cost\tmean_latency\tmean_turns\tearly_stop_rate\n";
  for (double l : ls) {
    for (double th : ts) {
      for (double n : ns) {
        RunConfig cfg = base;
        cfg.training.lambda = l;
        cfg.conductor.theta = th;
        cfg.conductor.max_turns = static_cast<int>(n);
        cfg.conductor.validate();
        cfg.training.validate();
        Runtime rt(cfg);
        TrainerState state = rt.initial_state();
        if (!train_set.empty()) {
          auto sampler = rt.conductor(RoutingMode::Sample);
          Trainer(*sampler, cfg.training).train(state, train_set);
        }
        auto greedy = rt.conductor(RoutingMode::Greedy);
        const auto r = evaluate(*greedy, state.params.role, state.params.model, state.stats, test_set).report;
        std::printf("%g\t%g\t%d\t%.4f\t%.8f\t%.8f\t%.4f\t%.3f\t%.4f\n", l, th, cfg.conductor.max_turns, r.accuracy,
                    r.total_cost, r.mean_cost, r.mean_latency, r.mean_turns, r.early_stop_rate);
        std::fflush(stdout);
      }
    }
  }
  return 0;
}

int cmd_synth(const std::string& kind, std::size_t n, double fraction, std::uint64_t seed, const std::string& out) {
  Dataset data;
  if (kind == "arithmetic") {
    data = make_arithmetic_tasks(n, fraction, seed);
  } else if (kind == "scripted") {
    data = make_scripted_tasks(n, fraction, seed);
  } else {
    throw ConfigError("synth kind must be arithmetic or scripted");
  }
  save_dataset(data, out);
  std::cerr << "wrote " << data.size() << " records to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint role and model routing over a pool of language-model backends"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_data) {
    sub->add_option("-c,--config", common.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--checkpoint", common.checkpoint, "Checkpoint to start from")->check(CLI::ExistingFile);
    if (needs_data) {
      sub->add_option("-d,--dataset", common.dataset, "Dataset (JSONL); defaults to paths.dataset");
      sub->add_option("--part", common.part, "Dataset part: all, train or test")
          ->check(CLI::IsMember({"all", "train", "test"}));
    }
  };

  auto* price = app.add_subcommand("price", "Price table utilities");
  price->require_subcommand(1);
  auto* fit = price->add_subcommand("fit", "Fit the price scaling exponent and fill missing prices");
  std::string price_config;
  fit->add_option("-c,--config", price_config, "Run configuration with a prices section")->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train", "Train the routers on a dataset");
  add_common(train, true);
  std::string out_dir, curve_path;
  int epochs = 0;
  train->add_option("--out-dir", out_dir, "Checkpoint directory (defaults to paths.checkpoint_dir)");
  train->add_option("--curve", curve_path, "Write the training curve here instead of stdout");
  train->add_option("--epochs", epochs, "Override training.epochs");

  auto* eval = app.add_subcommand("eval", "Greedy evaluation with a trajectory log");
  add_common(eval, true);
  std::string eval_log;
  eval->add_option("--log", eval_log, "Trajectory log path (defaults to <log_dir>/eval.jsonl)");

  auto* route = app.add_subcommand("route", "Run one query and print its trajectory");
  add_common(route, false);
  std::string query;
  route->add_option("-q,--query", query, "Query text")->required();

  auto* report = app.add_subcommand("report", "Model-selection histograms from a trajectory log");
  std::string report_log, report_data;
  bool long_form = false;
  report->add_option("--log", report_log, "Trajectory log")->required()->check(CLI::ExistingFile);
  report->add_option("-d,--dataset", report_data, "Dataset the log was produced from")->required()->check(CLI::ExistingFile);
  report->add_flag("--long", long_form, "Plot-ready long table");

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate over a lambda/theta/L grid");
  add_common(sweep, true);
  std::string lambdas, thetas, turns;
  sweep->add_option("--lambda", lambdas, "Comma-separated lambda values");
  sweep->add_option("--theta", thetas, "Comma-separated theta values");
  sweep->add_option("--turns", turns, "Comma-separated max-turn values");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_kind = "arithmetic", synth_out;
  std::size_t synth_n = 100;
  double synth_fraction = 0.7;
  std::uint64_t synth_seed = 0;
  synth->add_option("kind", synth_kind, "arithmetic or scripted")->check(CLI::IsMember({"arithmetic", "scripted"}));
  synth->add_option("-n", synth_n, "Number of records");
  synth->add_option("--fraction", synth_fraction, "Easy (or solvable) fraction");
  synth->add_option("--seed", synth_seed, "Seed");
  synth->add_option("-o,--out", synth_out, "Output JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (fit->parsed()) return cmd_price_fit(price_config);
    if (train->parsed()) return cmd_train(common, out_dir, curve_path, epochs);
    if (eval->parsed()) return cmd_eval(common, eval_log);
    if (route->parsed()) return cmd_route(common, query);
    if (report->parsed()) return cmd_report(report_log, report_data, long_form);
    if (sweep->parsed()) return cmd_sweep(common, lambdas, thetas, turns);
    if (synth->parsed()) return cmd_synth(synth_kind, synth_n, synth_fraction, synth_seed, synth_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  std::cerr << app.help();
  return kExitUsage;
}
