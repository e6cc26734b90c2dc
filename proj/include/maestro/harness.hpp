#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "maestro/conductor.hpp"
#include "maestro/state.hpp"

namespace maestro {

class TrajectoryLogWriter;

struct TaskRecord {
  std::string id;
  std::string query;
  std::string gold;
  std::optional<int> difficulty;
  std::optional<std::string> family;
};

using Dataset = std::vector<TaskRecord>;

// Line-delimited JSON: {"id","query","gold","difficulty"?,"family"?} per line.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
void validate_dataset(const Dataset& data);

// Trim, drop a trailing period, strip a leading '+', canonicalize numbers.
std::string normalize_answer(std::string_view text);

// 1 iff the final "Answer: x" (or the whole text) matches gold after normalization.
int judge(std::string_view answer_text, std::string_view gold);

// Seeded shuffle, then the first round(n * train_parts / total) records go to train.
std::pair<Dataset, Dataset> split(const Dataset& data, int train_parts, int test_parts, std::uint64_t seed);

struct EvalReport {
  std::size_t episodes = 0;
  std::size_t judged = 0;
  std::size_t failed = 0;
  double accuracy = 0.0;
  double total_cost = 0.0;
  double mean_cost = 0.0;
  double mean_latency = 0.0;
  double mean_turns = 0.0;
  double early_stop_rate = 0.0;
};

struct EvalResult {
  EvalReport report;
  std::vector<EpisodeResult> episodes;
};

// One greedy episode per record; failed episodes count as incorrect and are
// excluded from the cost/latency/turn means.
EvalResult evaluate(const Conductor& conductor, const RolePolicyParams& role_params,
                    const ModelPolicyParams& model_params, RunningStats& stats, const Dataset& data,
                    TrajectoryLogWriter* log = nullptr);

// Aggregates a report from already judged trajectories.
EvalReport summarize(std::span<const Trajectory> trajectories, std::span<const Termination> terminations);

struct Histogram {
  std::vector<std::string> row_labels;
  std::vector<std::string> models;           // column order
  std::vector<std::vector<double>> fractions;  // each row sums to 1
  std::vector<std::size_t> counts;             // calls per row
};

struct RoutingReport {
  Histogram by_difficulty;
  Histogram by_role;
  std::size_t skipped_episodes = 0;
};

// Per-difficulty and per-role model-selection histograms over logged calls.
// Episodes whose id has no dataset record are skipped and counted.
RoutingReport routing_report(std::span<const Trajectory> trajectories, const Dataset& data,
                             std::span<const ModelId> model_order = {});

std::string format_eval_report(const EvalReport& r);
// Wide table: one row per label, one column per model.
std::string format_histogram(const Histogram& h, std::string_view label_header);
// Long table: label, model, fraction.
std::string format_histogram_long(const Histogram& h, std::string_view label_header);

// Synthetic arithmetic families. Easy queries start with "Quick sum:", hard ones
// with "Multi-step challenge:"; each carries its expression in backticks.
Dataset make_arithmetic_tasks(std::size_t n, double easy_fraction, std::uint64_t seed);

// Scripted families "[solvable]" / "[unsolvable]" for mocks keyed to correctness.
Dataset make_scripted_tasks(std::size_t n, double solvable_fraction, std::uint64_t seed);

}  // namespace maestro
