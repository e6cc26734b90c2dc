#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maestro/state.hpp"

namespace maestro {

using ordered_json = nlohmann::ordered_json;

// Line-delimited JSON trajectory log. Each TurnRecord becomes one
// {"record":"turn",...} line; each finished episode adds one {"record":"episode",...}
// summary line. Every line ends with a "wall_clock" field, the only
// non-deterministic part of the record.
ordered_json turn_record_json(const std::string& episode_id, const TurnRecord& rec);
ordered_json episode_summary_json(const Trajectory& traj, std::string_view terminated_by);

TurnRecord turn_record_from_json(const nlohmann::json& j);

class TrajectoryLogWriter {
 public:
  explicit TrajectoryLogWriter(const std::filesystem::path& path, bool append = false);

  void write(const Trajectory& traj, std::string_view terminated_by);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

// Rebuilds trajectories from a log, in file order. Lines without a closing
// episode record are returned as unfinished trajectories.
std::vector<Trajectory> read_trajectory_log(const std::filesystem::path& path);

// Removes the wall_clock field from every line; used for replay comparisons.
std::string strip_wall_clock(const std::string& log_text);

std::string wall_clock_now();

}  // namespace maestro
