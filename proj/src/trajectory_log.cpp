#include "maestro/trajectory_log.hpp"

#include <chrono>
#include <ctime>
#include <map>
#include <sstream>

#include "maestro/errors.hpp"

namespace maestro {

std::string wall_clock_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json turn_record_json(const std::string& episode_id, const TurnRecord& rec) {
  ordered_json j;
  j["record"] = "turn";
  j["episode"] = episode_id;
  j["turn"] = rec.turn;
  j["early_stop"] = rec.early_stop;
  ordered_json selected = ordered_json::array();
  for (const auto& s : rec.selected) selected.push_back({{"role", s.role.name}, {"prob", s.prob}});
  j["selected"] = std::move(selected);
  j["selection_logprob"] = rec.selection_logprob;
  ordered_json calls = ordered_json::array();
  for (const auto& c : rec.calls) {
    ordered_json cj;
    cj["role"] = c.role.name;
    cj["model"] = c.model.name;
    cj["model_prob"] = c.model_prob;
    cj["model_logprob"] = c.model_logprob;
    cj["conf_base"] = c.conf_base;
    cj["conf_adj"] = c.conf_adj;
    cj["tokens_in"] = c.tokens_in;
    cj["tokens_out"] = c.tokens_out;
    cj["cost"] = c.cost;
    cj["latency"] = c.latency;
    cj["answer"] = c.answer ? ordered_json(*c.answer) : ordered_json(nullptr);
    calls.push_back(std::move(cj));
  }
  j["calls"] = std::move(calls);
  return j;
}

ordered_json episode_summary_json(const Trajectory& traj, std::string_view terminated_by) {
  ordered_json j;
  j["record"] = "episode";
  j["episode"] = traj.episode_id;
  j["query"] = traj.query;
  j["gold"] = traj.gold ? ordered_json(*traj.gold) : ordered_json(nullptr);
  j["turns"] = traj.turns.size();
  j["final_answer"] = traj.final_answer;
  j["total_cost"] = traj.total_cost;
  j["total_latency"] = traj.total_latency;
  j["reward"] = traj.reward ? ordered_json(*traj.reward) : ordered_json(nullptr);
  j["failed"] = traj.failed;
  j["failure"] = traj.failure;
  j["terminated_by"] = terminated_by;
  return j;
}

TurnRecord turn_record_from_json(const nlohmann::json& j) {
  TurnRecord rec;
  rec.turn = j.at("turn").get<int>();
  rec.early_stop = j.at("early_stop").get<bool>();
  for (const auto& s : j.at("selected")) rec.selected.push_back({RoleId{s.at("role").get<std::string>()}, s.at("prob").get<double>()});
  rec.selection_logprob = j.at("selection_logprob").get<double>();
  for (const auto& cj : j.at("calls")) {
    CallRecord c;
    c.role = RoleId{cj.at("role").get<std::string>()};
    c.model = ModelId{cj.at("model").get<std::string>()};
    c.model_prob = cj.at("model_prob").get<double>();
    c.model_logprob = cj.at("model_logprob").get<double>();
    c.conf_base = cj.at("conf_base").get<double>();
    c.conf_adj = cj.at("conf_adj").get<double>();
    c.tokens_in = cj.at("tokens_in").get<std::int64_t>();
    c.tokens_out = cj.at("tokens_out").get<std::int64_t>();
    c.cost = cj.at("cost").get<double>();
    c.latency = cj.at("latency").get<double>();
    if (cj.contains("answer") && !cj["answer"].is_null()) c.answer = cj["answer"].get<std::string>();
    rec.calls.push_back(std::move(c));
  }
  return rec;
}

TrajectoryLogWriter::TrajectoryLogWriter(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open trajectory log " + path.string());
}

void TrajectoryLogWriter::write(const Trajectory& traj, std::string_view terminated_by) {
  std::lock_guard lock(mu_);
  const std::string stamp = wall_clock_now();
  for (const auto& rec : traj.turns) {
    auto j = turn_record_json(traj.episode_id, rec);
    j["wall_clock"] = stamp;
    out_ << j.dump() << '\n';
  }
  auto s = episode_summary_json(traj, terminated_by);
  s["wall_clock"] = stamp;
  out_ << s.dump() << '\n';
  out_.flush();
}

std::vector<Trajectory> read_trajectory_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory log " + path.string());
  std::vector<Trajectory> out;
  std::map<std::string, std::size_t> open;  // episode id -> index of the unfinished trajectory
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("trajectory log line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string id = j.at("episode").get<std::string>();
    auto it = open.find(id);
    if (it == open.end()) {
      out.push_back(Trajectory{});
      out.back().episode_id = id;
      it = open.emplace(id, out.size() - 1).first;
    }
    Trajectory& traj = out[it->second];
    const std::string kind = j.at("record").get<std::string>();
    if (kind == "turn") {
      traj.turns.push_back(turn_record_from_json(j));
    } else if (kind == "episode") {
      traj.query = j.at("query").get<std::string>();
      if (!j.at("gold").is_null()) traj.gold = j["gold"].get<std::string>();
      traj.final_answer = j.at("final_answer").get<std::string>();
      traj.total_cost = j.at("total_cost").get<double>();
      traj.total_latency = j.at("total_latency").get<double>();
      if (!j.at("reward").is_null()) traj.reward = j["reward"].get<int>();
      traj.failed = j.at("failed").get<bool>();
      traj.failure = j.at("failure").get<std::string>();
      open.erase(it);
    } else {
      throw ConfigError("trajectory log line " + std::to_string(lineno) + ": unknown record kind '" + kind + "'");
    }
  }
  return out;
}

std::string strip_wall_clock(const std::string& log_text) {
  std::istringstream in(log_text);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      auto j = ordered_json::parse(line);
      j.erase("wall_clock");
      out += j.dump();
    }
    out += '\n';
  }
  return out;
}

}  // namespace maestro
