#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maestro {

// Strongly typed identifiers so a role name is never passed where a model name is expected.
template <typename Tag>
struct Id {
  std::string name;

  Id() = default;
  explicit Id(std::string n) : name(std::move(n)) {}

  [[nodiscard]] bool empty() const noexcept { return name.empty(); }
  auto operator<=>(const Id&) const = default;
};

struct RoleTag {};
struct ModelTag {};
using RoleId = Id<RoleTag>;
using ModelId = Id<ModelTag>;

inline const RoleId kEarlyStop{"EarlyStop"};

struct ContextEntry {
  int turn = 0;
  RoleId role;
  ModelId model;
  std::string text;
};

// Reasoning state: the query plus the ordered outputs of all completed turns.
// `turn` is the index of the next turn to run.
struct ReasoningState {
  std::string query;
  std::vector<ContextEntry> context;
  int turn = 0;

  static ReasoningState initial(std::string query) { return ReasoningState{std::move(query), {}, 0}; }

  // Next state: appends one turn's entries (already in canonical role order).
  [[nodiscard]] ReasoningState advanced(std::vector<ContextEntry> entries) const;
};

struct PostDecisionState {
  const ReasoningState* state = nullptr;
  RoleId role;
  ModelId model;
};

struct RoleChoice {
  RoleId role;
  double prob = 0.0;
};

struct CallRecord {
  RoleId role;
  ModelId model;
  double model_prob = 0.0;
  double model_logprob = 0.0;
  double conf_base = 0.0;
  double conf_adj = 0.0;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double cost = 0.0;
  double latency = 0.0;
  std::optional<std::string> answer;
};

struct TurnRecord {
  int turn = 0;
  std::vector<RoleChoice> selected;
  double selection_logprob = 0.0;
  std::vector<CallRecord> calls;
  bool early_stop = false;
};

struct Trajectory {
  std::string episode_id;
  std::string query;
  std::optional<std::string> gold;
  std::vector<TurnRecord> turns;
  std::string final_answer;
  double total_cost = 0.0;
  double total_latency = 0.0;
  std::optional<int> reward;
  bool failed = false;
  std::string failure;
};

// Renders context entries as "[turn t | role | model]\n<text>" blocks joined by a
// blank line. Over budget, whole oldest blocks are dropped; if the newest block alone
// is still too long, its head is cut so only its tail remains.
std::string render_context(const ReasoningState& state, std::size_t char_budget);

// Full unbudgeted rendering used for digests.
std::string canonical_rendering(const ReasoningState& state);

// Hex SHA-256 of the canonical rendering.
std::string state_digest(const ReasoningState& state);

// Hex SHA-256 of arbitrary text.
std::string sha256_hex(std::string_view text);

// Checks TurnRecord invariants; returns an empty string when valid, else the violated rule.
std::string validate_turn_record(const TurnRecord& rec);

// Checks trajectory-level invariants against a turn cap.
std::string validate_trajectory(const Trajectory& traj, int max_turns);

}  // namespace maestro

template <typename Tag>
struct std::hash<maestro::Id<Tag>> {
  std::size_t operator()(const maestro::Id<Tag>& id) const noexcept { return std::hash<std::string>{}(id.name); }
};
