#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "maestro/backends.hpp"
#include "maestro/cost.hpp"
#include "maestro/state.hpp"

namespace maestro {

enum class RoleKind { Generate, Aggregate, Verify, Control };

struct RoleSpec {
  RoleId id;
  std::string description;
  std::string templ;  // placeholders: {query} {context} {candidates}
  RoleKind kind = RoleKind::Generate;
};

enum class Verdict { Pass, Fail, Unknown };

struct RoleOutput {
  RoleId role;
  std::string text;
  std::optional<std::string> answer;
  std::optional<Verdict> verdict;  // verify roles only
};

// Checks a candidate answer without access to the gold answer.
using VerifierHook = std::function<Verdict(std::string_view answer)>;

// Pass iff the answer parses and evaluates as arithmetic.
Verdict arithmetic_verifier(std::string_view answer);

class RoleRegistry {
 public:
  RoleRegistry() = default;
  // Rejects duplicates, empty descriptions, and templates that do not match the kind.
  // EarlyStop is required unless `require_early_stop` is false.
  explicit RoleRegistry(std::vector<RoleSpec> roles, bool require_early_stop = true);

  static RoleRegistry defaults();

  [[nodiscard]] const std::vector<RoleSpec>& roles() const noexcept { return roles_; }
  [[nodiscard]] const std::vector<RoleId>& ids() const noexcept { return ids_; }
  [[nodiscard]] const RoleSpec& at(const RoleId& id) const;
  [[nodiscard]] std::size_t index_of(const RoleId& id) const;
  [[nodiscard]] bool contains(const RoleId& id) const;
  [[nodiscard]] std::size_t size() const noexcept { return roles_.size(); }

  // Sorts registry indices into intra-turn execution order: Decomposer, Generator,
  // GeneratorCoT, Programmer, Critique, Verifier, Refiner, Ensembler, then any
  // other role in declaration order.
  [[nodiscard]] std::vector<std::size_t> execution_order(std::vector<std::size_t> indices) const;

  // A copy without the named role (used for cap-enforcement experiments).
  [[nodiscard]] RoleRegistry without(const RoleId& id) const;

 private:
  std::vector<RoleSpec> roles_;
  std::vector<RoleId> ids_;
};

// Last line of the form "Answer: <x>", trimmed.
std::optional<std::string> extract_answer_line(std::string_view text);
// Body of the last ``` fenced block.
std::optional<std::string> extract_last_code_block(std::string_view text);
// Role-specific convention: Programmer prefers the code block, everyone else the answer line.
std::optional<std::string> extract_answer(const RoleId& role, std::string_view text);

struct PromptOptions {
  std::size_t char_budget = 4000;
};

std::string render_prompt(const RoleSpec& spec, const ReasoningState& state, const PromptOptions& opts = {});

struct ExecutionOptions {
  std::size_t char_budget = 4000;
  int max_tokens = 512;
  VerifierHook verifier = arithmetic_verifier;
};

struct RoleExecution {
  RoleOutput output;
  Completion completion;
  CostRecord cost;
  std::string prompt;
};

// Renders the prompt, calls the backend, extracts the answer, prices the call.
// Never touches `state`.
RoleExecution execute_role(const RoleSpec& spec, Backend& backend, const ReasoningState& state, std::uint64_t seed,
                           const ExecutionOptions& opts = {});

std::string_view to_string(RoleKind kind);
RoleKind role_kind_from_string(std::string_view s);
std::string_view to_string(Verdict v);

}  // namespace maestro
