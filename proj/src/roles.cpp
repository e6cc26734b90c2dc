#include "maestro/roles.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "maestro/arith.hpp"
#include "maestro/errors.hpp"

namespace maestro {

namespace {

constexpr std::array<std::string_view, 8> kExecutionOrder = {
    "Decomposer", "Generator", "GeneratorCoT", "Programmer", "Critique", "Verifier", "Refiner", "Ensembler",
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

struct Placeholder {
  std::string_view key;
  std::string_view value;
};

// Single pass, so substituted text is never re-expanded.
std::string expand(std::string_view templ, std::initializer_list<Placeholder> values) {
  std::string out;
  out.reserve(templ.size());
  std::size_t i = 0;
  while (i < templ.size()) {
    bool replaced = false;
    if (templ[i] == '{') {
      for (const auto& p : values) {
        if (templ.substr(i, p.key.size()) == p.key) {
          out += p.value;
          i += p.key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += templ[i++];
  }
  return out;
}

}  // namespace

std::string_view to_string(RoleKind kind) {
  switch (kind) {
    case RoleKind::Generate: return "generate";
    case RoleKind::Aggregate: return "aggregate";
    case RoleKind::Verify: return "verify";
    case RoleKind::Control: return "control";
  }
  return "generate";
}

RoleKind role_kind_from_string(std::string_view s) {
  if (s == "generate") return RoleKind::Generate;
  if (s == "aggregate") return RoleKind::Aggregate;
  if (s == "verify") return RoleKind::Verify;
  if (s == "control") return RoleKind::Control;
  throw ConfigError("unknown role kind '" + std::string(s) + "'");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Unknown: return "unknown";
  }
  return "unknown";
}

Verdict arithmetic_verifier(std::string_view answer) {
  return evaluate_arithmetic(answer) ? Verdict::Pass : Verdict::Fail;
}

RoleRegistry::RoleRegistry(std::vector<RoleSpec> roles, bool require_early_stop) : roles_(std::move(roles)) {
  if (roles_.empty()) throw ConfigError("role registry is empty");
  bool has_stop = false;
  for (const auto& r : roles_) {
    if (r.id.empty()) throw ConfigError("role with an empty id");
    if (std::find(ids_.begin(), ids_.end(), r.id) != ids_.end()) throw ConfigError("duplicate role " + r.id.name);
    if (r.description.empty()) throw ConfigError("role " + r.id.name + " has no description");
    if (r.id == kEarlyStop) {
      if (r.kind != RoleKind::Control || !r.templ.empty()) {
        throw ConfigError("EarlyStop must be a control role without a template");
      }
      has_stop = true;
    } else if (r.kind == RoleKind::Control) {
      throw ConfigError("only EarlyStop may be a control role");
    } else if (r.templ.empty()) {
      throw ConfigError("role " + r.id.name + " has no prompt template");
    }
    ids_.push_back(r.id);
  }
  if (require_early_stop && !has_stop) throw ConfigError("role registry must contain EarlyStop");
  if (ids_.size() == 1 && has_stop) throw ConfigError("role registry has no executable role");
}

const RoleSpec& RoleRegistry::at(const RoleId& id) const { return roles_[index_of(id)]; }

std::size_t RoleRegistry::index_of(const RoleId& id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) return i;
  }
  throw ConfigError("unknown role '" + id.name + "'");
}

bool RoleRegistry::contains(const RoleId& id) const { return std::find(ids_.begin(), ids_.end(), id) != ids_.end(); }

std::vector<std::size_t> RoleRegistry::execution_order(std::vector<std::size_t> indices) const {
  auto rank = [&](std::size_t idx) {
    const auto& name = ids_.at(idx).name;
    auto it = std::find(kExecutionOrder.begin(), kExecutionOrder.end(), name);
    return it != kExecutionOrder.end() ? static_cast<std::size_t>(it - kExecutionOrder.begin())
                                       : kExecutionOrder.size() + idx;
  };
  std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) { return rank(a) < rank(b); });
  return indices;
}

RoleRegistry RoleRegistry::without(const RoleId& id) const {
  std::vector<RoleSpec> kept;
  for (const auto& r : roles_) {
    if (r.id != id) kept.push_back(r);
  }
  return RoleRegistry(std::move(kept), false);
}

RoleRegistry RoleRegistry::defaults() {
  const std::string tail = "\nQuestion: {query}\n\nPrevious work:\n{context}\n";
  std::vector<RoleSpec> r{
      {RoleId{"Decomposer"},
       "Decomposer breaks a complex problem into smaller ordered sub-problems and states what must be computed "
       "at each step before any solving happens.",
       "You are the Decomposer. Split the question into numbered sub-problems, then give the value you expect "
       "on a final line 'Answer: <value>'." + tail,
       RoleKind::Generate},
      {RoleId{"Generator"},
       "Generator drafts a direct answer to the question in a single pass, giving the final value without "
       "lengthy reasoning.",
       "You are the Generator. Answer the question directly and end with a line 'Answer: <value>'." + tail,
       RoleKind::Generate},
      {RoleId{"GeneratorCoT"},
       "GeneratorCoT solves the problem with explicit step-by-step chain-of-thought reasoning before stating "
       "the final answer.",
       "You are the GeneratorCoT agent. Think step by step, show each intermediate result, and end with a line "
       "'Answer: <value>'." + tail,
       RoleKind::Generate},
      {RoleId{"Programmer"},
       "Programmer writes a short program or executable expression that computes the answer, so the result "
       "can be checked by running it.",
       "You are the Programmer. Write code that computes the answer inside a fenced code block, and end with a "
       "line 'Answer: <value>'." + tail,
       RoleKind::Generate},
      {RoleId{"Critique"},
       "Critique reviews earlier reasoning, points out mistakes or gaps, and states whether the current answer "
       "should be trusted.",
       "You are the Critique agent. Review the previous work for errors, explain any you find, and end with "
       "the answer you believe is correct as 'Answer: <value>'." + tail,
       RoleKind::Generate},
      {RoleId{"Verifier"},
       "Verifier checks a proposed answer by recomputing or executing it and reports whether it passes the "
       "check.",
       "You are the Verifier. Recompute the result independently, report whether the previous answer is "
       "correct, and end with 'Answer: <value>'." + tail,
       RoleKind::Verify},
      {RoleId{"Refiner"},
       "Refiner revises the current solution, fixing errors raised by critics or verifiers and producing an "
       "improved final answer.",
       "You are the Refiner. Improve the previous solution using any feedback in the context, and end with "
       "'Answer: <value>'." + tail,
       RoleKind::Generate},
      {RoleId{"Ensembler"},
       "Ensembler compares the candidate answers produced so far and selects or combines them into one final "
       "answer.",
       "You are the Ensembler. Compare the candidate answers below and select the most reliable one. End with "
       "'Answer: <value>'.\nQuestion: {query}\n\nCandidates:\n{candidates}\n\nPrevious work:\n{context}\n",
       RoleKind::Aggregate},
      {kEarlyStop,
       "EarlyStop ends the reasoning process because the current answer is already sufficient and more work "
       "would only add cost.",
       "", RoleKind::Control},
  };
  return RoleRegistry(std::move(r));
}

std::optional<std::string> extract_answer_line(std::string_view text) {
  std::optional<std::string> found;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    constexpr std::string_view kTag = "Answer:";
    if (line.substr(0, kTag.size()) == kTag) {
      auto value = trim(line.substr(kTag.size()));
      if (!value.empty()) found = std::string(value);
    }
    start = end + 1;
  }
  return found;
}

std::optional<std::string> extract_last_code_block(std::string_view text) {
  std::optional<std::string> found;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("```", pos);
    if (open == std::string_view::npos) break;
    auto body_start = text.find('\n', open + 3);
    if (body_start == std::string_view::npos) break;
    ++body_start;
    const auto close = text.find("```", body_start);
    if (close == std::string_view::npos) break;
    std::string_view body = text.substr(body_start, close - body_start);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.remove_suffix(1);
    found = std::string(body);
    pos = close + 3;
  }
  return found;
}

std::optional<std::string> extract_answer(const RoleId& role, std::string_view text) {
  if (role.name == "Programmer") {
    if (auto code = extract_last_code_block(text)) return code;
  }
  return extract_answer_line(text);
}

std::string render_prompt(const RoleSpec& spec, const ReasoningState& state, const PromptOptions& opts) {
  if (spec.kind == RoleKind::Control) throw ContractError("control role has no prompt");
  std::string candidates;
  if (spec.kind == RoleKind::Aggregate) {
    int n = 0;
    for (const auto& e : state.context) {
      if (auto ans = extract_answer(e.role, e.text)) {
        candidates += std::to_string(++n) + ". " + *ans + " (turn " + std::to_string(e.turn) + ", " + e.role.name + ")\n";
      }
    }
  }
  const std::string context = render_context(state, opts.char_budget);
  return expand(spec.templ, {{"{query}", state.query}, {"{context}", context}, {"{candidates}", candidates}});
}

RoleExecution execute_role(const RoleSpec& spec, Backend& backend, const ReasoningState& state, std::uint64_t seed,
                           const ExecutionOptions& opts) {
  RoleExecution ex;
  ex.prompt = render_prompt(spec, state, {opts.char_budget});
  GenerationRequest req{ex.prompt, opts.max_tokens, 0.0, seed};
  ex.completion = backend.generate(req);

  ex.output.role = spec.id;
  ex.output.text = ex.completion.text;
  ex.output.answer = extract_answer(spec.id, ex.completion.text);
  if (spec.kind == RoleKind::Verify) {
    ex.output.verdict = ex.output.answer && opts.verifier ? opts.verifier(*ex.output.answer) : Verdict::Unknown;
  }

  const auto& price = backend.spec().price;
  ex.cost = CostRecord{backend.model(), spec.id, ex.completion.tokens_in, ex.completion.tokens_out,
                       call_cost(ex.completion.tokens_in, ex.completion.tokens_out, price)};
  return ex;
}

}  // namespace maestro
