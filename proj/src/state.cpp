#include "maestro/state.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <memory>

#include "maestro/errors.hpp"

namespace maestro {

namespace {

std::string render_block(const ContextEntry& e) {
  std::string out = "[turn " + std::to_string(e.turn) + " | " + e.role.name + " | " + e.model.name + "]\n";
  out += e.text;
  return out;
}

constexpr std::string_view kSeparator = "\n\n";

bool is_utf8_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

}  // namespace

ReasoningState ReasoningState::advanced(std::vector<ContextEntry> entries) const {
  ReasoningState next = *this;
  for (auto& e : entries) {
    if (e.turn != turn) throw ContractError("context entry turn does not match the state turn");
    next.context.push_back(std::move(e));
  }
  next.turn = turn + 1;
  return next;
}

std::string render_context(const ReasoningState& state, std::size_t char_budget) {
  if (char_budget < 64) throw ContractError("char_budget must be at least 64");
  const auto& ctx = state.context;
  if (ctx.empty()) return {};

  std::vector<std::string> blocks;
  blocks.reserve(ctx.size());
  for (const auto& e : ctx) blocks.push_back(render_block(e));

  // Walk backwards from the newest block, keeping whole blocks while they fit.
  std::size_t first = blocks.size();
  std::size_t used = 0;
  while (first > 0) {
    std::size_t extra = blocks[first - 1].size() + (first == blocks.size() ? 0 : kSeparator.size());
    if (used + extra > char_budget) break;
    used += extra;
    --first;
  }

  if (first == blocks.size()) {
    // Newest block alone exceeds the budget: keep its tail on a UTF-8 boundary.
    const std::string& last = blocks.back();
    std::size_t start = last.size() - char_budget;
    while (start < last.size() && is_utf8_continuation(last[start])) ++start;
    return last.substr(start);
  }

  std::string out;
  out.reserve(used);
  for (std::size_t i = first; i < blocks.size(); ++i) {
    if (i != first) out += kSeparator;
    out += blocks[i];
  }
  return out;
}

std::string canonical_rendering(const ReasoningState& state) {
  // Length-prefixed fields keep the encoding injective.
  std::string out;
  auto field = [&out](std::string_view s) {
    out += std::to_string(s.size());
    out += ':';
    out += s;
    out += '\n';
  };
  field(state.query);
  out += "turn=" + std::to_string(state.turn) + "\n";
  for (const auto& e : state.context) {
    out += std::to_string(e.turn) + "\n";
    field(e.role.name);
    field(e.model.name);
    field(e.text);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), text.data(), text.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

std::string state_digest(const ReasoningState& state) { return sha256_hex(canonical_rendering(state)); }

std::string validate_turn_record(const TurnRecord& rec) {
  if (rec.turn < 0) return "turn index is negative";
  if (rec.early_stop && !rec.calls.empty()) return "early_stop record carries calls";
  if (rec.selected.empty()) return "no selected roles";
  for (const auto& c : rec.calls) {
    if (!(c.cost >= 0.0)) return "negative cost";
    if (!(c.conf_adj >= 0.0 && c.conf_adj <= 1.0)) return "conf_adj outside [0,1]";
    if (!(c.conf_base <= 0.0)) return "conf_base above zero";
    if (c.tokens_in < 0 || c.tokens_out < 0) return "negative token count";
    if (!(c.latency >= 0.0)) return "negative latency";
    if (c.role == kEarlyStop) return "EarlyStop executed as a call";
  }
  return {};
}

std::string validate_trajectory(const Trajectory& traj, int max_turns) {
  if (static_cast<int>(traj.turns.size()) > max_turns) return "more turns than the cap";
  for (std::size_t i = 0; i < traj.turns.size(); ++i) {
    const auto& t = traj.turns[i];
    if (t.turn != static_cast<int>(i)) return "turn indices are not consecutive";
    if (auto err = validate_turn_record(t); !err.empty()) return err;
    if (t.early_stop && i + 1 != traj.turns.size()) return "early_stop record is not the last";
  }
  return {};
}

}  // namespace maestro
