#include "maestro/arith.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace maestro {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  std::optional<double> parse() {
    auto v = expr();
    skip_ws();
    if (!v || pos_ != s_.size() || !std::isfinite(*v)) return std::nullopt;
    return v;
  }

 private:
  static constexpr int kMaxDepth = 64;

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::optional<double> expr() {
    auto lhs = term();
    while (lhs) {
      if (eat('+')) {
        auto rhs = term();
        if (!rhs) return std::nullopt;
        *lhs += *rhs;
      } else if (eat('-')) {
        auto rhs = term();
        if (!rhs) return std::nullopt;
        *lhs -= *rhs;
      } else {
        break;
      }
    }
    return lhs;
  }

  std::optional<double> term() {
    auto lhs = unary();
    while (lhs) {
      if (eat('*')) {
        auto rhs = unary();
        if (!rhs) return std::nullopt;
        *lhs *= *rhs;
      } else if (eat('/')) {
        auto rhs = unary();
        if (!rhs || *rhs == 0.0) return std::nullopt;
        *lhs /= *rhs;
      } else {
        break;
      }
    }
    return lhs;
  }

  // Exponent binds tighter than unary minus on its left: -2^2 == -4.
  std::optional<double> power() {
    auto base = primary();
    if (base && eat('^')) {
      auto exp = unary();
      if (!exp) return std::nullopt;
      return std::pow(*base, *exp);
    }
    return base;
  }

  std::optional<double> unary() {
    if (++depth_ > kMaxDepth) return std::nullopt;
    std::optional<double> v;
    if (eat('-')) {
      v = unary();
      if (v) v = -*v;
    } else if (eat('+')) {
      v = unary();
    } else {
      v = power();
    }
    --depth_;
    return v;
  }

  std::optional<double> primary() {
    if (eat('(')) {
      auto v = expr();
      if (!v || !eat(')')) return std::nullopt;
      return v;
    }
    skip_ws();
    const std::size_t start = pos_;
    bool digits = false;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
      digits = true;
    }
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
        digits = true;
      }
    }
    if (!digits) return std::nullopt;
    const std::string tok(s_.substr(start, pos_ - start));
    return std::strtod(tok.c_str(), nullptr);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace

std::optional<double> evaluate_arithmetic(std::string_view expr) {
  if (expr.size() > 4096) return std::nullopt;
  return Parser(expr).parse();
}

std::string format_number(double v) {
  if (v == 0.0) return "0";
  if (std::fabs(v) < 1e15 && v == std::trunc(v)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace maestro
