#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace maestro {

// Safe arithmetic evaluator: decimal numbers, + - * / ^ (right-associative),
// unary +/-, parentheses. Nothing else is accepted. Returns nullopt on any parse
// error, division by zero, or non-finite result.
std::optional<double> evaluate_arithmetic(std::string_view expr);

// Canonical decimal text: integers without a fractional part, otherwise up to 12
// significant digits with trailing zeros removed.
std::string format_number(double v);

}  // namespace maestro
