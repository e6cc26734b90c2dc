#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "maestro/errors.hpp"
#include "maestro/rng.hpp"

namespace maestro {

// Dense row-major matrix of doubles. Router parameters are small (<10^5
// entries), so a plain vector beats pulling in a linear-algebra dependency.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw ConfigError("matrix data does not match its shape");
  }

  static Matrix uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data_) v = rng.uniform(-bound, bound);
    return m;
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

  [[nodiscard]] bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  // y = M x
  [[nodiscard]] std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != cols_) throw ConfigError("dimension mismatch in matrix-vector product");
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* w = data_.data() + r * cols_;
      double acc = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) acc += w[c] * x[c];
      y[r] = acc;
    }
    return y;
  }

  // M += scale * a b^T
  void add_outer(std::span<const double> a, std::span<const double> b, double scale) {
    for (std::size_t r = 0; r < rows_; ++r) {
      const double ar = scale * a[r];
      if (ar == 0.0) continue;
      double* w = data_.data() + r * cols_;
      for (std::size_t c = 0; c < cols_; ++c) w[c] += ar * b[c];
    }
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

// Numerically stable softmax via max subtraction.
inline std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  if (p.empty()) return p;
  double mx = p[0];
  for (double s : p) mx = s > mx ? s : mx;
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  if (out.empty()) return out;
  double mx = out[0];
  for (double s : out) mx = s > mx ? s : mx;
  double z = 0.0;
  for (double s : out) z += std::exp(s - mx);
  const double lse = mx + std::log(z);
  for (double& v : out) v -= lse;
  return out;
}

}  // namespace maestro
