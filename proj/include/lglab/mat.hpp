#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "lglab/rng.hpp"

namespace lglab {

// Dense row-major matrix of doubles. Just enough linear algebra for the
// position-embedding operators; the training kernels work on raw buffers.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

  std::span<const double> row(int r) const {
    return {v.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  static Mat random(int r, int c, Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    for (auto& x : m.v) x = rng.uniform(-scale, scale);
    return m;
  }

  // y = M x
  std::vector<double> apply(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != cols) throw std::invalid_argument("Mat::apply: dimension mismatch");
    std::vector<double> y(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (int c = 0; c < cols; ++c) acc += at(r, c) * x[c];
      y[r] = acc;
    }
    return y;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace lglab
