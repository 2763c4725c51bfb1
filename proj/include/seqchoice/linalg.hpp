// linalg.hpp — dense row-major matrix and the handful of BLAS-1/2 pieces the
// trainers need. Everything is double precision.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqchoice/common.hpp"

namespace seqchoice {

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {a.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {a.data() + r * cols, cols}; }

  bool empty() const { return rows == 0 || cols == 0; }
};

using Vec = std::vector<double>;

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

// y = W x + b, W is (out x in).
inline void affine(const Mat& W, std::span<const double> x, std::span<const double> b,
                   std::span<double> y) {
  for (std::size_t r = 0; r < W.rows; ++r) y[r] = dot(W.row(r), x) + b[r];
}

// dx = W^T g.
inline void matT_vec(const Mat& W, std::span<const double> g, std::span<double> dx) {
  for (std::size_t c = 0; c < W.cols; ++c) dx[c] = 0.0;
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double gr = g[r];
    auto wr = W.row(r);
    for (std::size_t c = 0; c < W.cols; ++c) dx[c] += wr[c] * gr;
  }
}

// dW += g x^T.
inline void accum_outer(Mat& dW, std::span<const double> g, std::span<const double> x) {
  for (std::size_t r = 0; r < dW.rows; ++r) {
    auto dr = dW.row(r);
    const double gr = g[r];
    for (std::size_t c = 0; c < dW.cols; ++c) dr[c] += gr * x[c];
  }
}

inline double sq_dist(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

// Solves A x = b for symmetric positive definite A via Cholesky, in place on
// copies. Returns false if a pivot collapses.
bool solve_spd(Mat A, Vec b, Vec& x);

}  // namespace seqchoice
