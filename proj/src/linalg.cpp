#include "seqchoice/linalg.hpp"

#include <cmath>

namespace seqchoice {

bool solve_spd(Mat A, Vec b, Vec& x) {
  const std::size_t n = A.rows;
  if (n != A.cols || b.size() != n) return false;
  // Cholesky A = L L^T, stored in the lower triangle of A.
  for (std::size_t j = 0; j < n; ++j) {
    double d = A(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= A(j, k) * A(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    A(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
      A(i, j) = s / ljj;
    }
  }
  // Forward then backward substitution.
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= A(i, k) * b[k];
    b[i] = s / A(i, i);
  }
  x.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= A(k, ii) * x[k];
    x[ii] = s / A(ii, ii);
  }
  return true;
}

}  // namespace seqchoice
