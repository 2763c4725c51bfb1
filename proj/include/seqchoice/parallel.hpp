// parallel.hpp — OpenMP work sharing with a serial reference path.
//
// Every parallel site in the project follows the same discipline: iteration i
// writes only to slot i of a pre-sized output and draws randomness from a
// seed derived from i. Under that discipline the serial path (jobs == 1) and
// the OpenMP path produce bit-identical results, which the determinism tests
// and the `--jobs` CLI contract rely on.
#pragma once

#include <cstdint>

namespace seqchoice::par {

// Process-wide worker count; 1 = serial reference mode.
int jobs();
void set_jobs(int n);

template <class F>
void parallel_for(std::int64_t n, F&& fn) {
  if (n <= 0) return;
  const int nthreads = jobs();
  if (nthreads <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads)
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#else
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace seqchoice::par
