#pragma once

#include <omp.h>

#include <cstddef>
#include <vector>

namespace cosserat {

// Deterministic OpenMP helpers. Reductions accumulate per-thread partials and
// combine them in thread order, so results are reproducible for a fixed thread
// count (and bitwise reproducible at any count for the row-owned kernels).

inline int max_threads() { return omp_get_max_threads(); }

inline void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

inline double det_dot(const double* a, const double* b, std::size_t n) {
  int nt = max_threads();
  std::vector<double> partial(nt, 0.0);
#pragma omp parallel
  {
    int t = omp_get_thread_num();
    double s = 0.0;
#pragma omp for schedule(static)
    for (long i = 0; i < (long)n; ++i) s += a[i] * b[i];
    partial[t] = s;
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

inline double det_dot(const std::vector<double>& a, const std::vector<double>& b) {
  return det_dot(a.data(), b.data(), a.size());
}

// y += c*x
inline void axpy(double c, const std::vector<double>& x, std::vector<double>& y) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < (long)y.size(); ++i) y[i] += c * x[i];
}

}  // namespace cosserat
