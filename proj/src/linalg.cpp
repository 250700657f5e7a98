#include "cosserat/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "cosserat/errors.hpp"
#include "cosserat/parallel.hpp"

namespace cosserat {

void CsrMatrix::apply(const double* x, double* y) const {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k] * x[col[k]];
    y[r] = s;
  }
}

void CsrMatrix::apply(const std::vector<double>& x, std::vector<double>& y) const {
  y.resize(n);
  apply(x.data(), y.data());
}

double& CsrMatrix::at(int r, int c) {
  auto b = col.begin() + row_ptr[r], e = col.begin() + row_ptr[r + 1];
  auto it = std::lower_bound(b, e, c);
  if (it == e || *it != c) {
    std::fprintf(stderr, "csr: entry (%d,%d) not in pattern\n", r, c);
    std::abort();
  }
  return val[it - col.begin()];
}

double CsrMatrix::get(int r, int c) const {
  auto b = col.begin() + row_ptr[r], e = col.begin() + row_ptr[r + 1];
  auto it = std::lower_bound(b, e, c);
  return (it == e || *it != c) ? 0.0 : val[it - col.begin()];
}

double CsrMatrix::norm_inf() const {
  double m = 0.0;
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += std::abs(val[k]);
    m = std::max(m, s);
  }
  return m;
}

double CsrMatrix::max_asymmetry() const {
  double m = 0.0;
  for (int r = 0; r < n; ++r)
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      m = std::max(m, std::abs(val[k] - get(col[k], r)));
  return m;
}

void CsrMatrix::zero_values() { std::fill(val.begin(), val.end(), 0.0); }

CsrMatrix csr_from_pattern(const std::vector<std::vector<int>>& cols_per_row) {
  CsrMatrix A;
  A.n = (int)cols_per_row.size();
  A.row_ptr.resize(A.n + 1, 0);
  for (int r = 0; r < A.n; ++r) A.row_ptr[r + 1] = A.row_ptr[r] + (int)cols_per_row[r].size();
  A.col.reserve(A.row_ptr[A.n]);
  for (auto& cs : cols_per_row) A.col.insert(A.col.end(), cs.begin(), cs.end());
  A.val.assign(A.row_ptr[A.n], 0.0);
  return A;
}

CgResult solve_spd(const CsrMatrix& A, const std::vector<double>& b, double tol,
                   int max_iter, const std::vector<double>* x0) {
  const int n = A.n;
  CgResult res;
  res.x.assign(n, 0.0);
  double bnorm = std::sqrt(det_dot(b, b));
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }

  std::vector<double> d(n);  // Jacobi preconditioner
  for (int r = 0; r < n; ++r) {
    double a = A.get(r, r);
    d[r] = (a > 0.0) ? 1.0 / a : 1.0;
  }

  std::vector<double> r(n), z(n), p(n), q(n);
  if (x0 && (int)x0->size() == n) {
    res.x = *x0;
    A.apply(res.x, q);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) r[i] = b[i] - q[i];
  } else {
    r = b;
  }

  double rnorm = std::sqrt(det_dot(r, r));
  res.history.push_back(rnorm / bnorm);
  if (rnorm / bnorm <= tol) {
    res.converged = true;
    res.rel_residual = rnorm / bnorm;
    return res;
  }

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) z[i] = d[i] * r[i];
  p = z;
  double rz = det_dot(r, z);

  for (int it = 1; it <= max_iter; ++it) {
    A.apply(p, q);
    double pq = det_dot(p, q);
    double alpha = rz / pq;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    rnorm = std::sqrt(det_dot(r, r));
    res.history.push_back(rnorm / bnorm);
    if (rnorm / bnorm <= tol) {
      res.iterations = it;
      res.rel_residual = rnorm / bnorm;
      res.converged = true;
      return res;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) z[i] = d[i] * r[i];
    double rz_next = det_dot(r, z);
    double beta = rz_next / rz;
    rz = rz_next;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError("cg: no convergence within iteration cap", res.history);
}

}  // namespace cosserat
