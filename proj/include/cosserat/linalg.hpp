#pragma once

#include <cstddef>
#include <vector>

namespace cosserat {

// Symmetric sparse matrix in CSR, full pattern stored.
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr;   // n+1
  std::vector<int> col;       // nnz, ascending within each row
  std::vector<double> val;

  // y = A x, row-parallel (bitwise deterministic at any thread count)
  void apply(const double* x, double* y) const;
  void apply(const std::vector<double>& x, std::vector<double>& y) const;

  double& at(int r, int c);          // existing entry, aborts if absent
  double get(int r, int c) const;    // 0 if absent
  double norm_inf() const;           // max abs row sum
  double max_asymmetry() const;      // max |A_ij - A_ji| over stored pattern
  void zero_values();
};

// Builds the CSR pattern from per-row column lists (each sorted, unique).
CsrMatrix csr_from_pattern(const std::vector<std::vector<int>>& cols_per_row);

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
  std::vector<double> history;  // relative residual per iteration
};

// Jacobi-preconditioned conjugate gradients for SPD systems.
// rel tolerance on ||b - Ax|| / ||b||; b = 0 returns x = 0 immediately.
// Throws SolverError with the residual history if the iteration cap is hit.
CgResult solve_spd(const CsrMatrix& A, const std::vector<double>& b,
                   double tol = 1e-10, int max_iter = 20000,
                   const std::vector<double>* x0 = nullptr);

}  // namespace cosserat
