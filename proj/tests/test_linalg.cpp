#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cosserat/errors.hpp"
#include "cosserat/linalg.hpp"
#include "cosserat/parallel.hpp"
#include "cosserat/rng.hpp"

using namespace cosserat;

namespace {

// small SPD test matrix [[4,1],[1,3]]
CsrMatrix spd2() {
  CsrMatrix A = csr_from_pattern({{0, 1}, {0, 1}});
  A.at(0, 0) = 4;
  A.at(0, 1) = 1;
  A.at(1, 0) = 1;
  A.at(1, 1) = 3;
  return A;
}

CsrMatrix random_spd(SplitMix64& rng, int n) {
  // diagonally dominant random symmetric pattern
  std::vector<std::vector<int>> cols(n);
  for (int i = 0; i < n; ++i) cols[i].push_back(i);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.2) {
        cols[i].push_back(j);
        cols[j].push_back(i);
      }
  for (auto& c : cols) std::sort(c.begin(), c.end());
  CsrMatrix A = csr_from_pattern(cols);
  for (int i = 0; i < n; ++i) {
    double off = 0;
    for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p)
      if (A.col[p] != i) {
        int j = A.col[p];
        if (j > i) {
          double v = rng.uniform(-1, 1);
          A.val[p] = v;
          A.at(j, i) = v;
        }
      }
    for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p)
      if (A.col[p] != i) off += std::abs(A.val[p]);
    A.at(i, i) = off + rng.uniform(0.5, 2.0);
  }
  return A;
}

}  // namespace

TEST_CASE("csr pattern, access, and apply") {
  CsrMatrix A = spd2();
  CHECK(A.n == 2);
  CHECK(A.get(0, 1) == 1.0);
  CHECK(A.get(1, 1) == 3.0);
  std::vector<double> x{1, 2}, y(2);
  A.apply(x, y);
  CHECK(y[0] == doctest::Approx(6.0));
  CHECK(y[1] == doctest::Approx(7.0));
  CHECK(A.norm_inf() == doctest::Approx(5.0));
  CHECK(A.max_asymmetry() == 0.0);
}

TEST_CASE("cg solves the 2x2 oracle exactly") {
  // [[4,1],[1,3]] x = (1,2): x = (1/11, 7/11)
  CsrMatrix A = spd2();
  CgResult r = solve_spd(A, {1, 2}, 1e-14);
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
  CHECK(r.x[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("cg on zero rhs returns zero immediately") {
  CsrMatrix A = spd2();
  CgResult r = solve_spd(A, {0, 0});
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.x[0] == 0.0);
  CHECK(r.x[1] == 0.0);
}

TEST_CASE("cg converges on random spd systems and warm starts pay off") {
  SplitMix64 rng{303};
  CsrMatrix A = random_spd(rng, 120);
  std::vector<double> b(120);
  for (auto& v : b) v = rng.uniform(-1, 1);
  CgResult cold = solve_spd(A, b, 1e-12);
  CHECK(cold.converged);
  std::vector<double> res(120);
  A.apply(cold.x, res);
  double rn = 0, bn = 0;
  for (int i = 0; i < 120; ++i) {
    rn += (res[i] - b[i]) * (res[i] - b[i]);
    bn += b[i] * b[i];
  }
  CHECK(std::sqrt(rn / bn) <= 1e-11);

  CgResult warm = solve_spd(A, b, 1e-12, 20000, &cold.x);
  CHECK(warm.converged);
  CHECK(warm.iterations <= 1);
}

TEST_CASE("cg iteration cap throws with history attached") {
  SplitMix64 rng{7};
  CsrMatrix A = random_spd(rng, 60);
  std::vector<double> b(60, 1.0);
  CHECK_THROWS_AS(solve_spd(A, b, 1e-14, 2), SolverError);
  try {
    solve_spd(A, b, 1e-14, 2);
  } catch (const SolverError& e) {
    CHECK(e.residual_history.size() >= 1);
  }
}

TEST_CASE("deterministic dot product agrees with the standard one") {
  SplitMix64 rng{1};
  std::vector<double> a(1000), b(1000);
  for (int i = 0; i < 1000; ++i) {
    a[i] = rng.uniform(-1, 1);
    b[i] = rng.uniform(-1, 1);
  }
  double ref = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  CHECK(det_dot(a, b) == doctest::Approx(ref).epsilon(1e-13));
}
