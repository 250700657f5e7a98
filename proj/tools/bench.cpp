// Timing comparison of the serial reference kernels against the OpenMP ones:
// operator assembly, sparse matvec, PCG, and the offline basis build.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "cosserat/fem_core.hpp"
#include "cosserat/harness.hpp"
#include "cosserat/linalg.hpp"
#include "cosserat/msfem_offline.hpp"
#include "cosserat/parallel.hpp"

using namespace cosserat;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double best_of(int reps, F f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, ms_since(t0));
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  int nx = argc > 1 ? std::atoi(argv[1]) : 50;
  int reps = argc > 2 ? std::atoi(argv[2]) : 3;

  ExperimentConfig cfg;
  cfg.media = MediaKind::Perforated;
  cfg.case_id = 1;
  cfg.nx = nx;
  cfg.Nx = cfg.Ny = 10;
  cfg.perforations = default_perforations();
  Problem p = build_problem(cfg);
  std::printf("mesh: nx=%d, %d triangles, %d free nodes, %d dofs, %d threads\n", nx,
              p.mesh.n_tris(), p.dm.n_free, p.dm.n_dofs(), max_threads());

  SystemState guess = constant_state(p.mesh, 1e-6, 1e-6);
  KappaField kappa = kappa_field(guess, p.mesh, p.field, LimitPolicy::Strict);

  double t_par = best_of(reps, [&] { assemble_from_kappa(kappa, p.mesh, p.field, p.dm); });
  double t_ser = best_of(reps, [&] { assemble_operator_serial(kappa, p.mesh, p.field, p.dm); });
  std::printf("assembly:  parallel %8.2f ms   serial %8.2f ms   speedup %.2fx\n", t_par, t_ser,
              t_ser / t_par);

  CsrMatrix A = assemble_from_kappa(kappa, p.mesh, p.field, p.dm);
  std::vector<double> x(A.n, 1.0), y(A.n);
  double t_mv = best_of(reps, [&] {
    for (int i = 0; i < 50; ++i) A.apply(x, y);
  });
  std::printf("matvec x50: %8.2f ms\n", t_mv);

  std::vector<double> b = assemble_rhs(p.mesh, p.field, p.dm);
  double t_cg = 0;
  int cg_iters = 0;
  t_cg = best_of(1, [&] {
    CgResult r = solve_spd(A, b, 1e-10);
    cg_iters = r.iterations;
  });
  std::printf("pcg solve: %8.2f ms (%d iterations)\n", t_cg, cg_iters);

  auto t0 = std::chrono::steady_clock::now();
  OfflineBank bank = build_offline_bank(p.mesh, p.grid, p.field, kappa, 8);
  std::printf("offline bank (N_b<=8, %d neighborhoods): %8.2f ms\n", (int)bank.nbs.size(),
              ms_since(t0));
  return 0;
}
