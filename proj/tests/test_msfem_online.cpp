#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cosserat/fem_core.hpp"
#include "cosserat/geometry.hpp"
#include "cosserat/media.hpp"
#include "cosserat/msfem_offline.hpp"
#include "cosserat/msfem_online.hpp"
#include "cosserat/rng.hpp"

using namespace cosserat;

namespace {

struct Setup {
  TriMesh mesh;
  CoarseGrid grid;
  MaterialField field;
  DofMap dm;
  KappaField kappa;
  CsrMatrix A;
  std::vector<double> b;
  std::vector<Neighborhood> nbs;

  explicit Setup(int nx = 20, int Nx = 5)
      : mesh(build_fine_mesh(nx)), grid(build_coarse_grid(mesh, Nx, Nx)) {
    field = perforated_field(1, mesh);
    dm = make_dof_map(mesh);
    kappa = kappa_field(constant_state(mesh, 1e-6, 1e-6), mesh, field, LimitPolicy::Strict);
    A = assemble_from_kappa(kappa, mesh, field, dm);
    b = assemble_rhs(mesh, field, dm);
    for (int v = 0; v < grid.n_vertices(); ++v) nbs.push_back(neighborhood(grid, mesh, v));
  }
};

std::vector<double> global_residual(const Setup& s, const std::vector<double>& x) {
  std::vector<double> rho(s.b.size());
  s.A.apply(x, rho);
  for (size_t i = 0; i < rho.size(); ++i) rho[i] = s.b[i] - rho[i];
  return rho;
}

}  // namespace

TEST_CASE("local residual restricts to interior free dofs") {
  Setup s;
  std::vector<double> x(s.dm.n_dofs());
  SplitMix64 rng(5);
  for (double& v : x) v = rng.uniform(-1, 1);
  std::vector<double> rho = global_residual(s, x);

  const Neighborhood& nb = s.nbs[2 * 6 + 3];
  LocalResidual lr = local_residual(nb, rho, s.dm);
  CHECK(lr.nbhd == nb.center);
  REQUIRE(lr.rows.size() == lr.r.size());
  // one row per component per interior free node, values copied from rho
  int free_interior = 0;
  for (int nd : nb.interior_nodes)
    if (s.dm.node_to_free[nd] >= 0) ++free_interior;
  CHECK(lr.n_interior == free_interior);
  CHECK((int)lr.rows.size() == 3 * free_interior);
  for (size_t i = 0; i < lr.rows.size(); ++i) CHECK(lr.r[i] == rho[lr.rows[i]]);
  // rows really are interior: no boundary node of omega appears
  for (int r : lr.rows) {
    int nd = s.dm.free_to_node[r % s.dm.n_free];
    CHECK(std::find(nb.boundary_nodes.begin(), nb.boundary_nodes.end(), nd) ==
          nb.boundary_nodes.end());
    CHECK(nb.local(nd) >= 0);
  }
}

TEST_CASE("online basis solves the Riesz problem and obeys the norm identity") {
  Setup s;
  MultiscaleSpace sp = build_offline_space(s.mesh, s.grid, s.field, s.kappa, s.dm, 2);
  CoarseSolveResult cs = coarse_solve(sp, s.grid, s.A, s.b);
  std::vector<double> rho = global_residual(s, cs.fine);

  double bscale = 0;
  for (double v : s.b) bscale = std::max(bscale, std::abs(v));

  for (int vid : {2 * 6 + 3, 0, 3 * 6 + 5}) {
    const Neighborhood& nb = s.nbs[vid];
    LocalResidual lr = local_residual(nb, rho, s.dm);
    if (lr.rows.empty()) continue;
    std::vector<double> eta = online_basis(lr, s.A);
    REQUIRE(eta.size() == lr.rows.size());  // local interior coordinates
    // scattered to the global grid (zero beyond the interior of omega), the
    // representative solves a(eta, v) = R(v) for v over the interior unit vectors
    std::vector<double> g(s.dm.n_dofs(), 0.0);
    for (size_t i = 0; i < lr.rows.size(); ++i) g[lr.rows[i]] = eta[i];
    std::vector<double> Ag(g.size());
    s.A.apply(g, Ag);
    for (size_t i = 0; i < lr.rows.size(); ++i)
      CHECK(Ag[lr.rows[i]] == doctest::Approx(lr.r[i]).epsilon(1e-8).scale(bscale));

    // Riesz identity: ||eta||_a^2 = R(eta)
    double energy = residual_norm_energy(lr, eta, s.A);
    double pairing = 0;
    for (size_t i = 0; i < lr.rows.size(); ++i) pairing += lr.r[i] * eta[i];
    CHECK(energy * energy == doctest::Approx(pairing).epsilon(1e-10));
  }
}

TEST_CASE("laplacian dual norm: positivity and component aggregation") {
  Setup s;
  MultiscaleSpace sp = build_offline_space(s.mesh, s.grid, s.field, s.kappa, s.dm, 1);
  CoarseSolveResult cs = coarse_solve(sp, s.grid, s.A, s.b);
  std::vector<double> rho = global_residual(s, cs.fine);

  const Neighborhood& nb = s.nbs[2 * 6 + 2];
  LocalResidual lr = local_residual(nb, rho, s.dm);
  double rss = residual_norm_laplacian(lr, nb, s.mesh, false);
  double sum = residual_norm_laplacian(lr, nb, s.mesh, true);
  CHECK(rss > 0);
  // root-sum-square never exceeds the plain sum, and by at most sqrt(3)
  CHECK(rss <= sum + 1e-15);
  CHECK(sum <= std::sqrt(3.0) * rss + 1e-15);

  // zero residual gives zero norm
  LocalResidual zero = lr;
  std::fill(zero.r.begin(), zero.r.end(), 0.0);
  CHECK(residual_norm_laplacian(zero, nb, s.mesh, false) == 0.0);
  CHECK(residual_norm_energy(zero, std::vector<double>(zero.r.size(), 0.0), s.A) == 0.0);
}

TEST_CASE("selection rule thresholds the residual energies") {
  // residuals (3, 2, 1): squares (9, 4, 1), total 14
  std::vector<double> r{3, 2, 1};
  Selection s8 = select_enrichment(r, 0.8);  // 0.8 * 14 = 11.2 <= 9 + 4
  CHECK(s8.k_p == 2);
  CHECK(s8.order == std::vector<int>{0, 1, 2});
  Selection s1 = select_enrichment(r, 1.0);
  CHECK(s1.k_p == 3);

  // unsorted input, duplicates break ties by index
  std::vector<double> w{1, 3, 3, 0.5};
  Selection sw = select_enrichment(w, 0.9);
  CHECK(sw.order == std::vector<int>{1, 2, 0, 3});
  // total 19.25, 0.9*total = 17.325 <= 9+9 = 18 at k_p = 2
  CHECK(sw.k_p == 2);

  // tiny theta still selects at least one
  Selection st = select_enrichment(w, 1e-12);
  CHECK(st.k_p >= 1);
}

TEST_CASE("enrichment at a frozen operator: monotone error, logged growth") {
  Setup s;
  MultiscaleSpace sp = build_offline_space(s.mesh, s.grid, s.field, s.kappa, s.dm, 2);
  int base = sp.dof_h();

  EnrichmentConfig cfg;
  cfg.N_b = 2;
  cfg.N_it = 3;
  cfg.theta = 1.0;
  std::vector<EnrichmentLogRow> log;
  std::vector<std::vector<double>> per_level;
  adaptive_enrich(sp, s.grid, s.nbs, s.mesh, s.dm, s.A, s.b, cfg, 0, &log, &per_level);

  // one entry per enrichment count m = 0..N_it (a final solve follows level N_it)
  REQUIRE(per_level.size() == 4);
  CHECK(sp.dof_h() > base);
  CHECK(sp.n_offline == base);

  // exact solve of the frozen system for the error reference
  CgResult exact = solve_spd(s.A, s.b, 1e-12);
  double prev = 1e300;
  for (const auto& xl : per_level) {
    std::vector<double> d(xl.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = xl[i] - exact.x[i];
    std::vector<double> Ad(d.size());
    s.A.apply(d, Ad);
    double e = 0;
    for (size_t i = 0; i < d.size(); ++i) e += d[i] * Ad[i];
    e = std::sqrt(e);
    CHECK(e <= prev * (1 + 1e-12));
    prev = e;
  }

  // theta = 1 selects every neighborhood, adding 3 columns each per level
  int levels = 0;
  for (const auto& row : log) {
    CHECK(row.picard_iter == 0);
    if (row.nbhd == 0) ++levels;
    CHECK(row.selected);
  }
  CHECK(levels == 3);
  CHECK(sp.dof_h() == base + 3 * 3 * (int)s.nbs.size());

  // online columns carry their kind and 1-based level
  for (int i = sp.n_offline; i < sp.dof_h(); ++i) {
    CHECK(sp.cols[i].kind == BasisColumn::Kind::Online);
    CHECK(sp.cols[i].level >= 1);
    CHECK(sp.cols[i].level <= 3);
  }
  sp.drop_online();
  CHECK(sp.dof_h() == base);
}

TEST_CASE("theta < 1 enriches fewer neighborhoods but still reduces the error") {
  Setup s;
  CgResult exact = solve_spd(s.A, s.b, 1e-12);
  auto run = [&](double theta) {
    MultiscaleSpace sp = build_offline_space(s.mesh, s.grid, s.field, s.kappa, s.dm, 2);
    EnrichmentConfig cfg;
    cfg.N_b = 2;
    cfg.N_it = 2;
    cfg.theta = theta;
    std::vector<std::vector<double>> per_level;
    adaptive_enrich(sp, s.grid, s.nbs, s.mesh, s.dm, s.A, s.b, cfg, 0, nullptr, &per_level);
    std::vector<double> d(exact.x.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = per_level.back()[i] - exact.x[i];
    std::vector<double> Ad(d.size());
    s.A.apply(d, Ad);
    double e = 0;
    for (size_t i = 0; i < d.size(); ++i) e += d[i] * Ad[i];
    return std::pair<int, double>(sp.dof_h(), std::sqrt(e));
  };
  auto [dof_full, err_full] = run(1.0);
  auto [dof_part, err_part] = run(0.7);
  CHECK(dof_part < dof_full);
  CHECK(err_part >= err_full * (1 - 1e-12));

  // and the partial run still beats the offline-only solution
  MultiscaleSpace sp0 = build_offline_space(s.mesh, s.grid, s.field, s.kappa, s.dm, 2);
  CoarseSolveResult cs = coarse_solve(sp0, s.grid, s.A, s.b);
  std::vector<double> d(exact.x.size());
  for (size_t i = 0; i < d.size(); ++i) d[i] = cs.fine[i] - exact.x[i];
  std::vector<double> Ad(d.size());
  s.A.apply(d, Ad);
  double e0 = 0;
  for (size_t i = 0; i < d.size(); ++i) e0 += d[i] * Ad[i];
  CHECK(err_part < std::sqrt(e0));
}

TEST_CASE("online Picard solve converges and improves on offline") {
  Setup s;
  PicardResult fine = picard_solve_fine(s.mesh, s.field, s.dm);
  REQUIRE(fine.converged);
  std::vector<double> ref = restrict_free(fine.state, s.mesh, s.dm);
  auto err = [&](const SystemState& st) {
    std::vector<double> x = restrict_free(st, s.mesh, s.dm);
    double num = 0, den = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      num += (x[i] - ref[i]) * (x[i] - ref[i]);
      den += ref[i] * ref[i];
    }
    return std::sqrt(num / den);
  };

  EnrichmentConfig cfg;
  cfg.N_b = 2;
  cfg.N_it = 2;
  cfg.theta = 1.0;
  cfg.delta = 0.1;
  OnlineSolveResult on = picard_solve_online(s.mesh, s.grid, s.field, s.dm, cfg);
  CHECK(on.picard.converged);
  CHECK(on.rebuilds >= 0);
  CHECK_FALSE(on.log.empty());
  CHECK(on.space.dof_h() > on.space.n_offline);

  OfflineSolveResult off = picard_solve_offline(s.mesh, s.grid, s.field, s.dm, 2);
  REQUIRE(off.picard.converged);
  CHECK(err(on.picard.state) < 0.5 * err(off.picard.state));

  // delta = infinity freezes the online basis after the bootstrap
  EnrichmentConfig cfg_inf = cfg;
  cfg_inf.delta = std::numeric_limits<double>::infinity();
  OnlineSolveResult frozen = picard_solve_online(s.mesh, s.grid, s.field, s.dm, cfg_inf);
  CHECK(frozen.picard.converged);
  CHECK(frozen.rebuilds == 0);
}
