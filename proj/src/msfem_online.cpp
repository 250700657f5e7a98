#include "cosserat/msfem_online.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cosserat/errors.hpp"

namespace cosserat {

LocalResidual local_residual(const Neighborhood& nb, const std::vector<double>& rho,
                             const DofMap& dm) {
  LocalResidual res;
  res.nbhd = nb.center;
  res.n_interior = (int)nb.interior_nodes.size();
  res.rows.reserve(3 * res.n_interior);
  res.r.reserve(3 * res.n_interior);
  for (int c = 0; c < 3; ++c)
    for (int nd : nb.interior_nodes) {
      int f = dm.node_to_free[nd];
      int row = dm.dof(c, f);
      res.rows.push_back(row);
      res.r.push_back(rho[row]);
    }
  return res;
}

namespace {

// global free dof -> position in res.rows, -1 outside
std::vector<int> row_map(const LocalResidual& res, int n_dofs) {
  std::vector<int> loc(n_dofs, -1);
  for (int i = 0; i < (int)res.rows.size(); ++i) loc[res.rows[i]] = i;
  return loc;
}

Eigen::MatrixXd principal_submatrix(const LocalResidual& res, const CsrMatrix& A,
                                    const std::vector<int>& loc) {
  int n = (int)res.rows.size();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    int gr = res.rows[i];
    for (int p = A.row_ptr[gr]; p < A.row_ptr[gr + 1]; ++p) {
      int lc = loc[A.col[p]];
      if (lc >= 0) M(i, lc) = A.val[p];
    }
  }
  return M;
}

}  // namespace

std::vector<double> online_basis(const LocalResidual& res, const CsrMatrix& A) {
  int n = (int)res.rows.size();
  if (n == 0) return {};
  std::vector<int> loc = row_map(res, A.n);
  Eigen::MatrixXd M = principal_submatrix(res, A, loc);
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw SolverError("online local solve: indefinite principal submatrix");
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = res.r[i];
  Eigen::VectorXd eta = llt.solve(rhs);
  return std::vector<double>(eta.data(), eta.data() + n);
}

double residual_norm_energy(const LocalResidual& res, const std::vector<double>& eta,
                            const CsrMatrix& A) {
  int n = (int)res.rows.size();
  if (n == 0) return 0;
  std::vector<int> loc = row_map(res, A.n);
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    int gr = res.rows[i];
    double s = 0;
    for (int p = A.row_ptr[gr]; p < A.row_ptr[gr + 1]; ++p) {
      int lc = loc[A.col[p]];
      if (lc >= 0) s += A.val[p] * eta[lc];
    }
    acc += eta[i] * s;
  }
  return std::sqrt(std::max(0.0, acc));
}

double residual_norm_laplacian(const LocalResidual& res, const Neighborhood& nb,
                               const TriMesh& mesh, bool sum_components) {
  int n = res.n_interior;
  if (n == 0) return 0;
  std::vector<int> lint(mesh.n_nodes(), -1);
  for (int j = 0; j < n; ++j) lint[nb.interior_nodes[j]] = j;

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (int t : nb.tris) {
    const auto& tri = mesh.tris[t];
    const auto& g = mesh.grad[t];
    for (int a = 0; a < 3; ++a) {
      int la = lint[tri[a]];
      if (la < 0) continue;
      for (int bi = 0; bi < 3; ++bi) {
        int lb = lint[tri[bi]];
        if (lb < 0) continue;
        K(la, lb) += mesh.area[t] * (g[a][0] * g[bi][0] + g[a][1] * g[bi][1]);
      }
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success)
    throw SolverError("dual norm: singular interior Laplacian");

  double rss = 0, sum = 0;
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd rhs(n);
    for (int j = 0; j < n; ++j) rhs(j) = res.r[c * n + j];
    Eigen::VectorXd z = llt.solve(rhs);
    double r2 = std::max(0.0, z.dot(rhs));  // |z|_{H1}^2 = z^T K z = z^T rhs
    rss += r2;
    sum += std::sqrt(r2);
  }
  return sum_components ? sum : std::sqrt(rss);
}

Selection select_enrichment(const std::vector<double>& r, double theta) {
  Selection sel;
  int n = (int)r.size();
  sel.order.resize(n);
  std::iota(sel.order.begin(), sel.order.end(), 0);
  std::sort(sel.order.begin(), sel.order.end(), [&](int a, int b) {
    if (r[a] != r[b]) return r[a] > r[b];
    return a < b;
  });
  // total accumulated in the sorted order so the prefix over all nonzero
  // entries matches it bitwise and theta = 1 never drags zero residuals in
  double total = 0;
  for (int i : sel.order) total += r[i] * r[i];
  if (total <= 0) return sel;
  double prefix = 0;
  for (int k = 0; k < n; ++k) {
    prefix += r[sel.order[k]] * r[sel.order[k]];
    if (prefix >= theta * total) {
      sel.k_p = k + 1;
      break;
    }
  }
  if (sel.k_p == 0) sel.k_p = n;
  return sel;
}

namespace {

void append_split_columns(MultiscaleSpace& space, const LocalResidual& res,
                          const std::vector<double>& eta, double rnorm, int level) {
  int n = res.n_interior;
  for (int c = 0; c < 3; ++c) {
    BasisColumn col;
    col.kind = BasisColumn::Kind::Online;
    col.nbhd = res.nbhd;
    col.comp = c;
    col.level = level;
    col.lambda = rnorm;
    for (int j = 0; j < n; ++j) {
      double v = eta[c * n + j];
      if (v == 0) continue;
      col.rows.push_back(res.rows[c * n + j]);
      col.vals.push_back(v);
    }
    if (!col.rows.empty()) space.cols.push_back(std::move(col));
  }
}

}  // namespace

void adaptive_enrich(MultiscaleSpace& space, const CoarseGrid& grid,
                     const std::vector<Neighborhood>& nbs, const TriMesh& mesh,
                     const DofMap& dm, const CsrMatrix& A, const std::vector<double>& b,
                     const EnrichmentConfig& cfg, int picard_iter,
                     std::vector<EnrichmentLogRow>* log,
                     std::vector<std::vector<double>>* per_level_fine) {
  int nn = (int)nbs.size();
  for (int level = 0; level < cfg.N_it; ++level) {
    CoarseSolveResult cs = coarse_solve(space, grid, A, b);
    if (per_level_fine) per_level_fine->push_back(cs.fine);

    std::vector<double> rho(b);
    std::vector<double> Ax(A.n);
    A.apply(cs.fine.data(), Ax.data());
    for (int i = 0; i < A.n; ++i) rho[i] -= Ax[i];

    std::vector<LocalResidual> res(nn);
    std::vector<std::vector<double>> eta(nn);
    std::vector<double> rnorm(nn, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < nn; ++i) {
      res[i] = local_residual(nbs[i], rho, dm);
      if (res[i].rows.empty()) continue;
      eta[i] = online_basis(res[i], A);
      rnorm[i] = cfg.dual_norm == DualNorm::Energy
                     ? residual_norm_energy(res[i], eta[i], A)
                     : residual_norm_laplacian(res[i], nbs[i], mesh, cfg.sum_components);
    }

    Selection sel = select_enrichment(rnorm, cfg.theta);
    std::vector<char> picked(nn, 0);
    for (int k = 0; k < sel.k_p; ++k) {
      int i = sel.order[k];
      if (rnorm[i] <= 0) continue;
      picked[i] = 1;
      append_split_columns(space, res[i], eta[i], rnorm[i], level + 1);
    }
    if (log) {
      int dof = space.dof_h();
      for (int i = 0; i < nn; ++i)
        log->push_back({picard_iter, level + 1, nbs[i].center, rnorm[i], picked[i] != 0, dof});
    }
  }
  if (per_level_fine) {
    CoarseSolveResult cs = coarse_solve(space, grid, A, b);
    per_level_fine->push_back(cs.fine);
  }
}

OnlineSolveResult picard_solve_online(const TriMesh& mesh, const CoarseGrid& grid,
                                      const MaterialField& field, const DofMap& dm,
                                      const EnrichmentConfig& cfg, const PicardOptions& opts,
                                      const OfflineBank* bank) {
  OnlineSolveResult out;
  SystemState guess = constant_state(mesh, 1e-6, 1e-6);
  KappaField kappa = kappa_field(guess, mesh, field, opts.policy);
  KappaField kappa_ref = kappa;

  std::vector<Neighborhood> local_nbs;
  const std::vector<Neighborhood>* nbs = nullptr;
  if (bank) {
    out.space = offline_space_from_bank(*bank, dm, cfg.N_b);
    nbs = &bank->nbs;
  } else {
    out.space = build_offline_space(mesh, grid, field, kappa, dm, cfg.N_b);
    local_nbs.reserve(grid.n_vertices());
    for (int v = 0; v < grid.n_vertices(); ++v)
      local_nbs.push_back(neighborhood(grid, mesh, v));
    nbs = &local_nbs;
  }

  std::vector<double> b = assemble_rhs(mesh, field, dm);
  CsrMatrix A = assemble_from_kappa(kappa, mesh, field, dm);
  bool a_current = true;  // A assembled at kappa

  adaptive_enrich(out.space, grid, *nbs, mesh, dm, A, b, cfg, 0, &out.log);

  PicardResult& pr = out.picard;
  SystemState prev = guess;
  std::vector<double> x_prev = restrict_free(guess, mesh, dm);

  for (int it = 1; it <= opts.max_iter; ++it) {
    if (!a_current) A = assemble_from_kappa(kappa, mesh, field, dm);
    a_current = true;

    CoarseSolveResult cs = coarse_solve(out.space, grid, A, b);
    SystemState next =
        limited_step(prev, expand_free(cs.fine, mesh, dm), mesh, field, opts.policy);
    next.iteration = it;
    std::vector<double> x_next = restrict_free(next, mesh, dm);

    std::vector<double> d(x_next);
    for (size_t i = 0; i < d.size(); ++i) d[i] -= x_prev[i];
    std::vector<double> tmp(A.n);
    A.apply(d.data(), tmp.data());
    double num = std::sqrt(std::max(0.0, std::inner_product(d.begin(), d.end(), tmp.begin(), 0.0)));
    A.apply(x_prev.data(), tmp.data());
    double den = std::sqrt(
        std::max(0.0, std::inner_product(x_prev.begin(), x_prev.end(), tmp.begin(), 0.0)));
    double rel = den > 0 ? num / den : num;

    prev = std::move(next);
    x_prev = std::move(x_next);
    pr.iterations = it;
    KappaField kappa_new = kappa_field(prev, mesh, field, opts.policy);
    pr.trace.push_back({it, rel, kappa_new.max_sqrt_q, out.space.dof_h()});

    if (rel <= opts.delta0) {
      pr.converged = true;
      pr.state = std::move(prev);
      pr.kappa_final = std::move(kappa_new);
      return out;
    }
    if (kappa_rel_change(kappa_new, kappa_ref, mesh) > cfg.delta) {
      out.space.drop_online();
      A = assemble_from_kappa(kappa_new, mesh, field, dm);
      adaptive_enrich(out.space, grid, *nbs, mesh, dm, A, b, cfg, it, &out.log);
      kappa_ref = kappa_new;
      ++out.rebuilds;
    } else {
      a_current = false;
    }
    kappa = std::move(kappa_new);
  }
  pr.state = std::move(prev);
  pr.kappa_final = kappa_field(pr.state, mesh, field, opts.policy);
  return out;
}

}  // namespace cosserat
