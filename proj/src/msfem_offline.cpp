#include "cosserat/msfem_offline.hpp"

#include <algorithm>
#include <cmath>

#include "cosserat/errors.hpp"
#include "cosserat/parallel.hpp"

namespace cosserat {

namespace {

// element contribution helpers shared with the global assembly path would hide
// the local dof mapping; the dense local case is simple enough to inline

void add_element(Eigen::MatrixXd& A, Eigen::MatrixXd* S, const TriMesh& mesh,
                 const MaterialField& field, const KappaField& kappa, int t,
                 const int* loc /*3 local node ids*/, int n_local) {
  double xi2 = field.xi[t] * field.xi[t], al2 = field.alpha[t] * field.alpha[t];
  double w = mesh.area[t] / 3.0;
  auto& g = mesh.grad[t];
  for (int q = 0; q < 3; ++q) {
    double kw = kappa.k[3 * t + q] * w;
    for (int a = 0; a < 3; ++a) {
      double pa = kQuadBary[q][a];
      int ra = loc[a];
      for (int b = 0; b < 3; ++b) {
        double pb = kQuadBary[q][b];
        int rb = loc[b];
        double gg = g[a][0] * g[b][0] + g[a][1] * g[b][1];
        A(ra, rb) += kw * xi2 * gg;
        A(n_local + ra, n_local + rb) += kw * xi2 * gg;
        A(ra, 2 * n_local + rb) += kw * xi2 * g[a][1] * pb;
        A(n_local + ra, 2 * n_local + rb) -= kw * xi2 * g[a][0] * pb;
        A(2 * n_local + ra, rb) += kw * xi2 * pa * g[b][1];
        A(2 * n_local + ra, n_local + rb) -= kw * xi2 * pa * g[b][0];
        A(2 * n_local + ra, 2 * n_local + rb) += kw * (al2 * gg + 2.0 * xi2 * pa * pb);
        if (S) {
          double m = kw * pa * pb;
          (*S)(ra, rb) += m * xi2;
          (*S)(n_local + ra, n_local + rb) += m * xi2;
          (*S)(2 * n_local + ra, 2 * n_local + rb) += m * al2;
        }
      }
    }
  }
}

}  // namespace

void assemble_local(const Neighborhood& nb, const TriMesh& mesh, const MaterialField& field,
                    const KappaField& kappa, Eigen::MatrixXd* A, Eigen::MatrixXd* S) {
  int n = nb.n_local();
  if (A) A->setZero(3 * n, 3 * n);
  if (S) S->setZero(3 * n, 3 * n);
  for (int t : nb.tris) {
    int loc[3];
    for (int a = 0; a < 3; ++a) loc[a] = nb.local(mesh.tris[t][a]);
    add_element(*A, S, mesh, field, kappa, t, loc, n);
  }
}

namespace {

// snapshot solver shared state: local operator with boundary dofs locked
struct LocalWorkspace {
  int n_local = 0;
  std::vector<int> interior, boundary;  // local dof indices (all components)
  Eigen::MatrixXd A, S;
  Eigen::LLT<Eigen::MatrixXd> A_II;

  LocalWorkspace(const Neighborhood& nb, const TriMesh& mesh, const MaterialField& field,
                 const KappaField& kappa, bool with_mass) {
    n_local = nb.n_local();
    assemble_local(nb, mesh, field, kappa, &A, with_mass ? &S : nullptr);
    std::vector<char> is_bd(n_local, 0);
    for (int nd : nb.boundary_nodes) is_bd[nb.local(nd)] = 1;
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < n_local; ++j)
        (is_bd[j] ? boundary : interior).push_back(c * n_local + j);
    Eigen::MatrixXd AII(interior.size(), interior.size());
    for (size_t r = 0; r < interior.size(); ++r)
      for (size_t c = 0; c < interior.size(); ++c) AII(r, c) = A(interior[r], interior[c]);
    A_II.compute(AII);
    if (A_II.info() != Eigen::Success)
      throw SolverError("compute_snapshots: local operator not positive definite");
  }

  // columns: one per boundary node, delta data in component l
  Eigen::MatrixXd snapshots(const Neighborhood& nb, int l) const {
    int nbd = (int)nb.boundary_nodes.size(), ni = (int)interior.size();
    Eigen::MatrixXd rhs(ni, nbd);
    for (int k = 0; k < nbd; ++k) {
      int bdof = l * n_local + nb.local(nb.boundary_nodes[k]);
      for (int r = 0; r < ni; ++r) rhs(r, k) = -A(interior[r], bdof);
    }
    Eigen::MatrixXd X = A_II.solve(rhs);
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(3 * n_local, nbd);
    for (int k = 0; k < nbd; ++k) {
      Z(l * n_local + nb.local(nb.boundary_nodes[k]), k) = 1.0;
      for (int r = 0; r < ni; ++r) Z(interior[r], k) = X(r, k);
    }
    return Z;
  }
};

}  // namespace

Eigen::MatrixXd compute_snapshots(const Neighborhood& nb, const TriMesh& mesh,
                                  const MaterialField& field, const KappaField& kappa, int l) {
  LocalWorkspace ws(nb, mesh, field, kappa, false);
  return ws.snapshots(nb, l);
}

SpectralBasis spectral_basis(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& A_loc,
                             const Eigen::MatrixXd& S_loc, int N_b) {
  if (N_b > Z.cols())
    throw SolverError("spectral_basis: more basis functions requested than snapshots");
  Eigen::MatrixXd At = Z.transpose() * A_loc * Z;
  Eigen::MatrixXd St = Z.transpose() * S_loc * Z;
  At = 0.5 * (At + At.transpose());  // symmetrize roundoff
  St = 0.5 * (St + St.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(At, St);
  if (es.info() != Eigen::Success)
    throw SolverError("spectral_basis: degenerate snapshot set");
  SpectralBasis out;
  out.vecs.resize(Z.rows(), N_b);
  out.lambda.resize(N_b);
  for (int k = 0; k < N_b; ++k) {
    out.lambda[k] = es.eigenvalues()(k);  // ascending
    Eigen::VectorXd v = Z * es.eigenvectors().col(k);
    int imax = 0;
    for (int i = 1; i < v.size(); ++i)
      if (std::abs(v(i)) > std::abs(v(imax))) imax = i;
    if (v(imax) < 0) v = -v;
    out.vecs.col(k) = v;
  }
  return out;
}

std::array<std::vector<double>, 3> partition_of_unity(const Neighborhood& nb,
                                                      const CoarseGrid& grid,
                                                      const TriMesh& mesh,
                                                      const MaterialField& field,
                                                      const KappaField& kappa) {
  std::array<std::vector<double>, 3> chi;
  for (auto& c : chi) c.assign(nb.n_local(), 0.0);

  double X = grid.vx(nb.center), Y = grid.vy(nb.center);
  auto hat = [&](int node) {
    double tx = 1.0 - std::abs(mesh.x[node] - X) / grid.Hx;
    double ty = 1.0 - std::abs(mesh.y[node] - Y) / grid.Hy;
    return std::max(0.0, tx) * std::max(0.0, ty);
  };

  int mx = mesh.nx / grid.Nx, my = mesh.nx / grid.Ny;
  for (int b : nb.blocks) {
    int bx = b % grid.Nx, by = b / grid.Nx;
    int ix0 = bx * mx, ix1 = (bx + 1) * mx, iy0 = by * my, iy1 = (by + 1) * my;

    // local node set of the block
    std::vector<int> nodes;
    {
      std::vector<char> seen(mesh.n_nodes(), 0);
      for (int t : grid.block_tris[b])
        for (int v : mesh.tris[t])
          if (!seen[v]) {
            seen[v] = 1;
            nodes.push_back(v);
          }
      std::sort(nodes.begin(), nodes.end());
    }
    int nk = (int)nodes.size();
    std::vector<int> loc_of(mesh.n_nodes(), -1);
    for (int j = 0; j < nk; ++j) loc_of[nodes[j]] = j;

    Eigen::MatrixXd AK = Eigen::MatrixXd::Zero(3 * nk, 3 * nk);
    for (int t : grid.block_tris[b]) {
      int loc[3];
      for (int a = 0; a < 3; ++a) loc[a] = loc_of[mesh.tris[t][a]];
      add_element(AK, nullptr, mesh, field, kappa, t, loc, nk);
    }

    std::vector<char> on_bd(nk, 0);
    for (int j = 0; j < nk; ++j) {
      int ix = nodes[j] % (mesh.nx + 1), iy = nodes[j] / (mesh.nx + 1);
      on_bd[j] = (ix == ix0 || ix == ix1 || iy == iy0 || iy == iy1);
    }
    std::vector<int> I, B;
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < nk; ++j) (on_bd[j] ? B : I).push_back(c * nk + j);

    Eigen::MatrixXd AII((int)I.size(), (int)I.size());
    for (size_t r = 0; r < I.size(); ++r)
      for (size_t c = 0; c < I.size(); ++c) AII(r, c) = AK(I[r], I[c]);
    Eigen::LLT<Eigen::MatrixXd> llt(AII);
    if (llt.info() != Eigen::Success)
      throw SolverError("partition_of_unity: local operator not positive definite");

    for (int l = 0; l < 3; ++l) {
      Eigen::VectorXd gB(B.size());
      for (size_t r = 0; r < B.size(); ++r) {
        int comp = B[r] / nk, j = B[r] % nk;
        gB(r) = (comp == l) ? hat(nodes[j]) : 0.0;
      }
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(I.size());
      for (size_t r = 0; r < I.size(); ++r)
        for (size_t c = 0; c < B.size(); ++c) rhs(r) -= AK(I[r], B[c]) * gB(c);
      Eigen::VectorXd xI = llt.solve(rhs);
      // keep component l of the l-solve
      for (size_t r = 0; r < I.size(); ++r) {
        int comp = I[r] / nk, j = I[r] % nk;
        if (comp == l) chi[l][nb.local(nodes[j])] = xI(r);
      }
      for (size_t r = 0; r < B.size(); ++r) {
        int comp = B[r] / nk, j = B[r] % nk;
        if (comp == l) chi[l][nb.local(nodes[j])] = gB(r);
      }
    }
  }
  return chi;
}

OfflineBank build_offline_bank(const TriMesh& mesh, const CoarseGrid& grid,
                               const MaterialField& field, const KappaField& kappa0, int max_nb) {
  OfflineBank bank;
  bank.max_nb = max_nb;
  int nv = grid.n_vertices();
  bank.nbs.resize(nv);
  bank.entries.resize(nv);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < nv; ++i) {
    Neighborhood nb = neighborhood(grid, mesh, i);
    LocalWorkspace ws(nb, mesh, field, kappa0, true);
    OfflineBank::Entry e;
    for (int l = 0; l < 3; ++l) {
      Eigen::MatrixXd Z = ws.snapshots(nb, l);
      int take = std::min<int>(max_nb, (int)Z.cols());
      SpectralBasis sb = spectral_basis(Z, ws.A, ws.S, take);
      e.vecs[l] = std::move(sb.vecs);
      e.lambda[l] = std::move(sb.lambda);
    }
    e.chi = partition_of_unity(nb, grid, mesh, field, kappa0);
    bank.nbs[i] = std::move(nb);
    bank.entries[i] = std::move(e);
  }
  return bank;
}

MultiscaleSpace offline_space_from_bank(const OfflineBank& bank, const DofMap& dm, int N_b) {
  MultiscaleSpace sp;
  sp.n_free = dm.n_dofs();
  int nv = (int)bank.nbs.size();
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < nv; ++i) {
      const Neighborhood& nb = bank.nbs[i];
      const auto& e = bank.entries[i];
      if (N_b > (int)e.lambda[l].size())
        throw SolverError("offline_space_from_bank: N_b exceeds bank size");
      int n_local = nb.n_local();
      for (int k = 0; k < N_b; ++k) {
        BasisColumn col;
        col.kind = BasisColumn::Kind::Offline;
        col.nbhd = i;
        col.comp = l;
        col.k = k;
        col.lambda = e.lambda[l][k];
        for (int c = 0; c < 3; ++c)
          for (int nd : nb.interior_nodes) {
            int j = nb.local(nd);
            double v = e.chi[c][j] * e.vecs[l](c * n_local + j, k);
            if (v != 0.0) {
              col.rows.push_back(dm.dof(c, dm.node_to_free[nd]));
              col.vals.push_back(v);
            }
          }
        // a perforation can pinch off a corner of omega_i where the PoU
        // vanishes; the product with an island-supported mode is then empty
        if (!col.rows.empty()) sp.cols.push_back(std::move(col));
      }
    }
  sp.n_offline = (int)sp.cols.size();
  return sp;
}

MultiscaleSpace build_offline_space(const TriMesh& mesh, const CoarseGrid& grid,
                                    const MaterialField& field, const KappaField& kappa0,
                                    const DofMap& dm, int N_b) {
  OfflineBank bank = build_offline_bank(mesh, grid, field, kappa0, N_b);
  return offline_space_from_bank(bank, dm, N_b);
}

CoarseSolveResult coarse_solve(const MultiscaleSpace& space, const CoarseGrid& grid,
                               const CsrMatrix& A, const std::vector<double>& b) {
  int nc = space.dof_h(), nf = space.n_free;
  if (nc == 0) throw SolverError("coarse_solve: empty space");

  // columns grouped by coarse vertex; supports overlap only within 2 cells
  int nvx = grid.Nx + 1;
  std::vector<std::vector<int>> by_vertex(grid.n_vertices());
  for (int j = 0; j < nc; ++j) by_vertex[space.cols[j].nbhd].push_back(j);
  auto candidates = [&](int j, std::vector<int>& out) {
    out.clear();
    int v = space.cols[j].nbhd, ax = v % nvx, ay = v / nvx;
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        int bx = ax + dx, by = ay + dy;
        if (bx < 0 || bx >= nvx || by < 0 || by >= (int)grid.Ny + 1) continue;
        for (int k : by_vertex[by * nvx + bx])
          if (k >= j) out.push_back(k);
      }
  };

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nc, nc);
  std::vector<double> rhs(nc);
#pragma omp parallel
  {
    std::vector<double> y(nf);
    std::vector<int> cand;
#pragma omp for schedule(dynamic, 8)
    for (int j = 0; j < nc; ++j) {
      const BasisColumn& cj = space.cols[j];
      std::fill(y.begin(), y.end(), 0.0);
      // y = A r_j via symmetry: accumulate value * row(A, entry)
      for (size_t e = 0; e < cj.rows.size(); ++e) {
        int r = cj.rows[e];
        double v = cj.vals[e];
        for (int p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p) y[A.col[p]] += v * A.val[p];
      }
      candidates(j, cand);
      for (int k : cand) {
        const BasisColumn& ck = space.cols[k];
        double s = 0;
        for (size_t e = 0; e < ck.rows.size(); ++e) s += y[ck.rows[e]] * ck.vals[e];
        G(k, j) = s;
        G(j, k) = s;
      }
      double sb = 0;
      for (size_t e = 0; e < cj.rows.size(); ++e) sb += b[cj.rows[e]] * cj.vals[e];
      rhs[j] = sb;
    }
  }

  // symmetric Jacobi scaling: online columns scale like the residual, so the
  // raw Gram diagonal spans many orders of magnitude
  Eigen::VectorXd d = G.diagonal();
  for (int j = 0; j < nc; ++j) {
    if (!(d(j) > 0)) throw SolverError("coarse_solve: zero-energy basis column");
    d(j) = 1.0 / std::sqrt(d(j));
  }
  Eigen::MatrixXd Gs = d.asDiagonal() * G * d.asDiagonal();

  Eigen::LLT<Eigen::MatrixXd> llt(Gs);
  double pivot = 0;
  if (llt.info() == Eigen::Success) {
    double min_diag = llt.matrixLLT().diagonal().minCoeff();
    pivot = min_diag * min_diag * (min_diag < 0 ? -1.0 : 1.0);
  }
  if (llt.info() != Eigen::Success || pivot < 1e-13)
    throw SolverError("coarse_solve: redundant basis (pivot " + std::to_string(pivot) + ")");

  Eigen::VectorXd rv = Eigen::Map<Eigen::VectorXd>(rhs.data(), nc);
  rv = rv.cwiseProduct(d);
  Eigen::VectorXd c = llt.solve(rv).cwiseProduct(d);

  CoarseSolveResult out;
  out.min_pivot = pivot;
  out.coarse.assign(c.data(), c.data() + nc);
  out.fine.assign(nf, 0.0);
  for (int j = 0; j < nc; ++j) {
    const BasisColumn& cj = space.cols[j];
    for (size_t e = 0; e < cj.rows.size(); ++e) out.fine[cj.rows[e]] += c(j) * cj.vals[e];
  }
  return out;
}

OfflineSolveResult picard_solve_offline(const TriMesh& mesh, const CoarseGrid& grid,
                                        const MaterialField& field, const DofMap& dm, int N_b,
                                        const PicardOptions& opts, const OfflineBank* bank) {
  SystemState guess = constant_state(mesh, 1e-6, 1e-6);
  KappaField kappa0 = kappa_field(guess, mesh, field, opts.policy);

  OfflineSolveResult out;
  out.space = bank ? offline_space_from_bank(*bank, dm, N_b)
                   : build_offline_space(mesh, grid, field, kappa0, dm, N_b);

  std::vector<double> b = assemble_rhs(mesh, field, dm);
  SystemState prev = guess;
  std::vector<double> x_prev = restrict_free(guess, mesh, dm);
  KappaField kappa = kappa0;
  PicardResult& pr = out.picard;

  for (int it = 1; it <= opts.max_iter; ++it) {
    CsrMatrix A = assemble_from_kappa(kappa, mesh, field, dm);
    CoarseSolveResult cs = coarse_solve(out.space, grid, A, b);
    SystemState next =
        limited_step(prev, expand_free(cs.fine, mesh, dm), mesh, field, opts.policy);
    next.iteration = it;
    std::vector<double> x_next = restrict_free(next, mesh, dm);

    std::vector<double> diff(x_next.size()), Ad(x_next.size());
    for (size_t i = 0; i < diff.size(); ++i) diff[i] = x_next[i] - x_prev[i];
    A.apply(diff, Ad);
    double num = std::sqrt(std::max(0.0, det_dot(diff, Ad)));
    A.apply(x_prev, Ad);
    double den = std::sqrt(std::max(0.0, det_dot(x_prev, Ad)));
    double rel = den > 0 ? num / den : num;

    pr.trace.push_back({it, rel, kappa.max_sqrt_q, out.space.dof_h()});
    x_prev = std::move(x_next);
    prev = std::move(next);
    pr.iterations = it;
    if (rel <= opts.delta0) {
      pr.converged = true;
      break;
    }
    kappa = kappa_field(prev, mesh, field, opts.policy);
  }
  pr.state = std::move(prev);
  pr.kappa_final = kappa_field(pr.state, mesh, field, opts.policy);
  return out;
}

}  // namespace cosserat
