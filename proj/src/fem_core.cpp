#include "cosserat/fem_core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cosserat/errors.hpp"
#include "cosserat/parallel.hpp"

namespace cosserat {

DofMap make_dof_map(const TriMesh& mesh) {
  DofMap dm;
  dm.n_active = mesh.n_active_nodes();
  dm.node_to_free.assign(mesh.n_nodes(), -1);
  for (int n : mesh.active_to_node) {
    if (mesh.on_outer_boundary(n)) continue;
    dm.node_to_free[n] = dm.n_free++;
    dm.free_to_node.push_back(n);
  }
  return dm;
}

SystemState constant_state(const TriMesh& mesh, double u0, double phi0) {
  SystemState s;
  int na = mesh.n_active_nodes();
  s.dofs.assign(3 * na, 0.0);
  for (int i = 0; i < na; ++i) {
    s.dofs[i] = u0;
    s.dofs[na + i] = u0;
    s.dofs[2 * na + i] = phi0;
  }
  return s;
}

std::vector<double> restrict_free(const SystemState& s, const TriMesh& mesh, const DofMap& dm) {
  std::vector<double> x(dm.n_dofs());
  int na = dm.n_active;
  for (int f = 0; f < dm.n_free; ++f) {
    int a = mesh.node_to_active[dm.free_to_node[f]];
    for (int c = 0; c < 3; ++c) x[dm.dof(c, f)] = s.dofs[c * na + a];
  }
  return x;
}

SystemState expand_free(const std::vector<double>& x, const TriMesh& mesh, const DofMap& dm) {
  SystemState s;
  int na = dm.n_active;
  s.dofs.assign(3 * na, 0.0);
  for (int f = 0; f < dm.n_free; ++f) {
    int a = mesh.node_to_active[dm.free_to_node[f]];
    for (int c = 0; c < 3; ++c) s.dofs[c * na + a] = x[dm.dof(c, f)];
  }
  return s;
}

KappaField kappa_field(const SystemState& s, const TriMesh& mesh, const MaterialField& field,
                       LimitPolicy policy) {
  int nt = mesh.n_tris(), na = mesh.n_active_nodes();
  KappaField kf;
  kf.k.resize(3 * nt);
  int nthreads = max_threads();
  std::vector<double> max_q(nthreads, 0.0);
  std::vector<long> clamps(nthreads, 0);
  std::vector<double> bad_q(nthreads, -1.0);

#pragma omp parallel
  {
    int tid = omp_get_thread_num();
#pragma omp for schedule(static)
    for (int t = 0; t < nt; ++t) {
      auto& tr = mesh.tris[t];
      double u1[3], u2[3], ph[3];
      for (int a = 0; a < 3; ++a) {
        int ai = mesh.node_to_active[tr[a]];
        u1[a] = s.dofs[ai];
        u2[a] = s.dofs[na + ai];
        ph[a] = s.dofs[2 * na + ai];
      }
      double du1[2] = {0, 0}, du2[2] = {0, 0}, dph[2] = {0, 0};
      for (int a = 0; a < 3; ++a)
        for (int d = 0; d < 2; ++d) {
          du1[d] += u1[a] * mesh.grad[t][a][d];
          du2[d] += u2[a] * mesh.grad[t][a][d];
          dph[d] += ph[a] * mesh.grad[t][a][d];
        }
      double xi2 = field.xi[t] * field.xi[t], al2 = field.alpha[t] * field.alpha[t];
      double be2 = field.beta[t] * field.beta[t];
      for (int q = 0; q < 3; ++q) {
        double phi = kQuadBary[q][0] * ph[0] + kQuadBary[q][1] * ph[1] + kQuadBary[q][2] * ph[2];
        // gamma_ij = u_{j,i} + eps_{ji} phi
        double g11 = du1[0], g12 = du2[0] - phi, g21 = du1[1] + phi, g22 = du2[1];
        double sum_g = g11 * g11 + g12 * g12 + g21 * g21 + g22 * g22;
        double qv = be2 * (al2 * (dph[0] * dph[0] + dph[1] * dph[1]) + xi2 * sum_g);
        double sq = std::sqrt(qv);
        max_q[tid] = std::max(max_q[tid], sq);
        if (sq >= 1.0) {
          if (policy == LimitPolicy::Strict) {
            if (bad_q[tid] < 0) bad_q[tid] = qv;
          } else {
            sq = 1.0 - 1e-8;
            clamps[tid]++;
          }
        }
        kf.k[3 * t + q] = 1.0 / (1.0 - sq);
      }
    }
  }
  for (int i = 0; i < nthreads; ++i) {
    kf.max_sqrt_q = std::max(kf.max_sqrt_q, max_q[i]);
    kf.clamp_count += clamps[i];
    if (bad_q[i] >= 0)
      throw StrainLimitError(bad_q[i], "kappa_field: Q at or beyond the strain limit");
  }
  return kf;
}

double kappa_rel_change(const KappaField& a, const KappaField& b, const TriMesh& mesh) {
  double num = 0, den = 0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    double w = mesh.area[t] / 3.0;
    for (int q = 0; q < 3; ++q) {
      double d = a.k[3 * t + q] - b.k[3 * t + q];
      num += w * d * d;
      den += w * b.k[3 * t + q] * b.k[3 * t + q];
    }
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

namespace {

// sparsity pattern of the coupled operator over free dofs (u1-u2 blocks are
// identically zero and omitted)
CsrMatrix build_pattern(const TriMesh& mesh, const DofMap& dm) {
  int nf = dm.n_free;
  std::vector<std::vector<int>> cols(3 * nf);
#pragma omp parallel for schedule(static)
  for (int f = 0; f < nf; ++f) {
    int n = dm.free_to_node[f];
    std::set<int> nbr;
    for (int t : mesh.node_tris[n])
      for (int v : mesh.tris[t]) {
        int vf = dm.node_to_free[v];
        if (vf >= 0) nbr.insert(vf);
      }
    std::vector<int>& c0 = cols[dm.dof(0, f)];
    std::vector<int>& c1 = cols[dm.dof(1, f)];
    std::vector<int>& c2 = cols[dm.dof(2, f)];
    for (int vf : nbr) c0.push_back(dm.dof(0, vf));
    for (int vf : nbr) c0.push_back(dm.dof(2, vf));
    for (int vf : nbr) c1.push_back(dm.dof(1, vf));
    for (int vf : nbr) c1.push_back(dm.dof(2, vf));
    for (int vf : nbr) c2.push_back(dm.dof(0, vf));
    for (int vf : nbr) c2.push_back(dm.dof(1, vf));
    for (int vf : nbr) c2.push_back(dm.dof(2, vf));
  }
  return csr_from_pattern(cols);
}

struct ElementMatrix {
  // 9x9 in local blocks: rows/cols (u1 a), (u2 a), (phi a), a = 0..2
  double m[9][9];
};

// element matrix for triangle t at the given kappa values (one per qp)
ElementMatrix element_matrix(const TriMesh& mesh, const MaterialField& field,
                             const double* kq3, int t) {
  ElementMatrix e{};
  double xi2 = field.xi[t] * field.xi[t], al2 = field.alpha[t] * field.alpha[t];
  double w = mesh.area[t] / 3.0;
  auto& g = mesh.grad[t];
  for (int q = 0; q < 3; ++q) {
    double kw = kq3[q] * w;
    for (int a = 0; a < 3; ++a) {
      double pa = kQuadBary[q][a];
      for (int b = 0; b < 3; ++b) {
        double pb = kQuadBary[q][b];
        double gg = g[a][0] * g[b][0] + g[a][1] * g[b][1];
        e.m[a][b] += kw * xi2 * gg;                           // u1-u1
        e.m[3 + a][3 + b] += kw * xi2 * gg;                   // u2-u2
        e.m[a][6 + b] += kw * xi2 * g[a][1] * pb;             // u1-phi
        e.m[3 + a][6 + b] -= kw * xi2 * g[a][0] * pb;         // u2-phi
        e.m[6 + a][b] += kw * xi2 * pa * g[b][1];             // phi-u1
        e.m[6 + a][3 + b] -= kw * xi2 * pa * g[b][0];         // phi-u2
        e.m[6 + a][6 + b] += kw * (al2 * gg + 2.0 * xi2 * pa * pb);
      }
    }
  }
  return e;
}

}  // namespace

CsrMatrix assemble_from_kappa(const KappaField& kappa, const TriMesh& mesh,
                              const MaterialField& field, const DofMap& dm) {
  CsrMatrix A = build_pattern(mesh, dm);
  int nf = dm.n_free;
  // row-owned accumulation: each free node's three rows are filled by one
  // thread in fixed triangle order, so the result is thread-count independent
#pragma omp parallel for schedule(static)
  for (int f = 0; f < nf; ++f) {
    int n = dm.free_to_node[f];
    for (int t : mesh.node_tris[n]) {
      auto& tr = mesh.tris[t];
      int a = (tr[0] == n) ? 0 : (tr[1] == n ? 1 : 2);
      ElementMatrix e = element_matrix(mesh, field, &kappa.k[3 * t], t);
      for (int b = 0; b < 3; ++b) {
        int bf = dm.node_to_free[tr[b]];
        if (bf < 0) continue;
        A.at(dm.dof(0, f), dm.dof(0, bf)) += e.m[a][b];
        A.at(dm.dof(0, f), dm.dof(2, bf)) += e.m[a][6 + b];
        A.at(dm.dof(1, f), dm.dof(1, bf)) += e.m[3 + a][3 + b];
        A.at(dm.dof(1, f), dm.dof(2, bf)) += e.m[3 + a][6 + b];
        A.at(dm.dof(2, f), dm.dof(0, bf)) += e.m[6 + a][b];
        A.at(dm.dof(2, f), dm.dof(1, bf)) += e.m[6 + a][3 + b];
        A.at(dm.dof(2, f), dm.dof(2, bf)) += e.m[6 + a][6 + b];
      }
    }
  }
  return A;
}

SparseOperator assemble_operator(const SystemState& lin_state, const TriMesh& mesh,
                                 const MaterialField& field, const DofMap& dm,
                                 LimitPolicy policy) {
  SparseOperator op;
  op.kappa = kappa_field(lin_state, mesh, field, policy);
  op.A = assemble_from_kappa(op.kappa, mesh, field, dm);
  return op;
}

CsrMatrix assemble_operator_serial(const KappaField& kappa, const TriMesh& mesh,
                                   const MaterialField& field, const DofMap& dm) {
  CsrMatrix A = build_pattern(mesh, dm);
  for (int t = 0; t < mesh.n_tris(); ++t) {
    ElementMatrix e = element_matrix(mesh, field, &kappa.k[3 * t], t);
    auto& tr = mesh.tris[t];
    for (int a = 0; a < 3; ++a) {
      int af = dm.node_to_free[tr[a]];
      if (af < 0) continue;
      for (int b = 0; b < 3; ++b) {
        int bf = dm.node_to_free[tr[b]];
        if (bf < 0) continue;
        A.at(dm.dof(0, af), dm.dof(0, bf)) += e.m[a][b];
        A.at(dm.dof(0, af), dm.dof(2, bf)) += e.m[a][6 + b];
        A.at(dm.dof(1, af), dm.dof(1, bf)) += e.m[3 + a][3 + b];
        A.at(dm.dof(1, af), dm.dof(2, bf)) += e.m[3 + a][6 + b];
        A.at(dm.dof(2, af), dm.dof(0, bf)) += e.m[6 + a][b];
        A.at(dm.dof(2, af), dm.dof(1, bf)) += e.m[6 + a][3 + b];
        A.at(dm.dof(2, af), dm.dof(2, bf)) += e.m[6 + a][6 + b];
      }
    }
  }
  return A;
}

std::vector<double> assemble_rhs(const TriMesh& mesh, const MaterialField& field,
                                 const DofMap& dm) {
  std::vector<double> b(dm.n_dofs(), 0.0);
  int nf = dm.n_free;
#pragma omp parallel for schedule(static)
  for (int f = 0; f < nf; ++f) {
    int n = dm.free_to_node[f];
    double s1 = 0, s3 = 0;
    for (int t : mesh.node_tris[n]) {
      auto& tr = mesh.tris[t];
      int a = (tr[0] == n) ? 0 : (tr[1] == n ? 1 : 2);
      double w = mesh.area[t] / 3.0;
      for (int q = 0; q < 3; ++q) {
        double xq = 0, yq = 0;
        for (int c = 0; c < 3; ++c) {
          xq += kQuadBary[q][c] * mesh.x[tr[c]];
          yq += kQuadBary[q][c] * mesh.y[tr[c]];
        }
        auto src = source_at(field, xq, yq);
        s1 += w * kQuadBary[q][a] * src[0];
        s3 += w * kQuadBary[q][a] * src[2];
      }
    }
    b[dm.dof(0, f)] = s1;
    b[dm.dof(1, f)] = s1;  // f1 = f2
    b[dm.dof(2, f)] = s3;
  }
  return b;
}

std::vector<double> lumped_mass(const TriMesh& mesh) {
  std::vector<double> m(mesh.n_active_nodes(), 0.0);
  for (int t = 0; t < mesh.n_tris(); ++t)
    for (int v : mesh.tris[t]) m[mesh.node_to_active[v]] += mesh.area[t] / 3.0;
  return m;
}

double lumped_norm(const std::vector<double>& s, const std::vector<double>& mass) {
  int na = (int)mass.size();
  double sum = 0;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < na; ++i) sum += mass[i] * s[c * na + i] * s[c * na + i];
  return std::sqrt(sum);
}

SystemState limited_step(const SystemState& prev, SystemState target, const TriMesh& mesh,
                         const MaterialField& field, LimitPolicy policy, double* step) {
  if (step) *step = 1.0;
  if (policy != LimitPolicy::Strict) return target;
  std::vector<double> dir(target.dofs.size());
  for (size_t i = 0; i < dir.size(); ++i) dir[i] = target.dofs[i] - prev.dofs[i];
  double s = 1.0;
  for (int half = 0; half <= 40; ++half) {
    KappaField probe = kappa_field(target, mesh, field, LimitPolicy::Clamp);
    if (probe.max_sqrt_q < 1.0 - 1e-10) {
      if (step) *step = s;
      return target;
    }
    if (half == 40)
      throw StrainLimitError(probe.max_sqrt_q * probe.max_sqrt_q,
                             "picard step: strain limit violated at a vanishing step");
    s *= 0.5;
    for (size_t i = 0; i < dir.size(); ++i) target.dofs[i] = prev.dofs[i] + s * dir[i];
  }
  return target;  // unreachable
}

PicardResult picard_solve_fine(const TriMesh& mesh, const MaterialField& field, const DofMap& dm,
                               const PicardOptions& opts) {
  PicardResult res;
  std::vector<double> mass = lumped_mass(mesh);
  std::vector<double> b = assemble_rhs(mesh, field, dm);
  SystemState prev = constant_state(mesh, 1e-6, 1e-6);  // boundary values included
  std::vector<double> x = restrict_free(prev, mesh, dm);

  for (int it = 1; it <= opts.max_iter; ++it) {
    SparseOperator op = assemble_operator(prev, mesh, field, dm, opts.policy);
    CgResult cg = solve_spd(op.A, b, opts.cg_tol, opts.cg_max, &x);
    SystemState next =
        limited_step(prev, expand_free(cg.x, mesh, dm), mesh, field, opts.policy);
    next.iteration = it;
    x = restrict_free(next, mesh, dm);

    std::vector<double> diff(next.dofs.size());
    for (size_t i = 0; i < diff.size(); ++i) diff[i] = next.dofs[i] - prev.dofs[i];
    double den = lumped_norm(prev.dofs, mass);
    double rel = lumped_norm(diff, mass);
    if (den > 0) rel /= den;

    res.trace.push_back({it, rel, op.kappa.max_sqrt_q, cg.iterations});
    prev = std::move(next);
    res.iterations = it;
    if (rel <= opts.delta0) {
      res.converged = true;
      break;
    }
  }
  res.kappa_final = kappa_field(prev, mesh, field, opts.policy);
  res.state = std::move(prev);
  return res;
}

double eval_p1(const TriMesh& mesh, const std::vector<double>& per_node, double x, double y) {
  int nx = mesh.nx;
  double h = mesh.h;
  int ix = std::clamp((int)(x / h), 0, nx - 1);
  int iy = std::clamp((int)(y / h), 0, nx - 1);
  double lx = x / h - ix, ly = y / h - iy;
  int half = (ly <= lx) ? 0 : 1;
  int t = mesh.cell_tris[iy * nx + ix][half];
  if (t < 0) return 0.0;
  double lam[3];
  if (half == 0) {  // (a,b,c): (0,0) (1,0) (1,1)
    lam[0] = 1 - lx;
    lam[1] = lx - ly;
    lam[2] = ly;
  } else {  // (a,c,d): (0,0) (1,1) (0,1)
    lam[0] = 1 - ly;
    lam[1] = lx;
    lam[2] = ly - lx;
  }
  auto& tr = mesh.tris[t];
  return lam[0] * per_node[tr[0]] + lam[1] * per_node[tr[1]] + lam[2] * per_node[tr[2]];
}

std::vector<double> per_node_component(const SystemState& s, const TriMesh& mesh, int comp) {
  std::vector<double> v(mesh.n_nodes(), 0.0);
  int na = mesh.n_active_nodes();
  for (int a = 0; a < na; ++a) v[mesh.active_to_node[a]] = s.dofs[comp * na + a];
  return v;
}

}  // namespace cosserat
