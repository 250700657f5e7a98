#pragma once

#include <array>
#include <string>
#include <vector>

#include "cosserat/geometry.hpp"
#include "cosserat/linalg.hpp"
#include "cosserat/media.hpp"

namespace cosserat {

// Unknown ordering: all u1 values, then all u2, then all Phi, over free nodes
// (active nodes not on the outer Dirichlet boundary; perforation boundaries are
// natural). Nodal state vectors run over active nodes in the same order.
struct DofMap {
  int n_active = 0, n_free = 0;
  std::vector<int> node_to_free;  // node id -> free node index, -1 if constrained/inactive
  std::vector<int> free_to_node;

  int dof(int comp, int free_node) const { return comp * n_free + free_node; }
  int n_dofs() const { return 3 * n_free; }
};

DofMap make_dof_map(const TriMesh& mesh);

struct SystemState {
  std::vector<double> dofs;  // 3 * n_active, u1 | u2 | Phi
  int iteration = 0;
};

SystemState constant_state(const TriMesh& mesh, double u0, double phi0);
// free-dof vector <-> active-node state (Dirichlet entries zero)
std::vector<double> restrict_free(const SystemState& s, const TriMesh& mesh, const DofMap& dm);
SystemState expand_free(const std::vector<double>& x, const TriMesh& mesh, const DofMap& dm);

// 3-point Gauss rule (degree 2): barycentric points, weight area/3 each.
inline constexpr double kQuadBary[3][3] = {
    {2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}};

enum class LimitPolicy { Strict, Clamp };

// kappa = 1/(1 - sqrt(Q)) per (triangle, quadrature point).
struct KappaField {
  std::vector<double> k;  // 3 * n_tris, qp fastest
  double max_sqrt_q = 0;
  long clamp_count = 0;
};

KappaField kappa_field(const SystemState& s, const TriMesh& mesh, const MaterialField& field,
                       LimitPolicy policy = LimitPolicy::Strict);

// relative L2 distance between kappa fields (quadrature-weighted)
double kappa_rel_change(const KappaField& a, const KappaField& b, const TriMesh& mesh);

struct SparseOperator {
  CsrMatrix A;
  KappaField kappa;
};

// Coupled Picard operator at the linearization state; node-parallel assembly,
// bitwise deterministic at any thread count.
SparseOperator assemble_operator(const SystemState& lin_state, const TriMesh& mesh,
                                 const MaterialField& field, const DofMap& dm,
                                 LimitPolicy policy = LimitPolicy::Strict);
CsrMatrix assemble_from_kappa(const KappaField& kappa, const TriMesh& mesh,
                              const MaterialField& field, const DofMap& dm);
// serial element-scatter reference implementation
CsrMatrix assemble_operator_serial(const KappaField& kappa, const TriMesh& mesh,
                                   const MaterialField& field, const DofMap& dm);

std::vector<double> assemble_rhs(const TriMesh& mesh, const MaterialField& field,
                                 const DofMap& dm);

// lumped mass per active node; L2 norms of nodal states
std::vector<double> lumped_mass(const TriMesh& mesh);
double lumped_norm(const std::vector<double>& state3n, const std::vector<double>& mass);

struct PicardOptions {
  double delta0 = 1e-5;
  int max_iter = 100;
  double cg_tol = 1e-10;
  int cg_max = 50000;
  LimitPolicy policy = LimitPolicy::Strict;
};

// Backtracks target toward the previous (feasible) iterate until Q < 1 on
// every quadrature point; a Picard step linearized at a soft kappa can
// overshoot the strain limit even when the fixed point is well inside it.
// Returns the accepted state and stores the step factor if asked. Under the
// Clamp policy the full step is returned untouched.
SystemState limited_step(const SystemState& prev, SystemState target, const TriMesh& mesh,
                         const MaterialField& field, LimitPolicy policy,
                         double* step = nullptr);

struct TraceRow {
  int iter = 0;
  double rel_change = 0;
  double max_sqrt_q = 0;
  int inner_iters = 0;  // CG iterations (fine) / coarse dim (multiscale)
};

struct PicardResult {
  SystemState state;
  int iterations = 0;
  bool converged = false;
  KappaField kappa_final;
  std::vector<TraceRow> trace;
};

// Fine-grid Picard iteration; stops on the relative lumped-L2 successive
// difference (absolute if the previous iterate vanishes).
PicardResult picard_solve_fine(const TriMesh& mesh, const MaterialField& field, const DofMap& dm,
                               const PicardOptions& opts = {});

// P1 evaluation at a point (0 outside active triangles); nodal array indexed by node id
double eval_p1(const TriMesh& mesh, const std::vector<double>& per_node, double x, double y);
// state component -> per-node-id array (inactive nodes zero); comp in {0,1,2}
std::vector<double> per_node_component(const SystemState& s, const TriMesh& mesh, int comp);

}  // namespace cosserat
