#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "cosserat/fem_core.hpp"
#include "cosserat/geometry.hpp"

namespace cosserat {

// One multiscale basis column over the fine free dofs (sparse, rows ascending).
struct BasisColumn {
  enum class Kind { Offline, Online };
  Kind kind = Kind::Offline;
  int nbhd = 0;    // coarse vertex id
  int comp = 0;    // offline: snapshot component l; online: split component
  int k = 0;       // offline: eigenvalue index
  int level = 0;   // online: enrichment level
  double lambda = 0;
  std::vector<int> rows;
  std::vector<double> vals;
};

// Offline columns come first, ordered component-major, then neighborhood, then
// eigenvalue index; online columns are appended in enrichment order.
struct MultiscaleSpace {
  int n_free = 0;
  int n_offline = 0;
  std::vector<BasisColumn> cols;

  int dof_h() const { return (int)cols.size(); }
  void drop_online() {
    cols.resize(n_offline);
  }
};

// Dense local operator (and optionally the weighted mass s_n) over all local
// dofs of the neighborhood, component-major ordering l*n_local + j, no BC.
void assemble_local(const Neighborhood& nb, const TriMesh& mesh, const MaterialField& field,
                    const KappaField& kappa, Eigen::MatrixXd* A, Eigen::MatrixXd* S);

// Harmonic-type snapshot columns for component l: one column per boundary node
// of omega_i, Dirichlet delta data in component l, zero in the others.
Eigen::MatrixXd compute_snapshots(const Neighborhood& nb, const TriMesh& mesh,
                                  const MaterialField& field, const KappaField& kappa, int l);

struct SpectralBasis {
  Eigen::MatrixXd vecs;         // fine local dofs x N_b
  std::vector<double> lambda;   // ascending
};

// Rayleigh-quotient reduction of the snapshot space: a_n eigenvectors against
// the weighted mass s_n, smallest N_b eigenvalues kept, S-orthonormal,
// sign-normalized so the largest-magnitude entry is positive.
SpectralBasis spectral_basis(const Eigen::MatrixXd& snapshots, const Eigen::MatrixXd& A_loc,
                             const Eigen::MatrixXd& S_loc, int N_b);

// Coupled multiscale partition of unity chi_i; per-component nodal values over
// the local nodes of omega_i (zero on the outer neighborhood boundary).
std::array<std::vector<double>, 3> partition_of_unity(const Neighborhood& nb,
                                                      const CoarseGrid& grid,
                                                      const TriMesh& mesh,
                                                      const MaterialField& field,
                                                      const KappaField& kappa);

// Spectral bases and PoU for every neighborhood at one linearization state;
// reusable for any N_b <= max_nb.
struct OfflineBank {
  struct Entry {
    std::array<Eigen::MatrixXd, 3> vecs;
    std::array<std::vector<double>, 3> lambda;
    std::array<std::vector<double>, 3> chi;
  };
  std::vector<Neighborhood> nbs;
  std::vector<Entry> entries;
  int max_nb = 0;
};

OfflineBank build_offline_bank(const TriMesh& mesh, const CoarseGrid& grid,
                               const MaterialField& field, const KappaField& kappa0, int max_nb);
MultiscaleSpace offline_space_from_bank(const OfflineBank& bank, const DofMap& dm, int N_b);
MultiscaleSpace build_offline_space(const TriMesh& mesh, const CoarseGrid& grid,
                                    const MaterialField& field, const KappaField& kappa0,
                                    const DofMap& dm, int N_b);

struct CoarseSolveResult {
  std::vector<double> coarse;  // coefficients per column
  std::vector<double> fine;    // expansion over free dofs
  double min_pivot = 0;
};

// Galerkin solve in the multiscale space: dense factorization of R^T A R with a
// pivot guard against redundant columns.
CoarseSolveResult coarse_solve(const MultiscaleSpace& space, const CoarseGrid& grid,
                               const CsrMatrix& A, const std::vector<double>& b);

struct OfflineSolveResult {
  PicardResult picard;
  MultiscaleSpace space;
};

// Picard iteration in the offline space (built once at the initial guess);
// stops on the relative successive difference in the operator energy norm.
OfflineSolveResult picard_solve_offline(const TriMesh& mesh, const CoarseGrid& grid,
                                        const MaterialField& field, const DofMap& dm, int N_b,
                                        const PicardOptions& opts = {},
                                        const OfflineBank* bank = nullptr);

}  // namespace cosserat
