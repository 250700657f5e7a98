#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace cosserat {

struct TriMesh;
struct Disk;

// Per-active-triangle material coefficients plus the load amplitudes.
struct MaterialField {
  std::vector<double> xi, alpha, beta;
  double f_v = 0, g_v = 0;
};

// Body loads f_i = f_v sqrt(x1^2+x2^2+1), couple g3 = g_v sqrt(x1^2+x2^2+1).
std::array<double, 3> source_at(const MaterialField& f, double x, double y);

// Homogeneous matrix material (perforated media cases).
// case 1: xi=1, alpha=1.1, beta=1;        f_v=0.29,    g_v=0.3
// case 2: xi=1.2, alpha=1.3, beta=1e4;    f_v=3.5e-5,  g_v=3.6e-5
MaterialField perforated_field(int case_id, const TriMesh& mesh);

// Two-phase composite: matrix Omega_1, inclusions Omega_2 by triangle mask.
// case 1: (1, 1.1, 1) / (1000, 2000, 1e-4);     f_v=0.3,     g_v=0.31
// case 2: (1.2, 1.3, 1e4) / (3000, 4000, 1);    f_v=3.6e-5,  g_v=3.45e-5
MaterialField composite_field(int case_id, const TriMesh& mesh,
                              const std::vector<std::uint8_t>& inclusion_mask);

// Centroid-in-disk inclusion mask; default layout is a 2x2 array of disks of
// radius 0.08 centered at {0.5, 1.5}^2, strictly interior to the 0.2-pitch
// coarse cells.
std::vector<std::uint8_t> inclusion_mask(const TriMesh& mesh, const std::vector<Disk>& disks);
std::vector<Disk> default_inclusions();

// Smooth log-scale random fields: white noise on a 20x20 lattice over [0,2]^2,
// bilinear interpolation at centroids, exp, then exact affine rescale per
// coefficient so the min/max over active triangles hit the range endpoints.
// case 1: xi in [1,10], alpha in [1.1,11], beta in [1,10];     f_v=2.2e-3,  g_v=2.3e-3
// case 2: xi in [1.2,12], alpha in [1.3,13], beta log-uniform [1e3,1e5];
//         f_v=5.35e-7, g_v=5.4e-7
MaterialField stochastic_field(int case_id, std::uint64_t seed, const TriMesh& mesh);

// Default perforation layout used by the experiment configs: 16 disks of radius
// 0.08 at (0.25+0.5j, 0.25+0.5k), j,k in 0..3.
std::vector<Disk> default_perforations();

}  // namespace cosserat
