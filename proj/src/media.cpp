#include "cosserat/media.hpp"

#include <algorithm>
#include <cmath>

#include "cosserat/errors.hpp"
#include "cosserat/geometry.hpp"
#include "cosserat/rng.hpp"

namespace cosserat {

std::array<double, 3> source_at(const MaterialField& f, double x, double y) {
  double s = std::sqrt(x * x + y * y + 1.0);
  return {f.f_v * s, f.f_v * s, f.g_v * s};
}

static void check_case(int case_id) {
  if (case_id != 1 && case_id != 2) throw ConfigError("media: case must be 1 or 2");
}

MaterialField perforated_field(int case_id, const TriMesh& mesh) {
  check_case(case_id);
  MaterialField f;
  double xi = case_id == 1 ? 1.0 : 1.2;
  double al = case_id == 1 ? 1.1 : 1.3;
  double be = case_id == 1 ? 1.0 : 1e4;
  f.f_v = case_id == 1 ? 0.29 : 3.5e-5;
  f.g_v = case_id == 1 ? 0.3 : 3.6e-5;
  int nt = mesh.n_tris();
  f.xi.assign(nt, xi);
  f.alpha.assign(nt, al);
  f.beta.assign(nt, be);
  return f;
}

std::vector<std::uint8_t> inclusion_mask(const TriMesh& mesh, const std::vector<Disk>& disks) {
  std::vector<std::uint8_t> mask(mesh.n_tris(), 0);
  for (int t = 0; t < mesh.n_tris(); ++t) {
    auto& tr = mesh.tris[t];
    double cx = (mesh.x[tr[0]] + mesh.x[tr[1]] + mesh.x[tr[2]]) / 3.0;
    double cy = (mesh.y[tr[0]] + mesh.y[tr[1]] + mesh.y[tr[2]]) / 3.0;
    for (const Disk& d : disks) {
      double dx = cx - d.cx, dy = cy - d.cy;
      if (dx * dx + dy * dy < d.r * d.r) {
        mask[t] = 1;
        break;
      }
    }
  }
  return mask;
}

std::vector<Disk> default_inclusions() {
  // strictly interior to 0.2-pitch coarse cells; straddling layouts poison the
  // partition-of-unity cell solves at high contrast
  static const double c[2] = {0.5, 1.5};
  std::vector<Disk> d;
  for (double cx : c)
    for (double cy : c) d.push_back({cx, cy, 0.08});
  return d;
}

std::vector<Disk> default_perforations() {
  std::vector<Disk> d;
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) d.push_back({0.25 + 0.5 * j, 0.25 + 0.5 * k, 0.08});
  return d;
}

MaterialField composite_field(int case_id, const TriMesh& mesh,
                              const std::vector<std::uint8_t>& mask) {
  check_case(case_id);
  if ((int)mask.size() != mesh.n_tris())
    throw ConfigError("composite_field: mask size mismatch");
  double m1[3], m2[3];  // xi, alpha, beta per phase
  if (case_id == 1) {
    m1[0] = 1.0;
    m1[1] = 1.1;
    m1[2] = 1.0;
    m2[0] = 1000.0;
    m2[1] = 2000.0;
    m2[2] = 1e-4;
  } else {
    m1[0] = 1.2;
    m1[1] = 1.3;
    m1[2] = 1e4;
    m2[0] = 3000.0;
    m2[1] = 4000.0;
    m2[2] = 1.0;
  }
  MaterialField f;
  f.f_v = case_id == 1 ? 0.3 : 3.6e-5;
  f.g_v = case_id == 1 ? 0.31 : 3.45e-5;
  int nt = mesh.n_tris();
  f.xi.resize(nt);
  f.alpha.resize(nt);
  f.beta.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const double* m = mask[t] ? m2 : m1;
    f.xi[t] = m[0];
    f.alpha[t] = m[1];
    f.beta[t] = m[2];
  }
  return f;
}

namespace {

constexpr int kLatticeN = 20;  // sample points per axis over [0,2]

// bilinear interpolation of a kLatticeN^2 point lattice spanning [0,2]^2
double lattice_interp(const std::vector<double>& w, double x, double y) {
  double hx = 2.0 / (kLatticeN - 1);
  double sx = std::clamp(x / hx, 0.0, (double)(kLatticeN - 1));
  double sy = std::clamp(y / hx, 0.0, (double)(kLatticeN - 1));
  int i = std::min((int)sx, kLatticeN - 2), j = std::min((int)sy, kLatticeN - 2);
  double tx = sx - i, ty = sy - j;
  auto at = [&](int a, int b) { return w[b * kLatticeN + a]; };
  return (1 - tx) * (1 - ty) * at(i, j) + tx * (1 - ty) * at(i + 1, j) +
         (1 - tx) * ty * at(i, j + 1) + tx * ty * at(i + 1, j + 1);
}

// exp of interpolated noise at centroids, affinely rescaled so min/max over the
// active triangles equal lo/hi exactly (log10 domain if log_scale)
std::vector<double> noise_coefficient(SplitMix64& rng, const TriMesh& mesh, double lo, double hi,
                                      bool log_scale) {
  std::vector<double> w(kLatticeN * kLatticeN);
  for (double& v : w) v = rng.uniform();
  int nt = mesh.n_tris();
  std::vector<double> raw(nt);
  for (int t = 0; t < nt; ++t) {
    auto& tr = mesh.tris[t];
    double cx = (mesh.x[tr[0]] + mesh.x[tr[1]] + mesh.x[tr[2]]) / 3.0;
    double cy = (mesh.y[tr[0]] + mesh.y[tr[1]] + mesh.y[tr[2]]) / 3.0;
    raw[t] = std::exp(lattice_interp(w, cx, cy));
  }
  auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
  double vmin = *mn, vmax = *mx, span = vmax - vmin;
  std::vector<double> out(nt);
  for (int t = 0; t < nt; ++t) {
    double s = span > 0 ? (raw[t] - vmin) / span : 0.0;
    if (log_scale)
      out[t] = std::pow(10.0, std::log10(lo) + s * (std::log10(hi) - std::log10(lo)));
    else
      out[t] = lo + s * (hi - lo);
  }
  return out;
}

}  // namespace

MaterialField stochastic_field(int case_id, std::uint64_t seed, const TriMesh& mesh) {
  check_case(case_id);
  SplitMix64 rng(seed);
  MaterialField f;
  if (case_id == 1) {
    f.xi = noise_coefficient(rng, mesh, 1.0, 10.0, false);
    f.alpha = noise_coefficient(rng, mesh, 1.1, 11.0, false);
    f.beta = noise_coefficient(rng, mesh, 1.0, 10.0, false);
    f.f_v = 2.2e-3;
    f.g_v = 2.3e-3;
  } else {
    f.xi = noise_coefficient(rng, mesh, 1.2, 12.0, false);
    f.alpha = noise_coefficient(rng, mesh, 1.3, 13.0, false);
    f.beta = noise_coefficient(rng, mesh, 1e3, 1e5, true);
    f.f_v = 5.35e-7;
    f.g_v = 5.4e-7;
  }
  return f;
}

}  // namespace cosserat
