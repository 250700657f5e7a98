#include "cosserat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cosserat/errors.hpp"
#include "cosserat/vtk_io.hpp"

namespace cosserat {

bool TriMesh::on_outer_boundary(int node) const {
  int ix = node % (nx + 1), iy = node / (nx + 1);
  return ix == 0 || ix == nx || iy == 0 || iy == nx;
}

static bool centroid_in_disk(double cx, double cy, const Disk& d) {
  double dx = cx - d.cx, dy = cy - d.cy;
  return dx * dx + dy * dy < d.r * d.r;
}

TriMesh build_fine_mesh(int nx, std::span<const Disk> perforations) {
  if (nx < 1) throw ConfigError("build_fine_mesh: nx must be positive");
  for (const Disk& d : perforations) {
    if (d.r <= 0) throw ConfigError("build_fine_mesh: perforation radius must be positive");
    if (d.cx - d.r <= 0 || d.cx + d.r >= 2 || d.cy - d.r <= 0 || d.cy + d.r >= 2)
      throw ConfigError("build_fine_mesh: perforation must lie strictly inside the domain");
  }

  TriMesh m;
  m.nx = nx;
  m.h = 2.0 / nx;
  int nn = (nx + 1) * (nx + 1);
  m.x.resize(nn);
  m.y.resize(nn);
  for (int iy = 0; iy <= nx; ++iy)
    for (int ix = 0; ix <= nx; ++ix) {
      int n = m.node_id(ix, iy);
      m.x[n] = ix * m.h;
      m.y[n] = iy * m.h;
    }

  m.tris.reserve(2 * nx * nx);
  m.cell_tris.assign(nx * nx, {-1, -1});
  for (int iy = 0; iy < nx; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      int a = m.node_id(ix, iy), b = m.node_id(ix + 1, iy);
      int c = m.node_id(ix + 1, iy + 1), d = m.node_id(ix, iy + 1);
      std::array<int, 3> halves[2] = {{a, b, c}, {a, c, d}};  // diagonal a-c
      for (int half = 0; half < 2; ++half) {
        auto& t = halves[half];
        double cx = (m.x[t[0]] + m.x[t[1]] + m.x[t[2]]) / 3.0;
        double cy = (m.y[t[0]] + m.y[t[1]] + m.y[t[2]]) / 3.0;
        bool removed = false;
        for (const Disk& dk : perforations) removed = removed || centroid_in_disk(cx, cy, dk);
        if (!removed) {
          m.cell_tris[iy * nx + ix][half] = (int)m.tris.size();
          m.tris.push_back(t);
        }
      }
    }

  m.area.resize(m.tris.size());
  m.grad.resize(m.tris.size());
  for (int t = 0; t < m.n_tris(); ++t) {
    auto [i, j, k] = m.tris[t];
    double x0 = m.x[i], y0 = m.y[i], x1 = m.x[j], y1 = m.y[j], x2 = m.x[k], y2 = m.y[k];
    double det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (det <= 0) throw SolverError("build_fine_mesh: zero-area or inverted triangle");
    m.area[t] = 0.5 * det;
    m.grad[t][0] = {(y1 - y2) / det, (x2 - x1) / det};
    m.grad[t][1] = {(y2 - y0) / det, (x0 - x2) / det};
    m.grad[t][2] = {(y0 - y1) / det, (x1 - x0) / det};
  }

  m.node_active.assign(nn, 0);
  for (auto& t : m.tris)
    for (int v : t) m.node_active[v] = 1;
  m.node_to_active.assign(nn, -1);
  for (int n = 0; n < nn; ++n)
    if (m.node_active[n]) {
      m.node_to_active[n] = (int)m.active_to_node.size();
      m.active_to_node.push_back(n);
    }

  m.node_tris.resize(nn);
  for (int t = 0; t < m.n_tris(); ++t)
    for (int v : m.tris[t]) m.node_tris[v].push_back(t);

  // boundary edges: edges with exactly one incident active triangle
  std::map<std::pair<int, int>, int> edge_count;
  for (auto& t : m.tris)
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      edge_count[{std::min(a, b), std::max(a, b)}]++;
    }
  std::set<int> boundary;
  for (auto& [e, c] : edge_count)
    if (c == 1) {
      boundary.insert(e.first);
      boundary.insert(e.second);
    }
  for (int n : boundary) {
    if (m.on_outer_boundary(n))
      m.outer_boundary_nodes.push_back(n);
    else
      m.perforation_boundary_nodes.push_back(n);
  }
  return m;
}

CoarseGrid build_coarse_grid(const TriMesh& mesh, int Nx, int Ny) {
  if (Nx < 1 || Ny < 1 || mesh.nx % Nx != 0 || mesh.nx % Ny != 0)
    throw ConfigError("build_coarse_grid: fine grid not divisible by coarse grid");
  CoarseGrid g;
  g.Nx = Nx;
  g.Ny = Ny;
  g.Hx = 2.0 / Nx;
  g.Hy = 2.0 / Ny;
  g.block_tris.resize(Nx * Ny);
  for (int t = 0; t < mesh.n_tris(); ++t) {
    auto& tr = mesh.tris[t];
    double cx = (mesh.x[tr[0]] + mesh.x[tr[1]] + mesh.x[tr[2]]) / 3.0;
    double cy = (mesh.y[tr[0]] + mesh.y[tr[1]] + mesh.y[tr[2]]) / 3.0;
    int bx = std::min((int)(cx / g.Hx), Nx - 1);
    int by = std::min((int)(cy / g.Hy), Ny - 1);
    g.block_tris[g.block_id(bx, by)].push_back(t);
  }
  for (auto& b : g.block_tris)
    if (b.empty())
      throw ConfigError("build_coarse_grid: a coarse block has no active triangles");
  return g;
}

Neighborhood neighborhood(const CoarseGrid& grid, const TriMesh& mesh, int vertex) {
  int vi = vertex % (grid.Nx + 1), vj = vertex / (grid.Nx + 1);
  Neighborhood nb;
  nb.center = vertex;
  int bx0 = std::max(vi - 1, 0), bx1 = std::min(vi, grid.Nx - 1);
  int by0 = std::max(vj - 1, 0), by1 = std::min(vj, grid.Ny - 1);
  for (int by = by0; by <= by1; ++by)
    for (int bx = bx0; bx <= bx1; ++bx) nb.blocks.push_back(grid.block_id(bx, by));
  nb.x0 = bx0 * grid.Hx;
  nb.x1 = (bx1 + 1) * grid.Hx;
  nb.y0 = by0 * grid.Hy;
  nb.y1 = (by1 + 1) * grid.Hy;

  std::set<int> nodes;
  for (int b : nb.blocks)
    for (int t : grid.block_tris[b]) {
      nb.tris.push_back(t);
      for (int v : mesh.tris[t]) nodes.insert(v);
    }
  nb.nodes.assign(nodes.begin(), nodes.end());

  // boundary test in fine-grid index space (coarse lines coincide with fine lines)
  int mx = mesh.nx / grid.Nx, my = mesh.nx / grid.Ny;
  int ix0 = bx0 * mx, ix1 = (bx1 + 1) * mx, iy0 = by0 * my, iy1 = (by1 + 1) * my;
  nb.node_local.assign(mesh.n_nodes(), -1);
  for (int li = 0; li < (int)nb.nodes.size(); ++li) {
    int n = nb.nodes[li];
    nb.node_local[n] = li;
    int ix = n % (mesh.nx + 1), iy = n / (mesh.nx + 1);
    if (ix == ix0 || ix == ix1 || iy == iy0 || iy == iy1)
      nb.boundary_nodes.push_back(n);
    else
      nb.interior_nodes.push_back(n);
  }
  return nb;
}

void write_mesh_vtk(const TriMesh& mesh, const std::string& path,
                    const std::vector<std::pair<std::string, std::vector<double>>>& cell_fields) {
  VtkWriter w(mesh, "mesh");
  for (auto& [name, data] : cell_fields) w.add_cell_scalars(name, data);
  w.write(path);
}

}  // namespace cosserat
