#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cosserat {

struct Disk {
  double cx = 0, cy = 0, r = 0;
};

// Structured triangulation of [0,2]^2: nx*nx square cells, each split along the
// bottom-left to top-right diagonal; optional circular perforations removed by
// the centroid-in-disk test. Node ids keep the full (nx+1)^2 grid numbering;
// nodes not touched by an active triangle are deactivated.
struct TriMesh {
  int nx = 0;
  double h = 0;                              // fine cell edge
  std::vector<double> x, y;                  // node coordinates, all grid nodes
  std::vector<std::array<int, 3>> tris;      // active triangles only, CCW
  std::vector<double> area;                  // per active triangle
  std::vector<std::array<std::array<double, 2>, 3>> grad;  // P1 hat gradients per tri
  std::vector<std::uint8_t> node_active;
  std::vector<int> active_to_node, node_to_active;  // node_to_active: -1 if inactive
  std::vector<int> outer_boundary_nodes;       // active nodes on the boundary of [0,2]^2
  std::vector<int> perforation_boundary_nodes; // active nodes on void boundaries
  std::vector<std::vector<int>> node_tris;     // incident active triangles per node
  std::vector<std::array<int, 2>> cell_tris;   // per cell: lower/upper tri index, -1 removed

  int n_nodes() const { return (int)x.size(); }
  int n_active_nodes() const { return (int)active_to_node.size(); }
  int n_tris() const { return (int)tris.size(); }
  int node_id(int ix, int iy) const { return iy * (nx + 1) + ix; }
  bool on_outer_boundary(int node) const;
};

TriMesh build_fine_mesh(int nx, std::span<const Disk> perforations = {});

// Nx*Ny coarse blocks over [0,2]^2; block lines must coincide with fine lines.
struct CoarseGrid {
  int Nx = 0, Ny = 0;
  double Hx = 0, Hy = 0;
  std::vector<std::vector<int>> block_tris;  // per block, row-major (bx fastest)

  int n_vertices() const { return (Nx + 1) * (Ny + 1); }
  int n_blocks() const { return Nx * Ny; }
  int block_id(int bx, int by) const { return by * Nx + bx; }
  double vx(int v) const { return (v % (Nx + 1)) * Hx; }
  double vy(int v) const { return (v / (Nx + 1)) * Hy; }
};

// Throws if nx is not divisible by Nx/Ny or a block has no active triangles.
CoarseGrid build_coarse_grid(const TriMesh& mesh, int Nx, int Ny);

// Coarse neighborhood omega_i: union of blocks sharing coarse vertex i (a rectangle).
struct Neighborhood {
  int center = 0;                    // coarse vertex id
  std::vector<int> blocks;
  std::vector<int> tris;             // active triangles of omega_i
  std::vector<int> nodes;            // active fine nodes, ascending
  std::vector<int> boundary_nodes;   // nodes on the rectangle boundary of omega_i
  std::vector<int> interior_nodes;
  std::vector<int> node_local;       // full node id -> local index, -1 outside
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;

  int n_local() const { return (int)nodes.size(); }
  int local(int node) const { return node_local[node]; }
};

Neighborhood neighborhood(const CoarseGrid& grid, const TriMesh& mesh, int vertex);

void write_mesh_vtk(const TriMesh& mesh, const std::string& path,
                    const std::vector<std::pair<std::string, std::vector<double>>>& cell_fields = {});

}  // namespace cosserat
