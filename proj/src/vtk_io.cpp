#include "cosserat/vtk_io.hpp"

#include <cstdio>

#include "cosserat/errors.hpp"
#include "cosserat/geometry.hpp"

namespace cosserat {

VtkWriter::VtkWriter(const TriMesh& mesh, std::string title)
    : mesh_(mesh), title_(std::move(title)) {}

void VtkWriter::add_point_scalars(const std::string& name, const std::vector<double>& per_node) {
  point_scalars_.emplace_back(name, per_node);
}

void VtkWriter::add_point_vectors(const std::string& name, const std::vector<double>& vx,
                                  const std::vector<double>& vy) {
  std::vector<std::array<double, 2>> v(vx.size());
  for (size_t i = 0; i < vx.size(); ++i) v[i] = {vx[i], vy[i]};
  point_vectors_.emplace_back(name, std::move(v));
}

void VtkWriter::add_cell_scalars(const std::string& name, const std::vector<double>& per_tri) {
  cell_scalars_.emplace_back(name, per_tri);
}

void VtkWriter::write(const std::string& path) const {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("vtk: cannot open " + path);
  int nn = mesh_.n_nodes(), nt = mesh_.n_tris();
  std::fprintf(f, "# vtk DataFile Version 3.0\n%s\nASCII\nDATASET UNSTRUCTURED_GRID\n",
               title_.c_str());
  std::fprintf(f, "POINTS %d double\n", nn);
  for (int n = 0; n < nn; ++n)
    std::fprintf(f, "%.17g %.17g 0\n", mesh_.x[n], mesh_.y[n]);
  std::fprintf(f, "CELLS %d %d\n", nt, 4 * nt);
  for (auto& t : mesh_.tris) std::fprintf(f, "3 %d %d %d\n", t[0], t[1], t[2]);
  std::fprintf(f, "CELL_TYPES %d\n", nt);
  for (int t = 0; t < nt; ++t) std::fprintf(f, "5\n");

  if (!point_scalars_.empty() || !point_vectors_.empty()) {
    std::fprintf(f, "POINT_DATA %d\n", nn);
    for (auto& [name, data] : point_scalars_) {
      std::fprintf(f, "SCALARS %s double 1\nLOOKUP_TABLE default\n", name.c_str());
      for (int n = 0; n < nn; ++n) std::fprintf(f, "%.17g\n", data[n]);
    }
    for (auto& [name, data] : point_vectors_) {
      std::fprintf(f, "VECTORS %s double\n", name.c_str());
      for (int n = 0; n < nn; ++n) std::fprintf(f, "%.17g %.17g 0\n", data[n][0], data[n][1]);
    }
  }
  if (!cell_scalars_.empty()) {
    std::fprintf(f, "CELL_DATA %d\n", nt);
    for (auto& [name, data] : cell_scalars_) {
      std::fprintf(f, "SCALARS %s double 1\nLOOKUP_TABLE default\n", name.c_str());
      for (int t = 0; t < nt; ++t) std::fprintf(f, "%.17g\n", data[t]);
    }
  }
  std::fclose(f);
}

}  // namespace cosserat
