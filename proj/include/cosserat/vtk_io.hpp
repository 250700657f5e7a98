#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace cosserat {

struct TriMesh;

// Legacy ASCII VTK writer (unstructured grid, triangle cells, 17 significant digits).
class VtkWriter {
 public:
  VtkWriter(const TriMesh& mesh, std::string title);

  void add_point_scalars(const std::string& name, const std::vector<double>& per_node);
  // two components per node, z written as 0
  void add_point_vectors(const std::string& name, const std::vector<double>& vx,
                         const std::vector<double>& vy);
  void add_cell_scalars(const std::string& name, const std::vector<double>& per_tri);

  void write(const std::string& path) const;

 private:
  const TriMesh& mesh_;
  std::string title_;
  std::vector<std::pair<std::string, std::vector<double>>> point_scalars_;
  std::vector<std::pair<std::string, std::vector<std::array<double, 2>>>> point_vectors_;
  std::vector<std::pair<std::string, std::vector<double>>> cell_scalars_;
};

}  // namespace cosserat
