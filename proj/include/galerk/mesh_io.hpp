#pragma once

#include <string>
#include <utility>
#include <vector>

#include "galerk/mesh.hpp"

namespace galerk {

/// Read a Gmsh .msh v2.2 ASCII file (element types 1=segment, 2=triangle,
/// 4=tetra). The highest-dimension elements present become the mesh;
/// unknown element types are skipped. Colors come from the first
/// (physical) tag. Throws std::runtime_error with file:line on bad input.
Mesh read_msh(const std::string& path, int* skipped_elements = nullptr);

/// Write a mesh as Gmsh .msh v2.2 ASCII.
void write_msh(const std::string& path, const Mesh& mesh);

/// A named per-vertex scalar field (length Nv).
struct VtkField {
  std::string name;
  Eigen::VectorXd values;
};

/// Write VTK legacy ASCII (DATASET UNSTRUCTURED_GRID, cell types 3/5/10)
/// with optional POINT_DATA scalar fields.
void write_vtk(const std::string& path, const Mesh& mesh,
               const std::vector<VtkField>& fields = {});

/// Complex fields are written as two scalars <name>_re / <name>_im.
std::vector<VtkField> split_complex_field(const std::string& name,
                                          const Eigen::VectorXcd& values);

}  // namespace galerk
