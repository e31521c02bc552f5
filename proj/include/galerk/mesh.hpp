#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "galerk/types.hpp"

namespace galerk {

/// Simplicial mesh of dimension 1-3, always embedded in R^3.
///
/// Three tables: vertex coordinates (Nv x 3), element connectivity
/// (Ne x (d+1), zero-based), and an optional per-element color tag.
/// Meshes are immutable once built; every operation returns a new mesh.
struct Mesh {
  MatX3 vertices;
  Eigen::MatrixXi elements;  // Ne x (d+1)
  Eigen::VectorXi colors;    // Ne, defaults to 0

  Mesh() = default;
  Mesh(MatX3 vtx, Eigen::MatrixXi elt);
  Mesh(MatX3 vtx, Eigen::MatrixXi elt, Eigen::VectorXi col);

  /// Intrinsic dimension: 1 segments, 2 triangles, 3 tetrahedra.
  int dim() const { return static_cast<int>(elements.cols()) - 1; }
  Eigen::Index vertex_count() const { return vertices.rows(); }
  Eigen::Index element_count() const { return elements.rows(); }
  bool empty() const { return elements.rows() == 0; }

  /// Empty mesh of a given dimension (element table 0 x (d+1)).
  static Mesh empty_mesh(int dim);

  /// Length / area / volume of one element.
  double element_measure(Eigen::Index e) const;
  /// Sum of element measures.
  double total_measure() const;
  Vec3 element_centroid(Eigen::Index e) const;
  /// Smallest enclosing sphere radius of one element (circumradius bound).
  double element_radius(Eigen::Index e) const;
  double bounding_box_diagonal() const;
};

struct EdgeStats {
  double min_len = 0.0;
  double max_len = 0.0;
  double mean_len = 0.0;
  double std_len = 0.0;
};

/// Structured triangle mesh of the [Lx x Ly] rectangle centered at the
/// origin in the z=0 plane; about n_target vertices, 2 triangles per cell.
Mesh build_square(int n_target, const std::array<double, 2>& size);

/// Concentric-ring triangle mesh of the disk of given radius centered at
/// the origin in z=0; boundary vertices lie exactly on the circle.
Mesh build_disk(int n_target, double radius);

/// Tetrahedral mesh of the box [0,Lx]x[0,Ly]x[0,Lz]: (n+1)^3 grid with
/// (n+1)^3 nearest to n_target, each hex cell split into 6 tetrahedra.
Mesh build_cube(int n_target, const std::array<double, 3>& size);

/// Closed, outward-oriented triangle mesh of the sphere of given radius:
/// icosahedron subdivided until the vertex count reaches n_target, then
/// projected (counts 12, 42, 162, 642, 2562, 10242, ...).
Mesh build_sphere(int n_target, double radius);

/// Faces that occur in exactly one element; outward-oriented for volume
/// meshes. Result has dimension d-1.
Mesh boundary(const Mesh& mesh);

/// Merge vertices within tol (representative: lexicographically smallest
/// coordinates), drop unreferenced vertices, remap indices, drop
/// zero-measure and duplicate elements.
Mesh clean(const Mesh& mesh, double tol);

/// Concatenation followed by clean at 1e-12 x bounding-box diagonal.
Mesh union_meshes(const Mesh& a, const Mesh& b);

/// Statistics over the unique edges of the mesh: (min, max, mean, std).
EdgeStats edge_stats(const Mesh& mesh);

/// Per-element unit normals of a triangle mesh (right-hand rule).
MatX3 normals(const Mesh& mesh);

/// Exchange the first two vertices of every triangle; flips normals.
Mesh swap_orientation(const Mesh& mesh);

/// Sorted unique edges as (lo, hi) vertex pairs.
std::vector<std::array<int, 2>> unique_edges(const Mesh& mesh);

}  // namespace galerk
