#pragma once

#include <vector>

#include "galerk/mesh.hpp"
#include "galerk/types.hpp"

namespace galerk {

/// A mesh paired with a per-element Gauss rule id (the rule's point count).
/// Supported counts: segments 1-5, triangles {1,3,7}, tetrahedra {1,4,15}.
struct Domain {
  Mesh mesh;
  int gauss_count = 1;
};

/// Global quadrature: points, weights (element measure included) and the
/// element each point belongs to. Points of element e occupy the contiguous
/// slice [e*g, (e+1)*g).
struct QuadratureSet {
  MatX3 points;
  Eigen::VectorXd weights;
  Eigen::VectorXi element_of;
};

/// One reference rule: barycentric coordinates per point (rows), weights
/// summing to one.
struct ReferenceRule {
  Eigen::MatrixXd barycentric;  // n x (d+1)
  Eigen::VectorXd weights;      // n
};

/// Supported point counts for a mesh dimension.
const std::vector<int>& supported_rules(int dim);
const ReferenceRule& reference_rule(int dim, int count);

Domain make_domain(const Mesh& mesh, int gauss_count = 1);
QuadratureSet quadrature(const Domain& dom);

double integrate(const Domain& dom, const RealField& f);
cplx integrate(const Domain& dom, const CplxField& f);

}  // namespace galerk
