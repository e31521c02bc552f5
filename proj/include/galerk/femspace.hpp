#pragma once

#include <array>
#include <string>
#include <vector>

#include "galerk/quadrature.hpp"

namespace galerk {

enum class Family { P0, P1, P2, RWG };

/// Differential operator applied lazily to a space; resolved at
/// eval_matrix time. Grad is the tangential gradient on surface meshes.
enum class DiffOp { Id, Grad, Div, Nx, Ntimes };

/// Sparse basis-evaluation matrices B of the factorized assembly: one
/// M x Nfree matrix per spatial component (1 for scalar results, 3 for
/// vector results); row k holds the op-applied basis values at quadrature
/// point k.
struct EvalMatrix {
  std::vector<SpMat> comps;
  Eigen::Index rows() const { return comps.empty() ? 0 : comps[0].rows(); }
  Eigen::Index cols() const { return comps.empty() ? 0 : comps[0].cols(); }
  int components() const { return static_cast<int>(comps.size()); }
};

/// Finite element space: P0/P1/P2 Lagrange or lowest-order Raviart-Thomas
/// (RWG) on a surface mesh, with optional Dirichlet constraints and a
/// pending differential operator tag.
class FemSpace {
 public:
  FemSpace() = default;
  FemSpace(Mesh mesh, Family family);

  const Mesh& mesh() const { return mesh_; }
  Family family() const { return family_; }
  DiffOp op() const { return op_; }
  bool scalar_family() const { return family_ != Family::RWG; }

  int dof_count() const { return dof_count_; }
  int free_count() const { return free_count_; }
  bool constrained(int dof) const { return constrained_[dof]; }
  /// Free-dof index of a full-space dof, -1 if constrained.
  int free_index(int dof) const { return free_index_[dof]; }

  /// Number of components of the op-applied basis values (1 or 3).
  int result_components() const;

  /// Geometric dof locations (P0 centroids, P1 vertices, P2 vertices then
  /// edge midpoints, RWG shared-edge midpoints). Full space.
  MatX3 dof_locations() const;
  /// Locations of the free dofs only.
  MatX3 free_dof_locations() const;

  /// Global dof ids attached to element e.
  std::vector<int> element_dofs(Eigen::Index e) const;
  int dofs_per_element() const;

  /// Unique mesh edges backing P2/RWG dof numbering.
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }

  /// RWG structure of one element: for each local edge that carries a dof,
  /// the dof id, the +-1 orientation sign, and the local index of the
  /// vertex opposite the edge.
  struct RwgLocal {
    int dof;
    double sign;
    int opp_local;
    double edge_len;
  };
  std::vector<RwgLocal> rwg_locals(Eigen::Index e) const;

  /// Per-element barycentric gradients (constant vectors), one row per
  /// element vertex; tangential for surface meshes.
  Eigen::Matrix<double, Eigen::Dynamic, 3> barycentric_gradients(Eigen::Index e) const;

  // internal: used by dirichlet()
  void constrain(const std::vector<int>& dofs);
  void set_op(DiffOp op) { op_ = op; }

 private:
  Mesh mesh_;
  Family family_ = Family::P1;
  DiffOp op_ = DiffOp::Id;
  int dof_count_ = 0;
  int free_count_ = 0;
  std::vector<char> constrained_;
  std::vector<int> free_index_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<int> edge_of_pair_;                   // flattened lookup helper
  std::vector<std::array<int, 6>> element_edges_;   // per element local->edge id
  std::vector<std::array<int, 2>> edge_elements_;   // RWG: (plus, minus) or -1
};

FemSpace make_fem(const Mesh& mesh, const std::string& family_name);

/// Mark dofs geometrically located on `boundary` as constrained.
FemSpace dirichlet(const FemSpace& space, const Mesh& boundary);

FemSpace grad(const FemSpace& space);
FemSpace div(const FemSpace& space);
FemSpace nx(const FemSpace& space);
FemSpace ntimes(const FemSpace& space);

/// Basis-evaluation matrices of the space's pending operator at the
/// domain's quadrature points. The domain may be the space's own mesh, or
/// a trace (boundary) mesh of it for the Id operator.
EvalMatrix eval_matrix(const FemSpace& space, const Domain& dom);
EvalMatrix eval_matrix(const FemSpace& space, const Domain& dom, DiffOp op);

/// N_full x N_free selector: full matrices restrict as P^T A P, solutions
/// extend as u_full = P u_free.
SpMat elimination_map(const FemSpace& space);

/// Op-applied basis values of one element at given barycentric points:
/// one (points x local dofs) matrix per component, columns aligned with
/// element_dofs(e).
std::vector<Eigen::MatrixXd> element_basis_values(const FemSpace& space,
                                                  Eigen::Index e,
                                                  const Eigen::MatrixXd& bary,
                                                  DiffOp op);

/// Evaluate a scalar-family FE function at arbitrary points inside the
/// mesh. Accepts full-space or free-dof coefficient vectors.
Eigen::VectorXd interpolate(const FemSpace& space, const Eigen::VectorXd& coeffs,
                            const MatX3& points);
Eigen::VectorXcd interpolate(const FemSpace& space, const Eigen::VectorXcd& coeffs,
                             const MatX3& points);

}  // namespace galerk
