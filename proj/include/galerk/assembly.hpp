#pragma once

#include "galerk/femspace.hpp"
#include "galerk/hmatrix.hpp"
#include "galerk/kernels.hpp"

namespace galerk {

/// Galerkin matrix  A_ij = int_dom phi_i psi_j  (components dotted for
/// vector-valued operators): A = sum_c B_c^T W B_c. Rows are the test
/// space's free dofs, columns the trial space's.
SpMat bilinear(const Domain& dom, const FemSpace& test, const FemSpace& trial);

/// A_ij = int_dom f phi_i psi_j.
SpMat bilinear_weighted(const Domain& dom, const FemSpace& test, const RealField& f,
                        const FemSpace& trial);

/// F_i = int_dom f phi_i (scalar spaces; component-summed via the 3-column
/// overload for vector spaces).
Eigen::VectorXd linear_form(const Domain& dom, const FemSpace& space,
                            const RealField& f);
Eigen::VectorXcd linear_form(const Domain& dom, const FemSpace& space,
                             const CplxField& f);
Eigen::VectorXcd linear_form(const Domain& dom, const FemSpace& space,
                             const CplxField3& f);

struct BemOptions {
  size_t memory_cap_bytes = size_t(8) * 1000 * 1000 * 1000;
  Eigen::Index chunk = 1024;  // x-quadrature rows per kernel panel
};

/// Dense BEM Galerkin matrix  A = Phi^T Wx G Wy Psi  with the contraction
/// implied by the operand shapes (scalar, dotted vector, or the
/// vector-kernel cross form). Coincident quadrature pairs contribute zero.
Eigen::MatrixXcd bem_dense(const Domain& dom_x, const Domain& dom_y,
                           const FemSpace& test, const Kernel& kernel,
                           const FemSpace& trial, const BemOptions& opts = {});

/// H-compressed variant; admissible blocks built by ACA on Galerkin
/// entries, inadmissible blocks dense.
HMatrix bem_h(const Domain& dom_x, const Domain& dom_y, const FemSpace& test,
              const Kernel& kernel, const FemSpace& trial, double tol,
              double eta = 1.0, int leaf_size = 64);

/// Radiation (collocation) matrix  C_ij = sum_l G(x_i, y_l) eta_l psi_j(y_l).
Eigen::MatrixXcd radiation_dense(const MatX3& points, const Domain& dom_y,
                                 const Kernel& kernel, const FemSpace& trial,
                                 const BemOptions& opts = {});
HMatrix radiation_h(const MatX3& points, const Domain& dom_y, const Kernel& kernel,
                    const FemSpace& trial, double tol, double eta = 1.0,
                    int leaf_size = 64);

/// Sparse singular-part correction: for element pairs closer than
/// 3 x max(enclosing radii), the difference between the semi-analytic
/// value of the singular kernel ("[1/r]" or "grady[1/r]") and its
/// Gauss x Gauss evaluation, assembled onto dofs. Far pairs are untouched.
SpMat regularize(const Domain& dom_x, const Domain& dom_y, const FemSpace& test,
                 const std::string& singular_name, const FemSpace& trial);

/// Collocation analog: the x integral is replaced by point evaluation.
SpMat regularize_radiation(const MatX3& points, const Domain& dom_y,
                           const std::string& singular_name, const FemSpace& trial);

}  // namespace galerk
