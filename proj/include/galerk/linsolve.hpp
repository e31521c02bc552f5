#pragma once

#include <functional>
#include <vector>

#include "galerk/types.hpp"

namespace galerk {

/// Matrix-free operator: dimension plus an apply callback.
template <class Scalar>
struct LinearOperator {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Eigen::Index n = 0;
  std::function<Vector(const Vector&)> apply;

  static LinearOperator identity(Eigen::Index n) {
    return {n, [](const Vector& x) { return x; }};
  }
  template <class Mat>
  static LinearOperator from_matrix(const Mat& m) {
    return {m.rows(), [&m](const Vector& x) -> Vector { return m * x; }};
  }
};

using RealOperator = LinearOperator<double>;
using CplxOperator = LinearOperator<cplx>;

struct SolveInfo {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;  // relative residual per iteration
};

/// Restarted GMRES; relative residual tolerance. Optional left
/// preconditioner (applies M^{-1}).
template <class Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, SolveInfo> gmres(
    const LinearOperator<Scalar>& A,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b, double tol = 1e-6,
    int restart = 50, int maxit = 1000,
    const LinearOperator<Scalar>* preconditioner = nullptr);

/// Conjugate gradient for symmetric positive definite operators.
template <class Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, SolveInfo> cg(
    const LinearOperator<Scalar>& A,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b, double tol = 1e-10,
    int maxit = 10000);

struct EigResult {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // M-orthonormal columns
};

/// Smallest n_eig generalized eigenpairs K v = lambda M v for sparse SPD
/// K, M via shift-invert Lanczos (sparse Cholesky of K, full
/// reorthogonalization). Residuals bounded by 1e-8 relative.
EigResult eig_smallest_generalized(const SpMat& K, const SpMat& M, int n_eig);

}  // namespace galerk
