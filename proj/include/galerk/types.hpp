#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace galerk {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using SpMat = Eigen::SparseMatrix<double>;
using SpMatC = Eigen::SparseMatrix<cplx>;

/// Vectorized scalar fields: take an M x 3 batch of points, return M values.
using RealField = std::function<Eigen::VectorXd(const MatX3&)>;
using CplxField = std::function<Eigen::VectorXcd(const MatX3&)>;
/// Vector field: M x 3 batch in, M x 3 values out.
using CplxField3 = std::function<Eigen::MatrixX3cd(const MatX3&)>;

/// Worker cap shared by the assembly/hmatrix loops. Defaults to all cores,
/// overridable by GALERKIN_THREADS or the CLI --threads flag.
int thread_count();
void set_thread_count(int n);

}  // namespace galerk
