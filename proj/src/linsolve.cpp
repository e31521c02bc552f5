#include "galerk/linsolve.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <stdexcept>

namespace galerk {

namespace {

template <class Scalar>
double nrm(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
  return v.norm();
}

}  // namespace

template <class Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, SolveInfo> gmres(
    const LinearOperator<Scalar>& A,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b, double tol, int restart,
    int maxit, const LinearOperator<Scalar>* preconditioner) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (!(tol > 0)) throw std::invalid_argument("gmres: tol must be positive");
  const Eigen::Index n = A.n;
  auto precond = [&](const Vector& v) -> Vector {
    return preconditioner ? preconditioner->apply(v) : v;
  };

  SolveInfo info;
  Vector x = Vector::Zero(n);
  const double bnorm = nrm<Scalar>(precond(b));
  if (bnorm == 0.0) {
    info.converged = true;
    return {x, info};
  }

  Matrix V(n, restart + 1);
  Matrix H = Matrix::Zero(restart + 1, restart);
  std::vector<Scalar> cs(restart), sn(restart);
  int total_it = 0;

  while (total_it < maxit) {
    Vector r = precond(b - A.apply(x));
    double beta = r.norm();
    if (beta / bnorm <= tol) {
      info.converged = true;
      break;
    }
    V.col(0) = r / beta;
    Vector g = Vector::Zero(restart + 1);
    g(0) = beta;

    int j = 0;
    for (; j < restart && total_it < maxit; ++j, ++total_it) {
      Vector w = precond(A.apply(V.col(j)));
      // Modified Gram-Schmidt.
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      if (std::abs(H(j + 1, j)) > 0) V.col(j + 1) = w / H(j + 1, j);

      // Apply accumulated Givens rotations, then form the new one.
      for (int i = 0; i < j; ++i) {
        const Scalar tmp = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -Eigen::numext::conj(sn[i]) * H(i, j) + Eigen::numext::conj(cs[i]) * H(i + 1, j);
        H(i, j) = tmp;
      }
      const double h0 = std::abs(H(j, j)), h1 = std::abs(H(j + 1, j));
      if (h1 == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        const double d = std::hypot(h0, h1);
        cs[j] = Scalar(h0 / d);
        const Scalar phase = (h0 == 0.0) ? Scalar(1) : H(j, j) / Scalar(h0);
        sn[j] = phase * Eigen::numext::conj(H(j + 1, j)) / Scalar(d);
      }
      const Scalar tmp = cs[j] * H(j, j) + sn[j] * H(j + 1, j);
      H(j + 1, j) = 0;
      H(j, j) = tmp;
      const Scalar g1 = -Eigen::numext::conj(sn[j]) * g(j);
      g(j) = cs[j] * g(j);
      g(j + 1) = g1;

      const double rel = std::abs(g(j + 1)) / bnorm;
      info.history.push_back(rel);
      if (rel <= tol) {
        ++j;
        break;
      }
    }

    // Back-substitution on the j x j triangular system.
    Vector y = Vector::Zero(j);
    for (int i = j - 1; i >= 0; --i) {
      Scalar s = g(i);
      for (int k2 = i + 1; k2 < j; ++k2) s -= H(i, k2) * y(k2);
      if (std::abs(H(i, i)) == 0.0)
        throw std::runtime_error("gmres: breakdown (zero diagonal in Hessenberg)");
      y(i) = s / H(i, i);
    }
    x += V.leftCols(j) * y;

    const double rel = nrm<Scalar>(precond(b - A.apply(x))) / bnorm;
    info.residual = rel;
    if (rel <= tol) {
      info.converged = true;
      break;
    }
  }

  info.iterations = total_it;
  info.residual = nrm<Scalar>(precond(b - A.apply(x))) / bnorm;
  if (info.residual <= tol) info.converged = true;
  return {x, info};
}

template <class Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, SolveInfo> cg(
    const LinearOperator<Scalar>& A,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b, double tol, int maxit) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (!(tol > 0)) throw std::invalid_argument("cg: tol must be positive");
  SolveInfo info;
  Vector x = Vector::Zero(A.n);
  Vector r = b;
  const double bnorm = r.norm();
  if (bnorm == 0.0) {
    info.converged = true;
    return {x, info};
  }
  Vector p = r;
  double rr = r.squaredNorm();
  for (int it = 0; it < maxit; ++it) {
    Vector Ap = A.apply(p);
    const Scalar pAp = p.dot(Ap);
    if (std::abs(pAp) == 0.0) throw std::runtime_error("cg: breakdown (pAp = 0)");
    const Scalar alpha = Scalar(rr) / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    const double rr_new = r.squaredNorm();
    info.history.push_back(std::sqrt(rr_new) / bnorm);
    ++info.iterations;
    if (std::sqrt(rr_new) / bnorm <= tol) {
      info.converged = true;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  info.residual = (b - A.apply(x)).norm() / bnorm;
  if (info.residual <= tol) info.converged = true;
  return {x, info};
}

template std::pair<Eigen::VectorXd, SolveInfo> gmres<double>(
    const RealOperator&, const Eigen::VectorXd&, double, int, int,
    const RealOperator*);
template std::pair<Eigen::VectorXcd, SolveInfo> gmres<cplx>(
    const CplxOperator&, const Eigen::VectorXcd&, double, int, int,
    const CplxOperator*);
template std::pair<Eigen::VectorXd, SolveInfo> cg<double>(const RealOperator&,
                                                          const Eigen::VectorXd&,
                                                          double, int);
template std::pair<Eigen::VectorXcd, SolveInfo> cg<cplx>(const CplxOperator&,
                                                         const Eigen::VectorXcd&,
                                                         double, int);

EigResult eig_smallest_generalized(const SpMat& K, const SpMat& M, int n_eig) {
  const Eigen::Index n = K.rows();
  if (K.cols() != n || M.rows() != n || M.cols() != n)
    throw std::invalid_argument("eig: K and M must be square and conforming");
  if (n_eig < 1 || n_eig > static_cast<int>(n))
    throw std::invalid_argument("eig: bad n_eig");

  Eigen::SimplicialLDLT<SpMat> Kfact(K);
  if (Kfact.info() != Eigen::Success)
    throw std::runtime_error("eig: sparse factorization of K failed");

  auto m_dot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.dot(M * b);
  };

  // Shift-invert Lanczos (sigma = 0): Op = K^{-1} M, M-inner product.
  // Largest Ritz values theta give the smallest lambda = 1/theta. On
  // breakdown (invariant subspace) the iteration restarts with a fresh
  // deflated vector, so degenerate eigenvalues are recovered too.
  int m_steps = std::min<long>(n, std::max(4 * n_eig, n_eig + 30));
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::vector<Eigen::VectorXd> Q;
    Q.reserve(m_steps + 1);
    std::vector<double> alpha, beta;
    int next_seed = 0;

    auto fresh_vector = [&]() -> Eigen::VectorXd {
      // Deterministic replacement vectors, M-orthogonalized against Q.
      for (; next_seed < n + 2; ++next_seed) {
        Eigen::VectorXd q(n);
        if (next_seed == 0)
          q = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0) +
              Eigen::VectorXd::Constant(n, 0.1);
        else {
          q.setZero();
          q((next_seed - 1) % n) = 1.0;
          q(((next_seed - 1) * 7 + 3) % n) += 0.5;
        }
        for (int pass = 0; pass < 2; ++pass)
          for (const auto& qi : Q) q -= m_dot(q, qi) * qi;
        const double nrm2 = m_dot(q, q);
        if (nrm2 > 1e-20) {
          ++next_seed;
          return q / std::sqrt(nrm2);
        }
      }
      return Eigen::VectorXd();  // space exhausted
    };

    Q.push_back(fresh_vector());
    std::vector<int> block_starts = {0};
    for (int j = 0; j < m_steps; ++j) {
      Eigen::VectorXd w = Kfact.solve(M * Q[j]);
      double a = m_dot(w, Q[j]);
      alpha.push_back(a);
      w -= a * Q[j];
      // Full reorthogonalization, twice (also removes the beta term).
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& qi : Q) w -= m_dot(w, qi) * qi;
      double b = std::sqrt(std::max(0.0, m_dot(w, w)));
      if (j + 1 >= m_steps) break;
      if (b < 1e-12) {
        Eigen::VectorXd q = fresh_vector();
        if (q.size() == 0) break;  // full space spanned
        beta.push_back(0.0);
        Q.push_back(q);
        block_starts.push_back(j + 1);
      } else {
        beta.push_back(b);
        Q.push_back(w / b);
      }
    }

    const int m = static_cast<int>(alpha.size());
    if (m < n_eig) {
      m_steps = std::min<long>(n, 2 * m_steps);
      continue;
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);

    EigResult res;
    res.values.resize(n_eig);
    res.vectors.resize(n, n_eig);
    bool ok = true;
    for (int i = 0; i < n_eig; ++i) {
      const int idx = m - 1 - i;  // largest theta = smallest lambda first
      const double theta = es.eigenvalues()(idx);
      if (theta <= 0) {
        ok = false;
        break;
      }
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
      for (int j2 = 0; j2 < m; ++j2) v += es.eigenvectors()(j2, idx) * Q[j2];
      res.values(i) = 1.0 / theta;
      res.vectors.col(i) = v;
    }
    if (ok) {
      double worst = 0.0;
      for (int i = 0; i < n_eig; ++i) {
        Eigen::VectorXd kv = K * res.vectors.col(i);
        Eigen::VectorXd mv = M * res.vectors.col(i);
        worst = std::max(worst, (kv - res.values(i) * mv).norm() / kv.norm());
      }
      if (worst <= 1e-8) return res;
      if (m >= n) return res;  // full decomposition; as good as it gets
    }
    if (m_steps >= n && !ok)
      throw std::runtime_error("eig: Lanczos failed to converge");
    m_steps = std::min<long>(n, 2 * m_steps);
  }
  throw std::runtime_error("eig: Lanczos failed to converge");
}

}  // namespace galerk
