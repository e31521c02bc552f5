#include "oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracles {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// 15-point Gauss-Legendre on [0,1].
struct GL15 {
  double x[15], w[15];
  GL15() {
    static const double xs[15] = {
        -0.9879925180204854, -0.9372733924007060, -0.8482065834104272,
        -0.7244177313601701, -0.5709721726085388, -0.3941513470775634,
        -0.2011940939974345, 0.0,                 0.2011940939974345,
        0.3941513470775634,  0.5709721726085388,  0.7244177313601701,
        0.8482065834104272,  0.9372733924007060,  0.9879925180204854};
    static const double ws[15] = {
        0.0307532419961173, 0.0703660474881081, 0.1071592204671719,
        0.1395706779261543, 0.1662692058169939, 0.1861610000155622,
        0.1984314853271116, 0.2025782419255613, 0.1984314853271116,
        0.1861610000155622, 0.1662692058169939, 0.1395706779261543,
        0.1071592204671719, 0.0703660474881081, 0.0307532419961173};
    for (int i = 0; i < 15; ++i) {
      x[i] = 0.5 * (xs[i] + 1.0);
      w[i] = 0.5 * ws[i];
    }
  }
};

double adaptive_1d(const std::function<double(double)>& f, double lo, double hi,
                   double tol, int depth) {
  static const GL15 gl;
  auto quad = [&](double a, double b) {
    double s = 0.0;
    for (int i = 0; i < 15; ++i) s += gl.w[i] * f(a + (b - a) * gl.x[i]);
    return s * (b - a);
  };
  const double whole = quad(lo, hi);
  const double mid = 0.5 * (lo + hi);
  const double split = quad(lo, mid) + quad(mid, hi);
  if (std::abs(split - whole) <= tol || depth >= 40) return split;
  return adaptive_1d(f, lo, mid, 0.5 * tol, depth + 1) +
         adaptive_1d(f, mid, hi, 0.5 * tol, depth + 1);
}

// Degree-5 7-point rule in barycentric form.
void rule7(double bary[7][3], double w[7]) {
  const double s15 = std::sqrt(15.0);
  const double a1 = (6.0 - s15) / 21.0, w1 = (155.0 - s15) / 1200.0;
  const double a2 = (6.0 + s15) / 21.0, w2 = (155.0 + s15) / 1200.0;
  double pts[7][3] = {{1.0 / 3, 1.0 / 3, 1.0 / 3},
                      {a1, a1, 1 - 2 * a1},
                      {a1, 1 - 2 * a1, a1},
                      {1 - 2 * a1, a1, a1},
                      {a2, a2, 1 - 2 * a2},
                      {a2, 1 - 2 * a2, a2},
                      {1 - 2 * a2, a2, a2}};
  double ws[7] = {9.0 / 40, w1, w1, w1, w2, w2, w2};
  for (int i = 0; i < 7; ++i) {
    w[i] = ws[i];
    for (int c = 0; c < 3; ++c) bary[i][c] = pts[i][c];
  }
}

double tri7(const std::function<double(const Vec3&)>& f, const Vec3& a,
            const Vec3& b, const Vec3& c) {
  static double bary[7][3], w[7];
  static bool init = [] {
    rule7(bary, w);
    return true;
  }();
  (void)init;
  const double area = 0.5 * ((b - a).cross(c - a)).norm();
  double s = 0.0;
  for (int i = 0; i < 7; ++i)
    s += w[i] * f(bary[i][0] * a + bary[i][1] * b + bary[i][2] * c);
  return s * area;
}

double adaptive_tri_rec(const std::function<double(const Vec3&)>& f, const Vec3& a,
                        const Vec3& b, const Vec3& c, double tol, int depth) {
  const double whole = tri7(f, a, b, c);
  const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  const double split = tri7(f, a, ab, ca) + tri7(f, b, bc, ab) +
                       tri7(f, c, ca, bc) + tri7(f, ab, bc, ca);
  if (std::abs(split - whole) <= tol || depth >= 24) return split;
  const double t = 0.5 * tol;
  return adaptive_tri_rec(f, a, ab, ca, t, depth + 1) +
         adaptive_tri_rec(f, b, bc, ab, t, depth + 1) +
         adaptive_tri_rec(f, c, ca, bc, t, depth + 1) +
         adaptive_tri_rec(f, ab, bc, ca, t, depth + 1);
}

}  // namespace

double simplex_monomial(int dim, int a, int b, int c) {
  switch (dim) {
    case 1: return 1.0 / (a + 1);
    case 2: return factorial(a) * factorial(b) / factorial(a + b + 2);
    case 3:
      return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
    default: throw std::invalid_argument("simplex_monomial: bad dimension");
  }
}

double adaptive_triangle(const std::function<double(const Vec3&)>& f, const Vec3& a,
                         const Vec3& b, const Vec3& c, double tol) {
  return adaptive_tri_rec(f, a, b, c, tol, 0);
}

namespace {

/// Radial reduction common to the Newton-type oracles: the triangle is
/// split into signed sub-triangles around the projection rho of x; inside
/// each, the u (radial) integral is elementary and the v integral is done
/// adaptively. g(v) = |(1-v) pa + v pb| with pa, pb the edge endpoints
/// relative to rho, c = |height of x|.
struct RadialSetup {
  Vec3 n, rho;
  double w0;
  Vec3 verts[3];
  double scale;
};

RadialSetup radial_setup(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& x) {
  RadialSetup s;
  s.n = ((b - a).cross(c - a)).normalized();
  s.w0 = (x - a).dot(s.n);
  s.rho = x - s.w0 * s.n;
  s.verts[0] = a;
  s.verts[1] = b;
  s.verts[2] = c;
  s.scale = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
  return s;
}

/// int over the triangle of F(|y-rho|-direction) using per-edge signed
/// sub-triangles; fe(v) must return the 1D integrand already reduced in u.
double radial_sum(const RadialSetup& s,
                  const std::function<double(const Vec3& pa, const Vec3& pb,
                                             double sign, double tol)>& edge_term,
                  double tol) {
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Vec3 pa = s.verts[i] - s.rho;
    const Vec3 pb = s.verts[(i + 1) % 3] - s.rho;
    const double cross = pa.cross(pb).dot(s.n);
    if (std::abs(cross) <= 1e-15 * s.scale * s.scale) continue;
    total += edge_term(pa, pb, cross >= 0 ? 1.0 : -1.0, tol);
  }
  return total;
}

}  // namespace

double newton_oracle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& x,
                     double tol) {
  RadialSetup s = radial_setup(a, b, c, x);
  const double cc = std::abs(s.w0);
  auto edge_term = [&](const Vec3& pa, const Vec3& pb, double sign, double etol) {
    const double jac = pa.cross(pb).norm();
    auto fv = [&](double v) {
      const double g = ((1.0 - v) * pa + v * pb).norm();
      // int_0^1 u / sqrt(c^2 + g^2 u^2) du = (sqrt(c^2+g^2) - c) / g^2
      return (std::sqrt(cc * cc + g * g) - cc) / (g * g);
    };
    return sign * jac * adaptive_1d(fv, 0.0, 1.0, etol / jac, 0);
  };
  return radial_sum(s, edge_term, tol);
}

Vec3 newton_moment_oracle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& x,
                          double tol) {
  RadialSetup s = radial_setup(a, b, c, x);
  const double cc = std::abs(s.w0);
  Vec3 out = Vec3::Zero();
  for (int comp = 0; comp < 3; ++comp) {
    auto edge_term = [&](const Vec3& pa, const Vec3& pb, double sign, double etol) {
      const double jac = pa.cross(pb).norm();
      auto fv = [&](double v) {
        const Vec3 e = (1.0 - v) * pa + v * pb;
        const double g = e.norm();
        // int_0^1 u^2 / sqrt(c^2 + g^2 u^2) du
        double iu;
        const double rt = std::sqrt(cc * cc + g * g);
        if (cc <= 1e-300)
          iu = 1.0 / (2.0 * g);
        else
          iu = rt / (2.0 * g * g) -
               (cc * cc) / (2.0 * g * g * g) * std::log((g + rt) / cc);
        return e[comp] * iu;
      };
      return sign * jac * adaptive_1d(fv, 0.0, 1.0, etol / jac, 0);
    };
    out[comp] = radial_sum(s, edge_term, tol);
  }
  return out;
}

Vec3 newton_grad_oracle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& x,
                        double tol) {
  RadialSetup s = radial_setup(a, b, c, x);
  const double cc = std::abs(s.w0);
  if (cc <= 1e-12 * s.scale)
    throw std::invalid_argument("newton_grad_oracle: x must lie off the plane");
  Vec3 out = Vec3::Zero();
  // (x - y) = w0 n - u e(v); 1/r^3 with r^2 = c^2 + u^2 g^2.
  // n part:   w0 * int u (c^2+g^2u^2)^{-3/2} = w0 * (1/c - 1/rt) / g^2
  // e part:  -int u^2 (c^2+g^2u^2)^{-3/2}   = -(asinh(g/c)/g^3 - 1/(g^2 rt))
  for (int comp = 0; comp < 4; ++comp) {  // 0..2: e-part comps, 3: n-part
    auto edge_term = [&](const Vec3& pa, const Vec3& pb, double sign, double etol) {
      const double jac = pa.cross(pb).norm();
      auto fv = [&](double v) {
        const Vec3 e = (1.0 - v) * pa + v * pb;
        const double g = e.norm();
        const double rt = std::sqrt(cc * cc + g * g);
        if (comp == 3) return (1.0 / cc - 1.0 / rt) / (g * g);
        const double iu = std::asinh(g / cc) / (g * g * g) - 1.0 / (g * g * rt);
        return -e[comp] * iu;
      };
      return sign * jac * adaptive_1d(fv, 0.0, 1.0, etol / jac, 0);
    };
    const double val = radial_sum(s, edge_term, tol);
    if (comp == 3)
      out += s.w0 * val * s.n;
    else
      out[comp] += val;
  }
  return out;
}

double double_newton_oracle(const Vec3& a, const Vec3& b, const Vec3& c, double tol) {
  auto outer = [&](const Vec3& x) { return newton_oracle(a, b, c, x, tol * 1e-3); };
  return adaptive_triangle(outer, a, b, c, tol);
}

double bessel_i0(double x) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= (x * x / 4.0) / (k * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double bessel_i1(double x) {
  double term = x / 2.0, sum = term;
  for (int k = 1; k < 60; ++k) {
    term *= (x * x / 4.0) / (k * (k + 1.0));
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

namespace {

cplx hankel1(int n, double x) {
  return cplx(std::sph_bessel(n, x), std::sph_neumann(n, x));
}

}  // namespace

cplx soft_sphere_far_field(double k, double a, double cos_theta) {
  const double x = k * a;
  const int nmax = static_cast<int>(x + 8.0 * std::cbrt(x) + 12.0);
  // p_inc = e^{ikz} = sum i^n (2n+1) j_n(kr) P_n(cos)
  // p_sca = sum c_n h_n(kr) P_n,  c_n = -i^n (2n+1) j_n(ka)/h_n(ka)
  // h_n(kr) -> (-i)^{n+1} e^{ikr}/(kr)
  cplx f = 0.0;
  const cplx I(0.0, 1.0);
  double pnm1 = 1.0, pn = cos_theta;  // P_0, P_1
  for (int n = 0; n <= nmax; ++n) {
    double Pn;
    if (n == 0)
      Pn = 1.0;
    else if (n == 1)
      Pn = cos_theta;
    else {
      const double Pnew =
          ((2.0 * n - 1.0) * cos_theta * pn - (n - 1.0) * pnm1) / n;
      pnm1 = pn;
      pn = Pnew;
      Pn = Pnew;
    }
    const cplx cn = -std::pow(I, n) * (2.0 * n + 1.0) * std::sph_bessel(n, x) /
                    hankel1(n, x);
    f += cn * std::pow(-I, n + 1) * Pn / k;
  }
  return f;
}

double pec_sphere_rcs(double k, double a, double theta, bool e_plane) {
  const double x = k * a;
  const int nmax = static_cast<int>(x + 8.0 * std::cbrt(x) + 12.0);
  const double mu = std::cos(theta);
  cplx s1 = 0.0, s2 = 0.0;
  double pi_nm1 = 0.0, pi_n = 1.0;  // pi_0 = 0, pi_1 = 1
  for (int n = 1; n <= nmax; ++n) {
    const double tau_n = n * mu * pi_n - (n + 1.0) * pi_nm1;
    const double jn = std::sph_bessel(n, x);
    const double jnm1 = std::sph_bessel(n - 1, x);
    const cplx hn = hankel1(n, x);
    const cplx hnm1 = hankel1(n - 1, x);
    // psi_n(x) = x j_n; psi_n' = x j_{n-1} - n j_n ; same for xi with h_n.
    const double psi = x * jn, dpsi = x * jnm1 - n * jn;
    const cplx xi = x * hn, dxi = x * hnm1 - cplx(n) * hn;
    const cplx an = dpsi / dxi;  // PEC
    const cplx bn = psi / xi;
    const double fac = (2.0 * n + 1.0) / (n * (n + 1.0));
    s1 += fac * (an * pi_n + bn * tau_n);
    s2 += fac * (an * tau_n + bn * pi_n);
    const double pi_next = ((2.0 * n + 1.0) * mu * pi_n - (n + 1.0) * pi_nm1) / n;
    pi_nm1 = pi_n;
    pi_n = pi_next;
  }
  const cplx s = e_plane ? s2 : s1;
  return 4.0 * M_PI / (k * k) * std::norm(s);
}

Eigen::MatrixXcd naive_bem(const galerk::Domain& dx, const galerk::Domain& dy,
                           const galerk::FemSpace& test, const galerk::Kernel& kernel,
                           const galerk::FemSpace& trial) {
  using namespace galerk;
  QuadratureSet qx = quadrature(dx), qy = quadrature(dy);
  EvalMatrix bx = eval_matrix(test, dx), by = eval_matrix(trial, dy);
  Eigen::MatrixXd BX = Eigen::MatrixXd(bx.comps[0]);
  Eigen::MatrixXd BY = Eigen::MatrixXd(by.comps[0]);
  const double eps = singular_guard_radius(qx.points, qy.points);
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(test.free_count(), trial.free_count());
  for (Eigen::Index kq = 0; kq < qx.points.rows(); ++kq)
    for (Eigen::Index l = 0; l < qy.points.rows(); ++l) {
      const Vec3 d = Vec3(qx.points.row(kq)) - Vec3(qy.points.row(l));
      const double r = d.norm();
      if (r <= eps) continue;
      MatX3 X(1, 3), Y(1, 3);
      X.row(0) = qx.points.row(kq);
      Y.row(0) = qy.points.row(l);
      std::vector<Eigen::MatrixXcd> kv;
      kernel.evaluate_blocks(X, Y, kv, eps, true);
      const cplx g = qx.weights(kq) * kv[0](0, 0) * qy.weights(l);
      for (Eigen::Index i = 0; i < A.rows(); ++i) {
        if (BX(kq, i) == 0.0) continue;
        for (Eigen::Index j = 0; j < A.cols(); ++j)
          A(i, j) += BX(kq, i) * g * BY(l, j);
      }
    }
  return A;
}

}  // namespace oracles
