#include "doctest.h"

#include <cmath>
#include <random>

#include "galerk/kernels.hpp"
#include "support/oracles.hpp"

using namespace galerk;

namespace {

MatX3 one_point(const Vec3& p) {
  MatX3 m(1, 3);
  m.row(0) = p.transpose();
  return m;
}

std::mt19937& rng() {
  static std::mt19937 gen(12345);
  return gen;
}

Vec3 random_point(double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng()), u(rng()), u(rng()));
}

}  // namespace

TEST_CASE("scalar kernels") {
  Kernel inv_r = green_kernel("[1/r]", 0.0);
  Eigen::MatrixXcd v =
      inv_r.evaluate(one_point(Vec3(0, 0, 0)), one_point(Vec3(0, 0, 2)));
  CHECK(v(0, 0).real() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(v(0, 0).imag() == 0.0);

  // k = 0 Helmholtz coincides with 1/r.
  Kernel helm0 = green_kernel("[exp(ikr)/r]", 0.0);
  MatX3 X(4, 3), Y(3, 3);
  for (int i = 0; i < 4; ++i) X.row(i) = random_point(2.0).transpose();
  for (int j = 0; j < 3; ++j) Y.row(j) = (random_point(2.0) + Vec3(5, 0, 0)).transpose();
  CHECK((helm0.evaluate(X, Y) - inv_r.evaluate(X, Y)).cwiseAbs().maxCoeff() <
        1e-15);

  // Coincident pair raises with the pair identified.
  MatX3 same = one_point(Vec3(1, 2, 3));
  CHECK_THROWS_WITH_AS(inv_r.evaluate(same, same), doctest::Contains("(0,0)"),
                       std::runtime_error);
  CHECK_THROWS_AS(green_kernel("[foo]", 1.0), std::invalid_argument);
}

TEST_CASE("reciprocity of symmetric kernels") {
  for (auto [name, k] : {std::pair<const char*, double>{"[exp(ikr)/r]", 3.0},
                         std::pair<const char*, double>{"[1/r]", 0.0}}) {
    Kernel g = green_kernel(name, k);
    MatX3 X(5, 3), Y(6, 3);
    for (int i = 0; i < 5; ++i) X.row(i) = random_point(1.0).transpose();
    for (int j = 0; j < 6; ++j)
      Y.row(j) = (random_point(1.0) + Vec3(3, 0, 0)).transpose();
    Eigen::MatrixXcd a = g.evaluate(X, Y);
    Eigen::MatrixXcd b = g.evaluate(Y, X);
    CHECK((a - b.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("grady kernels equal finite differences of the scalar kernel") {
  for (double k : {0.0, 2.5}) {
    const std::string base = k == 0.0 ? "[1/r]" : "[exp(ikr)/r]";
    Kernel scalar = green_kernel(base, k);
    Kernel gradv = green_kernel("grady" + base, k);
    for (int trial = 0; trial < 20; ++trial) {
      Vec3 x = random_point(1.0);
      Vec3 y = random_point(1.0) + Vec3(2.5, 0, 0);
      const double r = (x - y).norm();
      const double h = 1e-5 * r;
      std::vector<Eigen::MatrixXcd> g;
      gradv.evaluate_blocks(one_point(x), one_point(y), g, 0.0, false);
      for (int c = 0; c < 3; ++c) {
        Vec3 dy = Vec3::Zero();
        dy[c] = h;
        const cplx fd = (scalar.evaluate(one_point(x), one_point(y + dy))(0, 0) -
                         scalar.evaluate(one_point(x), one_point(y - dy))(0, 0)) /
                        (2.0 * h);
        CHECK(std::abs(g[c](0, 0) - fd) <= 1e-6 * std::abs(fd) + 1e-12);
      }
    }
    // Single-component names agree with the 3-component kernel.
    Kernel g2 = green_kernel("grady" + base + "2", k);
    Vec3 x = random_point(1.0), y = random_point(1.0) + Vec3(2, 1, 0);
    std::vector<Eigen::MatrixXcd> full, single;
    gradv.evaluate_blocks(one_point(x), one_point(y), full, 0.0, false);
    g2.evaluate_blocks(one_point(x), one_point(y), single, 0.0, false);
    CHECK(std::abs(full[1](0, 0) - single[0](0, 0)) < 1e-15);
  }
}

TEST_CASE("analytic triangle integrals match the adaptive oracle") {
  // Specific cases first: centroid of the reference right triangle.
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  const Vec3 centroid = (a + b + c) / 3.0;
  TriangleNewton tn = analytic_triangle_integrals(a, b, c, centroid);
  const double oracle = oracles::newton_oracle(a, b, c, centroid, 1e-11);
  CHECK(tn.newton == doctest::Approx(oracle).epsilon(1e-8));

  // Far field: area / distance.
  const Vec3 far(60.0, 50.0, 60.0);
  TriangleNewton tf = analytic_triangle_integrals(a, b, c, far);
  const double dist = (far - centroid).norm();
  CHECK(std::abs(tf.newton - 0.5 / dist) < 1e-4 * (0.5 / dist));
  // Far-field gradient points from the triangle to x.
  CHECK(tf.grad.normalized().dot((far - centroid).normalized()) ==
        doctest::Approx(1.0).epsilon(1e-4));

  // Equilateral triangle, x on the symmetry axis: in-plane gradient is 0.
  const Vec3 e1(1, 0, 0), e2(-0.5, std::sqrt(3.0) / 2, 0),
      e3(-0.5, -std::sqrt(3.0) / 2, 0);
  TriangleNewton ts = analytic_triangle_integrals(e1, e2, e3, Vec3(0, 0, 0.7));
  CHECK(std::abs(ts.grad.x()) < 1e-12);
  CHECK(std::abs(ts.grad.y()) < 1e-12);

  CHECK_THROWS_AS(analytic_triangle_integrals(a, b, a, centroid),
                  std::invalid_argument);
}

TEST_CASE("analytic integrals on 100 random configurations") {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int inside_cases = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Vec3 a = random_point(1.0), b = random_point(1.0), c = random_point(1.0);
    if (((b - a).cross(c - a)).norm() < 0.05) {
      --trial;
      continue;
    }
    Vec3 x;
    const int mode = trial % 4;
    if (mode == 0) {
      // Point inside the triangle (on it).
      double r1 = 0.2 + 0.2 * u(rng()), r2 = 0.2 + 0.2 * u(rng());
      x = a + r1 * (b - a) + r2 * (c - a);
      ++inside_cases;
    } else if (mode == 1) {
      x = random_point(2.0);
    } else if (mode == 2) {
      // Near the plane.
      Vec3 n = ((b - a).cross(c - a)).normalized();
      x = (a + b + c) / 3.0 + 0.01 * n + 0.3 * (b - a);
    } else {
      x = random_point(5.0);
    }
    TriangleNewton tn = analytic_triangle_integrals(a, b, c, x);
    const double newton = oracles::newton_oracle(a, b, c, x, 1e-11);
    CHECK(std::abs(tn.newton - newton) <=
          1e-8 * std::max(1.0, std::abs(newton)));
    Vec3 moment = oracles::newton_moment_oracle(a, b, c, x, 1e-11);
    CHECK((tn.moment - moment).norm() <= 1e-7 * std::max(1.0, moment.norm()));

    // Gradient against the oracle when x is clearly off the plane.
    Vec3 n = ((b - a).cross(c - a)).normalized();
    if (std::abs((x - a).dot(n)) > 0.2) {
      Vec3 g = oracles::newton_grad_oracle(a, b, c, x, 1e-12);
      CHECK((tn.grad - g).norm() <= 1e-7 * std::max(1.0, g.norm()));
    }
  }
  CHECK(inside_cases >= 20);
}

TEST_CASE("normal jump of the gradient across the triangle") {
  // grad . n jumps by -4pi across the layer; each one-sided limit is
  // -+2pi plus the smooth part.
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  const Vec3 inside(0.3, 0.3, 0.0);
  const Vec3 n(0, 0, 1);
  TriangleNewton above =
      analytic_triangle_integrals(a, b, c, inside + 1e-9 * n);
  TriangleNewton below =
      analytic_triangle_integrals(a, b, c, inside - 1e-9 * n);
  CHECK(above.grad.z() - below.grad.z() == doctest::Approx(4.0 * M_PI).epsilon(1e-6));
  // In-plane components are continuous.
  CHECK(above.grad.x() == doctest::Approx(below.grad.x()).epsilon(1e-6));
  CHECK(above.grad.y() == doctest::Approx(below.grad.y()).epsilon(1e-6));
}
