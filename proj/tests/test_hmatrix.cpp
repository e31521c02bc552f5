#include "doctest.h"

#include <cmath>
#include <random>

#include "galerk/hmatrix.hpp"

using namespace galerk;

namespace {

/// Dense-matrix-backed evaluator.
class DenseEvaluator : public BlockEvaluator {
 public:
  explicit DenseEvaluator(Eigen::MatrixXcd m) : m_(std::move(m)) {}
  Eigen::Index rows() const override { return m_.rows(); }
  Eigen::Index cols() const override { return m_.cols(); }
  void eval(const std::vector<int>& r, const std::vector<int>& c,
            Eigen::MatrixXcd& out) const override {
    out.resize(r.size(), c.size());
    for (size_t i = 0; i < r.size(); ++i)
      for (size_t j = 0; j < c.size(); ++j) out(i, j) = m_(r[i], c[j]);
  }

 private:
  Eigen::MatrixXcd m_;
};

/// 1/r kernel-matrix evaluator over two point clouds.
class InvREvaluator : public BlockEvaluator {
 public:
  InvREvaluator(MatX3 x, MatX3 y, double k = 0.0)
      : x_(std::move(x)), y_(std::move(y)), k_(k) {}
  Eigen::Index rows() const override { return x_.rows(); }
  Eigen::Index cols() const override { return y_.rows(); }
  void eval(const std::vector<int>& r, const std::vector<int>& c,
            Eigen::MatrixXcd& out) const override {
    out.resize(r.size(), c.size());
    for (size_t i = 0; i < r.size(); ++i)
      for (size_t j = 0; j < c.size(); ++j) {
        const double d = (Vec3(x_.row(r[i])) - Vec3(y_.row(c[j]))).norm();
        if (d < 1e-14)
          out(i, j) = 0.0;
        else
          out(i, j) = std::polar(1.0 / d, k_ * d);
      }
  }

 private:
  MatX3 x_, y_;
  double k_;
};

MatX3 random_cloud(int n, const Vec3& center, double radius, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  MatX3 pts(n, 3);
  for (int i = 0; i < n; ++i)
    pts.row(i) = (center + Vec3(u(rng), u(rng), u(rng))).transpose();
  return pts;
}

double rel_fro(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace

TEST_CASE("cluster tree structure") {
  MatX3 pts = random_cloud(200, Vec3(0, 0, 0), 1.0, 1);
  auto tree = ClusterTree::build(pts, 16);
  // Leaves partition [0, n); boxes contain their points.
  std::vector<int> covered(200, 0);
  std::function<void(int)> walk = [&](int id) {
    const auto& nd = tree->node(id);
    if (nd.leaf()) {
      CHECK(nd.size() <= 16);
      for (int i = nd.begin; i < nd.end; ++i) {
        ++covered[i];
        Vec3 p = pts.row(tree->perm()[i]);
        for (int c = 0; c < 3; ++c) {
          CHECK(p[c] >= nd.lo[c] - 1e-14);
          CHECK(p[c] <= nd.hi[c] + 1e-14);
        }
      }
      return;
    }
    walk(nd.child0);
    walk(nd.child1);
  };
  walk(tree->root());
  for (int c : covered) CHECK(c == 1);

  // Single leaf when n <= leaf size.
  auto tiny = ClusterTree::build(random_cloud(10, Vec3(0, 0, 0), 1.0, 2), 16);
  CHECK(tiny->node(tiny->root()).leaf());

  // Collinear points split at the median.
  MatX3 line(32, 3);
  for (int i = 0; i < 32; ++i) line.row(i) << i, 0.0, 0.0;
  auto ltree = ClusterTree::build(line, 16);
  const auto& root = ltree->node(ltree->root());
  CHECK_FALSE(root.leaf());
  CHECK(ltree->node(root.child0).size() == 16);
  CHECK(ltree->node(root.child1).size() == 16);
}

TEST_CASE("aca recovers exact low-rank blocks") {
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  const int m = 60, n = 40;

  // Rank-1.
  Eigen::VectorXcd a(m), b(n);
  for (int i = 0; i < m; ++i) a(i) = cplx(g(rng), g(rng));
  for (int j = 0; j < n; ++j) b(j) = cplx(g(rng), g(rng));
  Eigen::MatrixXcd rank1 = a * b.transpose();
  auto ev = [&](const std::vector<int>& r, const std::vector<int>& c) {
    Eigen::MatrixXcd out(r.size(), c.size());
    for (size_t i = 0; i < r.size(); ++i)
      for (size_t j = 0; j < c.size(); ++j) out(i, j) = rank1(r[i], c[j]);
    return out;
  };
  AcaResult res = aca(ev, m, n, 1e-10);
  CHECK(res.rank() == 1);
  CHECK(rel_fro(res.U * res.V.transpose(), rank1) < 1e-14);

  // Zero block.
  auto zero = [&](const std::vector<int>& r, const std::vector<int>& c) {
    return Eigen::MatrixXcd::Zero(r.size(), c.size()).eval();
  };
  AcaResult zres = aca(zero, m, n, 1e-10);
  CHECK(zres.rank() == 0);

  // Constructed rank-5.
  Eigen::MatrixXcd u5(m, 5), v5(n, 5);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < 5; ++k) u5(i, k) = cplx(g(rng), g(rng));
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < 5; ++k) v5(j, k) = cplx(g(rng), g(rng));
  Eigen::MatrixXcd rank5 = u5 * v5.transpose();
  auto ev5 = [&](const std::vector<int>& r, const std::vector<int>& c) {
    Eigen::MatrixXcd out(r.size(), c.size());
    for (size_t i = 0; i < r.size(); ++i)
      for (size_t j = 0; j < c.size(); ++j) out(i, j) = rank5(r[i], c[j]);
    return out;
  };
  AcaResult res5 = aca(ev5, m, n, 1e-10);
  CHECK(res5.rank() == 5);
  CHECK(rel_fro(res5.U * res5.V.transpose(), rank5) <= 1e-9);
}

TEST_CASE("assemble: single leaf equals dense") {
  MatX3 pts = random_cloud(40, Vec3(0, 0, 0), 1.0, 7);
  InvREvaluator ev(pts, pts);
  auto tree = ClusterTree::build(pts, 64);
  HMatrix h = HMatrix::assemble(ev, tree, tree, HParams{1e-6, 1.0, 64});
  Eigen::MatrixXcd dense;
  std::vector<int> all(40);
  std::iota(all.begin(), all.end(), 0);
  ev.eval(all, all, dense);
  CHECK((h.to_dense() - dense).norm() == 0.0);
  auto rm = h.rank_map();
  REQUIRE(rm.size() == 1);
  CHECK(rm[0].kind == "dense");
}

TEST_CASE("well separated clusters give low rank") {
  MatX3 x = random_cloud(120, Vec3(0, 0, 0), 0.5, 11);
  MatX3 y = random_cloud(110, Vec3(10, 0, 0), 0.5, 13);
  InvREvaluator ev(x, y);
  auto rt = ClusterTree::build(x, 64);
  auto ct = ClusterTree::build(y, 64);
  HMatrix h = HMatrix::assemble(ev, rt, ct, HParams{1e-6, 1.0, 64});
  auto rm = h.rank_map();
  REQUIRE(rm.size() == 1);
  CHECK(rm[0].kind == "lowrank");
  CHECK(rm[0].rank <= 15);

  std::vector<int> ax(120), ay(110);
  std::iota(ax.begin(), ax.end(), 0);
  std::iota(ay.begin(), ay.end(), 0);
  Eigen::MatrixXcd dense;
  ev.eval(ax, ay, dense);
  CHECK(rel_fro(h.to_dense(), dense) <= 1e-5);
}

TEST_CASE("matvec agreement, linearity, determinism") {
  const int n = 600;
  MatX3 pts = random_cloud(n, Vec3(0, 0, 0), 1.0, 17);
  InvREvaluator ev(pts, pts, 2.0);
  auto tree = ClusterTree::build(pts, 32);
  const double tol = 1e-4;
  HMatrix h = HMatrix::assemble(ev, tree, tree, HParams{tol, 1.0, 32});

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  Eigen::MatrixXcd dense;
  ev.eval(all, all, dense);

  std::mt19937 rng(23);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
    Eigen::VectorXcd hv = h.matvec(v);
    Eigen::VectorXcd av = dense * v;
    CHECK((hv - av).norm() <= 10.0 * tol * av.norm());
  }

  Eigen::VectorXcd x1(n), x2(n);
  for (int i = 0; i < n; ++i) {
    x1(i) = cplx(g(rng), g(rng));
    x2(i) = cplx(g(rng), g(rng));
  }
  const cplx al(0.7, -0.2), be(-1.1, 0.4);
  Eigen::VectorXcd lin = h.matvec(al * x1 + be * x2);
  Eigen::VectorXcd sep = al * h.matvec(x1) + be * h.matvec(x2);
  CHECK((lin - sep).norm() <= 1e-13 * (lin.norm() + sep.norm()));

  // Transpose matvec consistency.
  Eigen::VectorXcd ht = h.matvec_transpose(x1);
  Eigen::VectorXcd at = dense.transpose() * x1;
  CHECK((ht - at).norm() <= 10.0 * tol * at.norm());

  // Identical builds give identical rank maps.
  HMatrix h2 = HMatrix::assemble(ev, tree, tree, HParams{tol, 1.0, 32});
  auto rm1 = h.rank_map(), rm2 = h2.rank_map();
  REQUIRE(rm1.size() == rm2.size());
  for (size_t i = 0; i < rm1.size(); ++i) {
    CHECK(rm1[i].rank == rm2[i].rank);
    CHECK(rm1[i].kind == rm2[i].kind);
  }
}

TEST_CASE("per-block aca error bound on a small build") {
  const int n = 400;
  MatX3 pts = random_cloud(n, Vec3(0, 0, 0), 1.0, 31);
  InvREvaluator ev(pts, pts);
  auto tree = ClusterTree::build(pts, 32);
  const double tol = 1e-5;
  HMatrix h = HMatrix::assemble(ev, tree, tree, HParams{tol, 1.0, 32});
  Eigen::MatrixXcd dense;
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  ev.eval(all, all, dense);
  Eigen::MatrixXcd hd = h.to_dense();

  for (const auto& e : h.rank_map()) {
    if (e.kind != "lowrank") continue;
    Eigen::MatrixXcd exact(e.row_hi - e.row_lo, e.col_hi - e.col_lo);
    Eigen::MatrixXcd approx(exact.rows(), exact.cols());
    for (int i = e.row_lo; i < e.row_hi; ++i)
      for (int j = e.col_lo; j < e.col_hi; ++j) {
        exact(i - e.row_lo, j - e.col_lo) =
            dense(tree->perm()[i], tree->perm()[j]);
        approx(i - e.row_lo, j - e.col_lo) =
            hd(tree->perm()[i], tree->perm()[j]);
      }
    if (exact.norm() > 0)
      CHECK((approx - exact).norm() <= 10.0 * tol * exact.norm());
  }
}

TEST_CASE("rank map tiles the index rectangle") {
  // Surface cloud (the BEM case): off-diagonal patches compress.
  const int n = 500;
  MatX3 pts(n, 3);
  std::mt19937 rng(37);
  std::normal_distribution<double> g;
  for (int i = 0; i < n; ++i) {
    Vec3 p(g(rng), g(rng), g(rng));
    pts.row(i) = p.normalized().transpose();
  }
  InvREvaluator ev(pts, pts);
  auto tree = ClusterTree::build(pts, 32);
  HMatrix h = HMatrix::assemble(ev, tree, tree, HParams{1e-3, 1.0, 32});
  std::vector<std::vector<char>> hit(n, std::vector<char>(n, 0));
  for (const auto& e : h.rank_map())
    for (int i = e.row_lo; i < e.row_hi; ++i)
      for (int j = e.col_lo; j < e.col_hi; ++j) ++hit[i][j];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) REQUIRE(hit[i][j] == 1);
  CHECK(h.stored_scalars() < size_t(n) * n);
}

TEST_CASE("add and scale") {
  const int n = 300;
  MatX3 pts = random_cloud(n, Vec3(0, 0, 0), 1.0, 41);
  InvREvaluator ev(pts, pts, 1.5);
  auto tree = ClusterTree::build(pts, 32);
  HMatrix h = HMatrix::assemble(ev, tree, tree, HParams{1e-5, 1.0, 32});

  HMatrix neg = h;
  neg.scale(-1.0);
  HMatrix sum = HMatrix::add(h, neg, 1e-5);
  Eigen::VectorXcd v = Eigen::VectorXcd::Random(n);
  CHECK(sum.matvec(v).norm() <= 1e-12 * h.to_dense().norm() * v.norm());

  // H + H = 2H.
  HMatrix twice = HMatrix::add(h, h, 1e-5);
  Eigen::VectorXcd t = twice.matvec(v) - 2.0 * h.matvec(v);
  CHECK(t.norm() <= 1e-4 * h.matvec(v).norm());
}

TEST_CASE("axpy_sparse routes entries into blocks") {
  const int n = 200;
  MatX3 pts = random_cloud(n, Vec3(0, 0, 0), 1.0, 43);
  InvREvaluator ev(pts, pts);
  auto tree = ClusterTree::build(pts, 16);
  HMatrix h = HMatrix::assemble(ev, tree, tree, HParams{1e-6, 1.0, 16});
  Eigen::MatrixXcd before = h.to_dense();

  std::vector<Eigen::Triplet<double>> trip;
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int t = 0; t < 50; ++t)
    trip.emplace_back(pick(rng), pick(rng), 1.0 + 0.1 * t);
  SpMat s(n, n);
  s.setFromTriplets(trip.begin(), trip.end());
  h.axpy_sparse(cplx(2.0, 1.0), s);
  Eigen::MatrixXcd after = h.to_dense();
  Eigen::MatrixXcd expected =
      before + cplx(2.0, 1.0) * Eigen::MatrixXd(s).cast<cplx>();
  CHECK((after - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("multiply against dense") {
  const int n = 256;
  MatX3 pts = random_cloud(n, Vec3(0, 0, 0), 1.0, 47);
  InvREvaluator ev(pts, pts, 1.0);
  auto tree = ClusterTree::build(pts, 32);
  const double tol = 1e-6;
  HMatrix h = HMatrix::assemble(ev, tree, tree, HParams{tol, 1.0, 32});
  HMatrix prod = HMatrix::multiply(h, h, tol);
  Eigen::MatrixXcd d = h.to_dense();
  CHECK(rel_fro(prod.to_dense(), d * d) <= 100.0 * tol);
}

TEST_CASE("lu identity and small solves") {
  // Identity as an H-matrix.
  const int n = 100;
  MatX3 pts = random_cloud(n, Vec3(0, 0, 0), 1.0, 53);
  DenseEvaluator id_eval(Eigen::MatrixXcd::Identity(n, n));
  auto tree = ClusterTree::build(pts, 16);
  HMatrix h = HMatrix::assemble(id_eval, tree, tree, HParams{1e-8, 1.0, 16});
  HLu f = h.lu(1e-8);
  Eigen::VectorXcd b = Eigen::VectorXcd::Random(n);
  CHECK((f.solve(b) - b).norm() <= 1e-13 * b.norm());
}

TEST_CASE("lu factors and residual on a diagonally dominant build") {
  const int n = 500;
  MatX3 pts = random_cloud(n, Vec3(0, 0, 0), 1.0, 59);
  // 1/r off-diagonal plus a strong diagonal: well conditioned.
  Eigen::MatrixXcd dense(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        dense(i, j) = 200.0;
      } else {
        const double d = (Vec3(pts.row(i)) - Vec3(pts.row(j))).norm();
        dense(i, j) = std::polar(1.0 / d, 1.0 * d);
      }
    }
  DenseEvaluator ev(dense);
  auto tree = ClusterTree::build(pts, 32);
  const double tol = 1e-6;
  HMatrix h = HMatrix::assemble(ev, tree, tree, HParams{tol, 1.0, 32});
  HLu f = h.lu(tol);

  // to_dense(L) * to_dense(U) ~ to_dense(H).
  Eigen::MatrixXcd l = f.lower().to_dense();
  Eigen::MatrixXcd u = f.upper().to_dense();
  Eigen::MatrixXcd hd = h.to_dense();
  CHECK(rel_fro(l * u, hd) <= 10.0 * tol);

  // Residual contract.
  Eigen::VectorXcd b = Eigen::VectorXcd::Random(n);
  Eigen::VectorXcd x = f.solve(b);
  CHECK((h.matvec(x) - b).norm() <= 10.0 * tol * b.norm());
}
