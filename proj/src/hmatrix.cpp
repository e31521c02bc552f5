#include "galerk/hmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace galerk {

// ---------------------------------------------------------------------------
// Cluster tree
// ---------------------------------------------------------------------------

std::shared_ptr<const ClusterTree> ClusterTree::build(const MatX3& points,
                                                      int leaf_size) {
  if (points.rows() < 1) throw std::invalid_argument("cluster tree: empty point set");
  if (leaf_size < 1) throw std::invalid_argument("cluster tree: bad leaf size");
  auto tree = std::make_shared<ClusterTree>();
  const int n = static_cast<int>(points.rows());
  tree->perm_.resize(n);
  std::iota(tree->perm_.begin(), tree->perm_.end(), 0);

  auto bbox = [&](int begin, int end, Vec3& lo, Vec3& hi) {
    lo = points.row(tree->perm_[begin]);
    hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      Vec3 p = points.row(tree->perm_[i]);
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  };

  tree->nodes_.push_back(Node{0, n, Vec3::Zero(), Vec3::Zero(), -1, -1});
  bbox(0, n, tree->nodes_[0].lo, tree->nodes_[0].hi);
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const Node nd = tree->nodes_[id];
    if (nd.size() <= leaf_size) continue;
    // Longest axis, median split; ties broken by index for determinism.
    Vec3 ext = nd.hi - nd.lo;
    int axis = 0;
    if (ext[1] > ext[axis]) axis = 1;
    if (ext[2] > ext[axis]) axis = 2;
    const int mid = nd.begin + nd.size() / 2;
    std::nth_element(tree->perm_.begin() + nd.begin, tree->perm_.begin() + mid,
                     tree->perm_.begin() + nd.end, [&](int a, int b) {
                       const double pa = points(a, axis), pb = points(b, axis);
                       return pa < pb || (pa == pb && a < b);
                     });
    Node left{nd.begin, mid, Vec3::Zero(), Vec3::Zero(), -1, -1};
    Node right{mid, nd.end, Vec3::Zero(), Vec3::Zero(), -1, -1};
    bbox(left.begin, left.end, left.lo, left.hi);
    bbox(right.begin, right.end, right.lo, right.hi);
    const int c0 = static_cast<int>(tree->nodes_.size());
    tree->nodes_[id].child0 = c0;
    tree->nodes_[id].child1 = c0 + 1;
    tree->nodes_.push_back(left);
    tree->nodes_.push_back(right);
    stack.push_back(c0);
    stack.push_back(c0 + 1);
  }

  tree->iperm_.resize(n);
  for (int i = 0; i < n; ++i) tree->iperm_[tree->perm_[i]] = i;
  return tree;
}

double box_distance(const ClusterTree::Node& a, const ClusterTree::Node& b) {
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double gap = std::max({0.0, a.lo[c] - b.hi[c], b.lo[c] - a.hi[c]});
    d2 += gap * gap;
  }
  return std::sqrt(d2);
}

// ---------------------------------------------------------------------------
// ACA
// ---------------------------------------------------------------------------

AcaResult aca(const std::function<Eigen::MatrixXcd(const std::vector<int>&,
                                                   const std::vector<int>&)>& entries,
              Eigen::Index m, Eigen::Index n, double tol) {
  if (!(tol > 0.0) || tol >= 1.0)
    throw std::invalid_argument("aca: tol must be in (0,1)");
  std::vector<int> all_rows(m), all_cols(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::iota(all_cols.begin(), all_cols.end(), 0);

  std::vector<Eigen::VectorXcd> us, vs;
  std::vector<char> row_used(m, 0);
  double fro2 = 0.0, max_seen = 0.0;
  const Eigen::Index rmax = std::min(m, n);
  Eigen::Index row = 0;
  int tiny_tries = 0;
  bool converged = false;

  while (static_cast<Eigen::Index>(us.size()) < rmax) {
    Eigen::MatrixXcd raw = entries({static_cast<int>(row)}, all_cols);
    Eigen::VectorXcd r = raw.transpose();
    for (size_t k = 0; k < us.size(); ++k) r -= us[k](row) * vs[k];
    row_used[row] = 1;
    max_seen = std::max(max_seen, r.cwiseAbs().maxCoeff());

    Eigen::Index jpiv = 0;
    const double pivot_abs = r.cwiseAbs().maxCoeff(&jpiv);
    if (pivot_abs <= 1e-14 * max_seen || pivot_abs == 0.0) {
      if (++tiny_tries >= 4) {
        converged = true;
        break;
      }
      Eigen::Index next = -1;
      for (Eigen::Index i = 0; i < m; ++i)
        if (!row_used[i]) {
          next = i;
          break;
        }
      if (next < 0) {
        converged = true;
        break;
      }
      row = next;
      continue;
    }
    tiny_tries = 0;

    Eigen::VectorXcd v = r / r(jpiv);
    Eigen::MatrixXcd craw = entries(all_rows, {static_cast<int>(jpiv)});
    Eigen::VectorXcd u = craw.col(0);
    for (size_t k = 0; k < us.size(); ++k) u -= vs[k](jpiv) * us[k];

    double cross = 0.0;
    for (size_t k = 0; k < us.size(); ++k)
      cross += (us[k].dot(u) * vs[k].dot(v)).real();
    const double uu = u.squaredNorm(), vv = v.squaredNorm();
    fro2 += uu * vv + 2.0 * cross;
    us.push_back(std::move(u));
    vs.push_back(std::move(v));

    if (std::sqrt(uu * vv) <= tol * std::sqrt(std::max(fro2, 0.0))) {
      converged = true;
      break;
    }

    Eigen::Index next = -1;
    double best = -1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (row_used[i]) continue;
      const double a = std::abs(us.back()(i));
      if (a > best) {
        best = a;
        next = i;
      }
    }
    if (next < 0) break;
    row = next;
  }

  AcaResult res;
  const int r = static_cast<int>(us.size());
  res.U.resize(m, r);
  res.V.resize(n, r);
  for (int k = 0; k < r; ++k) {
    res.U.col(k) = us[k];
    res.V.col(k) = vs[k];
  }
  res.stagnated = !converged && r == rmax;
  return res;
}

// ---------------------------------------------------------------------------
// Block tree
// ---------------------------------------------------------------------------

struct HMatrix::Block {
  enum Kind { Branch, Dense, LowRank };
  int rnode = 0, cnode = 0;
  Kind kind = Dense;
  int nrch = 0, ncch = 0;
  std::vector<std::unique_ptr<Block>> children;  // row-major nrch x ncch
  Eigen::MatrixXcd D;     // Dense
  Eigen::MatrixXcd U, V;  // LowRank: block ~ U * V^T
  std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXcd>> plu;  // factored leaf

  Block* child(int i, int j) const { return children[i * ncch + j].get(); }
  std::unique_ptr<Block> clone() const {
    auto b = std::make_unique<Block>();
    b->rnode = rnode;
    b->cnode = cnode;
    b->kind = kind;
    b->nrch = nrch;
    b->ncch = ncch;
    b->D = D;
    b->U = U;
    b->V = V;
    if (plu) b->plu = std::make_unique<Eigen::PartialPivLU<Eigen::MatrixXcd>>(*plu);
    b->children.reserve(children.size());
    for (const auto& c : children) b->children.push_back(c->clone());
    return b;
  }
};

namespace {

using Block = HMatrix::Block;
using Tree = ClusterTree;
using Eigen::MatrixXcd;
using RefC = Eigen::Ref<const MatrixXcd, 0, Eigen::OuterStride<>>;
using RefM = Eigen::Ref<MatrixXcd, 0, Eigen::OuterStride<>>;

/// Row tree / column tree of the blocks being walked plus the working
/// truncation tolerance and admissibility parameter.
struct Ctx {
  const Tree* R;
  const Tree* C;
  double tol;
  double eta;
};

int block_rows(const Ctx& ctx, const Block& b) { return ctx.R->node(b.rnode).size(); }
int block_cols(const Ctx& ctx, const Block& b) { return ctx.C->node(b.cnode).size(); }
int row_begin(const Ctx& ctx, const Block& b) { return ctx.R->node(b.rnode).begin; }
int col_begin(const Ctx& ctx, const Block& b) { return ctx.C->node(b.cnode).begin; }

std::vector<int> node_children(const Tree& t, int node) {
  const auto& nd = t.node(node);
  if (nd.leaf()) return {node};
  return {nd.child0, nd.child1};
}

void make_branch(const Ctx& ctx, Block& b,
                 const std::function<void(Block&)>& fill_child) {
  auto rch = node_children(*ctx.R, b.rnode);
  auto cch = node_children(*ctx.C, b.cnode);
  b.kind = Block::Branch;
  b.nrch = static_cast<int>(rch.size());
  b.ncch = static_cast<int>(cch.size());
  b.children.clear();
  for (int i = 0; i < b.nrch; ++i)
    for (int j = 0; j < b.ncch; ++j) {
      auto c = std::make_unique<Block>();
      c->rnode = rch[i];
      c->cnode = cch[j];
      fill_child(*c);
      b.children.push_back(std::move(c));
    }
}

bool admissible(const Ctx& ctx, int rnode, int cnode) {
  const auto& rn = ctx.R->node(rnode);
  const auto& cn = ctx.C->node(cnode);
  const double dist = box_distance(rn, cn);
  return dist > 0.0 && std::min(rn.diameter(), cn.diameter()) <= ctx.eta * dist;
}

// --- dense helpers ---------------------------------------------------------

/// Truncated QR-SVD recompression of U V^T at relative tolerance tol.
void recompress(MatrixXcd& U, MatrixXcd& V, double tol) {
  const Eigen::Index m = U.rows(), n = V.rows(), k = U.cols();
  if (k == 0) return;
  Eigen::HouseholderQR<MatrixXcd> qru(U);
  Eigen::HouseholderQR<MatrixXcd> qrv(V);
  const Eigen::Index ku = std::min(m, k), kv = std::min(n, k);
  MatrixXcd Ru = MatrixXcd::Zero(ku, k);
  Ru = qru.matrixQR().topRows(ku).triangularView<Eigen::Upper>();
  MatrixXcd Rv = MatrixXcd::Zero(kv, k);
  Rv = qrv.matrixQR().topRows(kv).triangularView<Eigen::Upper>();
  MatrixXcd S = Ru * Rv.transpose();  // ku x kv
  Eigen::JacobiSVD<MatrixXcd> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * sv(0)) ++rank;
  MatrixXcd Qu = qru.householderQ() * MatrixXcd::Identity(m, ku);
  MatrixXcd Qv = qrv.householderQ() * MatrixXcd::Identity(n, kv);
  U = Qu * svd.matrixU().leftCols(rank) * sv.head(rank).asDiagonal();
  V = Qv * svd.matrixV().leftCols(rank).conjugate();
}

/// Low-rank factorization of a dense matrix at relative tolerance tol.
void compress_dense(const RefC& D, double tol, MatrixXcd& U, MatrixXcd& V) {
  if (D.size() == 0 || D.norm() == 0.0) {
    U = MatrixXcd::Zero(D.rows(), 0);
    V = MatrixXcd::Zero(D.cols(), 0);
    return;
  }
  Eigen::JacobiSVD<MatrixXcd> svd(D, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * sv(0)) ++rank;
  U = svd.matrixU().leftCols(rank) * sv.head(rank).asDiagonal();
  V = svd.matrixV().leftCols(rank).conjugate();
}

// --- apply -----------------------------------------------------------------

/// Y[row range of b] += alpha * b * X[col range of b]; the bases give the
/// permuted index corresponding to row 0 of X / Y.
void apply_mat(const Ctx& ctx, const Block& b, const RefC& X, int xbase, RefM Y,
               int ybase, cplx alpha) {
  const int m = block_rows(ctx, b), n = block_cols(ctx, b);
  const int r0 = row_begin(ctx, b) - ybase, c0 = col_begin(ctx, b) - xbase;
  switch (b.kind) {
    case Block::Dense:
      Y.middleRows(r0, m).noalias() += alpha * (b.D * X.middleRows(c0, n));
      break;
    case Block::LowRank:
      if (b.U.cols() > 0)
        Y.middleRows(r0, m).noalias() +=
            alpha * (b.U * (b.V.transpose() * X.middleRows(c0, n)));
      break;
    case Block::Branch:
      for (const auto& c : b.children) apply_mat(ctx, *c, X, xbase, Y, ybase, alpha);
      break;
  }
}

/// Y[col range of b] += alpha * b^T * X[row range of b] (plain transpose).
void apply_transpose_mat(const Ctx& ctx, const Block& b, const RefC& X, int xbase,
                         RefM Y, int ybase, cplx alpha) {
  const int m = block_rows(ctx, b), n = block_cols(ctx, b);
  const int r0 = row_begin(ctx, b) - xbase, c0 = col_begin(ctx, b) - ybase;
  switch (b.kind) {
    case Block::Dense:
      Y.middleRows(c0, n).noalias() += alpha * (b.D.transpose() * X.middleRows(r0, m));
      break;
    case Block::LowRank:
      if (b.U.cols() > 0)
        Y.middleRows(c0, n).noalias() +=
            alpha * (b.V * (b.U.transpose() * X.middleRows(r0, m)));
      break;
    case Block::Branch:
      for (const auto& c : b.children)
        apply_transpose_mat(ctx, *c, X, xbase, Y, ybase, alpha);
      break;
  }
}

void to_dense_into(const Ctx& ctx, const Block& b, RefM out, int rbase, int cbase) {
  const int m = block_rows(ctx, b), n = block_cols(ctx, b);
  const int r0 = row_begin(ctx, b) - rbase, c0 = col_begin(ctx, b) - cbase;
  switch (b.kind) {
    case Block::Dense:
      out.block(r0, c0, m, n) = b.D;
      break;
    case Block::LowRank:
      out.block(r0, c0, m, n).noalias() = b.U * b.V.transpose();
      break;
    case Block::Branch:
      for (const auto& c : b.children) to_dense_into(ctx, *c, out, rbase, cbase);
      break;
  }
}

// --- structural updates ----------------------------------------------------

void add_lowrank(const Ctx& ctx, Block& b, const RefC& U, const RefC& V);
void add_dense_any(const Ctx& ctx, Block& b, const RefC& D);

void add_lowrank(const Ctx& ctx, Block& b, const RefC& U, const RefC& V) {
  if (U.cols() == 0) return;
  switch (b.kind) {
    case Block::Dense:
      b.D.noalias() += U * V.transpose();
      break;
    case Block::LowRank: {
      MatrixXcd U2(b.U.rows(), b.U.cols() + U.cols());
      MatrixXcd V2(b.V.rows(), b.V.cols() + V.cols());
      U2 << b.U, U;
      V2 << b.V, V;
      recompress(U2, V2, ctx.tol);
      b.U = std::move(U2);
      b.V = std::move(V2);
      break;
    }
    case Block::Branch: {
      const int rb = row_begin(ctx, b), cb = col_begin(ctx, b);
      for (const auto& c : b.children)
        add_lowrank(ctx, *c,
                    U.middleRows(row_begin(ctx, *c) - rb, block_rows(ctx, *c)),
                    V.middleRows(col_begin(ctx, *c) - cb, block_cols(ctx, *c)));
      break;
    }
  }
}

void add_dense_any(const Ctx& ctx, Block& b, const RefC& D) {
  switch (b.kind) {
    case Block::Dense:
      b.D += D;
      break;
    case Block::LowRank: {
      MatrixXcd U, V;
      compress_dense(D, ctx.tol, U, V);
      add_lowrank(ctx, b, U, V);
      break;
    }
    case Block::Branch: {
      const int rb = row_begin(ctx, b), cb = col_begin(ctx, b);
      for (const auto& c : b.children)
        add_dense_any(ctx, *c,
                      D.block(row_begin(ctx, *c) - rb, col_begin(ctx, *c) - cb,
                              block_rows(ctx, *c), block_cols(ctx, *c)));
      break;
    }
  }
}

/// Whole-block low-rank approximation (agglomeration) at ctx.tol.
void agglomerate(const Ctx& ctx, const Block& b, MatrixXcd& U, MatrixXcd& V) {
  switch (b.kind) {
    case Block::LowRank:
      U = b.U;
      V = b.V;
      return;
    case Block::Dense:
      compress_dense(b.D, ctx.tol, U, V);
      return;
    case Block::Branch: {
      const int m = block_rows(ctx, b), n = block_cols(ctx, b);
      const int rb = row_begin(ctx, b), cb = col_begin(ctx, b);
      Eigen::Index total = 0;
      std::vector<MatrixXcd> Us(b.children.size()), Vs(b.children.size());
      for (size_t i = 0; i < b.children.size(); ++i) {
        agglomerate(ctx, *b.children[i], Us[i], Vs[i]);
        total += Us[i].cols();
      }
      U = MatrixXcd::Zero(m, total);
      V = MatrixXcd::Zero(n, total);
      Eigen::Index at = 0;
      for (size_t i = 0; i < b.children.size(); ++i) {
        const Block& c = *b.children[i];
        U.block(row_begin(ctx, c) - rb, at, block_rows(ctx, c), Us[i].cols()) = Us[i];
        V.block(col_begin(ctx, c) - cb, at, block_cols(ctx, c), Vs[i].cols()) = Vs[i];
        at += Us[i].cols();
      }
      recompress(U, V, ctx.tol);
      return;
    }
  }
}

/// b += alpha * other over (possibly differing) structures.
void add_block(const Ctx& ctx, Block& b, const Block& o, cplx alpha) {
  if (b.kind == Block::Branch && o.kind == Block::Branch) {
    for (size_t i = 0; i < b.children.size(); ++i)
      add_block(ctx, *b.children[i], *o.children[i], alpha);
    return;
  }
  if (b.kind == Block::Branch) {
    const int rb = row_begin(ctx, b), cb = col_begin(ctx, b);
    if (o.kind == Block::LowRank) {
      MatrixXcd aU = alpha * o.U;
      for (const auto& c : b.children)
        add_lowrank(ctx, *c,
                    aU.middleRows(row_begin(ctx, *c) - rb, block_rows(ctx, *c)),
                    o.V.middleRows(col_begin(ctx, *c) - cb, block_cols(ctx, *c)));
    } else {
      MatrixXcd aD = alpha * o.D;
      for (const auto& c : b.children)
        add_dense_any(ctx, *c,
                      aD.block(row_begin(ctx, *c) - rb, col_begin(ctx, *c) - cb,
                               block_rows(ctx, *c), block_cols(ctx, *c)));
    }
    return;
  }
  switch (o.kind) {
    case Block::Dense:
      add_dense_any(ctx, b, alpha * o.D);
      break;
    case Block::LowRank:
      add_lowrank(ctx, b, alpha * o.U, o.V);
      break;
    case Block::Branch: {
      if (b.kind == Block::Dense) {
        MatrixXcd D = MatrixXcd::Zero(block_rows(ctx, b), block_cols(ctx, b));
        to_dense_into(ctx, o, D, row_begin(ctx, b), col_begin(ctx, b));
        b.D += alpha * D;
      } else {
        MatrixXcd U, V;
        agglomerate(ctx, o, U, V);
        add_lowrank(ctx, b, alpha * U, V);
      }
      break;
    }
  }
}

// --- multiply --------------------------------------------------------------

/// Empty block structure mirroring the admissibility pattern.
void zero_structure(const Ctx& ctx, Block& b) {
  const auto& rn = ctx.R->node(b.rnode);
  const auto& cn = ctx.C->node(b.cnode);
  if (admissible(ctx, b.rnode, b.cnode)) {
    b.kind = Block::LowRank;
    b.U = MatrixXcd::Zero(rn.size(), 0);
    b.V = MatrixXcd::Zero(cn.size(), 0);
    return;
  }
  if (rn.leaf() && cn.leaf()) {
    b.kind = Block::Dense;
    b.D = MatrixXcd::Zero(rn.size(), cn.size());
    return;
  }
  make_branch(ctx, b, [&](Block& c) { zero_structure(ctx, c); });
}

/// c += alpha * a * b. The three cluster trees are the row tree of c/a,
/// the shared middle tree (a's columns, b's rows) and the column tree of
/// c/b.
void mult_acc(const Tree& RT, const Tree& MT, const Tree& CT, double tol, double eta,
              Block& c, const Block& a, const Block& bb, cplx alpha) {
  const Ctx rc{&RT, &CT, tol, eta};   // c blocks
  const Ctx rm{&RT, &MT, tol, eta};   // a blocks
  const Ctx mc{&MT, &CT, tol, eta};   // b blocks

  if (a.kind == Block::LowRank) {
    if (a.U.cols() == 0) return;
    MatrixXcd W = MatrixXcd::Zero(block_cols(mc, bb), a.V.cols());
    apply_transpose_mat(mc, bb, a.V, col_begin(rm, a), W, col_begin(mc, bb), 1.0);
    add_lowrank(rc, c, alpha * a.U, W);
    return;
  }
  if (bb.kind == Block::LowRank) {
    if (bb.U.cols() == 0) return;
    MatrixXcd W = MatrixXcd::Zero(block_rows(rm, a), bb.U.cols());
    apply_mat(rm, a, bb.U, row_begin(mc, bb), W, row_begin(rm, a), 1.0);
    add_lowrank(rc, c, alpha * W, bb.V);
    return;
  }
  if (a.kind == Block::Dense) {
    // a is a leaf: (a * b) = (b^T a^T)^T, height bounded by the leaf size.
    MatrixXcd At = a.D.transpose();
    MatrixXcd Wt = MatrixXcd::Zero(block_cols(mc, bb), At.cols());
    apply_transpose_mat(mc, bb, At, col_begin(rm, a), Wt, col_begin(mc, bb), 1.0);
    add_dense_any(rc, c, alpha * Wt.transpose());
    return;
  }
  if (bb.kind == Block::Dense) {
    MatrixXcd W = MatrixXcd::Zero(block_rows(rm, a), bb.D.cols());
    apply_mat(rm, a, bb.D, row_begin(mc, bb), W, row_begin(rm, a), 1.0);
    add_dense_any(rc, c, alpha * W);
    return;
  }

  // Both factors are branches.
  if (c.kind != Block::Branch) {
    Block tmp;
    tmp.rnode = c.rnode;
    tmp.cnode = c.cnode;
    zero_structure(rc, tmp);
    mult_acc(RT, MT, CT, tol, eta, tmp, a, bb, 1.0);
    add_block(rc, c, tmp, alpha);
    return;
  }
  for (int i = 0; i < c.nrch; ++i)
    for (int j = 0; j < c.ncch; ++j)
      for (int k = 0; k < a.ncch; ++k)
        mult_acc(RT, MT, CT, tol, eta, *c.child(i, j), *a.child(i, k),
                 *bb.child(k, j), alpha);
}

// --- LU --------------------------------------------------------------------

void leaf_lower_solve(const Block& diag, RefM X) {
  // A = P^{-1} L U; the L-part solve is z = L^{-1} P x.
  X = diag.plu->permutationP() * MatrixXcd(X);
  diag.plu->matrixLU().triangularView<Eigen::UnitLower>().solveInPlace(X);
}

void leaf_upper_solve(const Block& diag, RefM X) {
  diag.plu->matrixLU().triangularView<Eigen::Upper>().solveInPlace(X);
}

void leaf_upperT_solve(const Block& diag, RefM X) {
  diag.plu->matrixLU().triangularView<Eigen::Upper>().transpose().solveInPlace(X);
}

void solve_lowerL_mat(const Ctx& ctx, const Block& diag, RefM X) {
  if (diag.kind == Block::Dense) {
    leaf_lower_solve(diag, X);
    return;
  }
  const int m0 = block_rows(ctx, *diag.child(0, 0));
  const int m1 = block_rows(ctx, *diag.child(1, 1));
  solve_lowerL_mat(ctx, *diag.child(0, 0), X.topRows(m0));
  apply_mat(ctx, *diag.child(1, 0), X.topRows(m0), row_begin(ctx, *diag.child(0, 0)),
            X.bottomRows(m1), row_begin(ctx, *diag.child(1, 1)), cplx(-1.0));
  solve_lowerL_mat(ctx, *diag.child(1, 1), X.bottomRows(m1));
}

void solve_upperU_mat(const Ctx& ctx, const Block& diag, RefM X) {
  if (diag.kind == Block::Dense) {
    leaf_upper_solve(diag, X);
    return;
  }
  const int m0 = block_rows(ctx, *diag.child(0, 0));
  const int m1 = block_rows(ctx, *diag.child(1, 1));
  solve_upperU_mat(ctx, *diag.child(1, 1), X.bottomRows(m1));
  apply_mat(ctx, *diag.child(0, 1), X.bottomRows(m1),
            col_begin(ctx, *diag.child(1, 1)), X.topRows(m0),
            row_begin(ctx, *diag.child(0, 0)), cplx(-1.0));
  solve_upperU_mat(ctx, *diag.child(0, 0), X.topRows(m0));
}

void solve_upperT_mat(const Ctx& ctx, const Block& diag, RefM X) {
  if (diag.kind == Block::Dense) {
    leaf_upperT_solve(diag, X);
    return;
  }
  const int m0 = block_cols(ctx, *diag.child(0, 0));
  const int m1 = block_cols(ctx, *diag.child(1, 1));
  solve_upperT_mat(ctx, *diag.child(0, 0), X.topRows(m0));
  apply_transpose_mat(ctx, *diag.child(0, 1), X.topRows(m0),
                      row_begin(ctx, *diag.child(0, 0)), X.bottomRows(m1),
                      col_begin(ctx, *diag.child(1, 1)), cplx(-1.0));
  solve_upperT_mat(ctx, *diag.child(1, 1), X.bottomRows(m1));
}

void solve_lowerL_h(const Ctx& ctx, const Tree& xcol_tree, const Block& diag,
                    Block& x);
void solve_upper_right_h(const Ctx& ctx, const Tree& xrow_tree, const Block& diag,
                         Block& x);

void solve_lowerL_h(const Ctx& ctx, const Tree& xcol_tree, const Block& diag,
                    Block& x) {
  switch (x.kind) {
    case Block::LowRank:
      if (x.U.cols() > 0) solve_lowerL_mat(ctx, diag, x.U);
      return;
    case Block::Dense:
      solve_lowerL_mat(ctx, diag, x.D);
      return;
    case Block::Branch:
      if (diag.kind == Block::Dense) {
        for (auto& c : x.children) solve_lowerL_h(ctx, xcol_tree, diag, *c);
        return;
      }
      for (int j = 0; j < x.ncch; ++j) {
        solve_lowerL_h(ctx, xcol_tree, *diag.child(0, 0), *x.child(0, j));
        mult_acc(*ctx.R, *ctx.R, xcol_tree, ctx.tol, ctx.eta, *x.child(1, j),
                 *diag.child(1, 0), *x.child(0, j), cplx(-1.0));
        solve_lowerL_h(ctx, xcol_tree, *diag.child(1, 1), *x.child(1, j));
      }
      return;
  }
}

void solve_upper_right_h(const Ctx& ctx, const Tree& xrow_tree, const Block& diag,
                         Block& x) {
  switch (x.kind) {
    case Block::LowRank:
      if (x.V.cols() > 0) solve_upperT_mat(ctx, diag, x.V);
      return;
    case Block::Dense: {
      MatrixXcd T = x.D.transpose();
      solve_upperT_mat(ctx, diag, T);
      x.D = T.transpose();
      return;
    }
    case Block::Branch:
      if (diag.kind == Block::Dense) {
        for (auto& c : x.children) solve_upper_right_h(ctx, xrow_tree, diag, *c);
        return;
      }
      for (int i = 0; i < x.nrch; ++i) {
        solve_upper_right_h(ctx, xrow_tree, *diag.child(0, 0), *x.child(i, 0));
        mult_acc(xrow_tree, *ctx.R, *ctx.R, ctx.tol, ctx.eta, *x.child(i, 1),
                 *x.child(i, 0), *diag.child(0, 1), cplx(-1.0));
        solve_upper_right_h(ctx, xrow_tree, *diag.child(1, 1), *x.child(i, 1));
      }
      return;
  }
}

void lu_block(const Ctx& ctx, Block& b) {
  if (b.kind == Block::Dense) {
    b.plu = std::make_unique<Eigen::PartialPivLU<MatrixXcd>>(b.D);
    const auto& lu = b.plu->matrixLU();
    for (Eigen::Index i = 0; i < lu.rows(); ++i)
      if (!(std::abs(lu(i, i)) > 0.0))
        throw std::runtime_error("hmatrix lu: zero pivot in diagonal block");
    b.D.resize(0, 0);
    return;
  }
  if (b.kind != Block::Branch)
    throw std::logic_error("hmatrix lu: low-rank diagonal block");
  lu_block(ctx, *b.child(0, 0));
  solve_lowerL_h(ctx, *ctx.C, *b.child(0, 0), *b.child(0, 1));       // U12
  solve_upper_right_h(ctx, *ctx.R, *b.child(0, 0), *b.child(1, 0));  // L21
  mult_acc(*ctx.R, *ctx.R, *ctx.C, ctx.tol, ctx.eta, *b.child(1, 1), *b.child(1, 0),
           *b.child(0, 1), cplx(-1.0));
  lu_block(ctx, *b.child(1, 1));
}

// --- misc walkers ----------------------------------------------------------

void scale_block(Block& b, cplx alpha) {
  switch (b.kind) {
    case Block::Dense:
      b.D *= alpha;
      break;
    case Block::LowRank:
      b.U *= alpha;
      break;
    case Block::Branch:
      for (auto& c : b.children) scale_block(*c, alpha);
      break;
  }
}

void collect_rank_map(const Ctx& ctx, const Block& b, std::vector<RankMapEntry>& out) {
  if (b.kind == Block::Branch) {
    for (const auto& c : b.children) collect_rank_map(ctx, *c, out);
    return;
  }
  const auto& rn = ctx.R->node(b.rnode);
  const auto& cn = ctx.C->node(b.cnode);
  RankMapEntry e;
  e.row_lo = rn.begin;
  e.row_hi = rn.end;
  e.col_lo = cn.begin;
  e.col_hi = cn.end;
  if (b.kind == Block::Dense) {
    e.kind = "dense";
    e.rank = std::min(rn.size(), cn.size());
  } else {
    e.kind = "lowrank";
    e.rank = static_cast<int>(b.U.cols());
  }
  out.push_back(e);
}

size_t count_scalars(const Ctx& ctx, const Block& b) {
  switch (b.kind) {
    case Block::Dense:
      return static_cast<size_t>(block_rows(ctx, b)) * block_cols(ctx, b);
    case Block::LowRank:
      return static_cast<size_t>(b.U.cols()) *
             (block_rows(ctx, b) + block_cols(ctx, b));
    case Block::Branch: {
      size_t s = 0;
      for (const auto& c : b.children) s += count_scalars(ctx, *c);
      return s;
    }
  }
  return 0;
}

void sparse_entry_into(const Ctx& ctx, Block& b, int pr, int pc, cplx value) {
  if (b.kind == Block::Branch) {
    for (auto& c : b.children) {
      const auto& rn = ctx.R->node(c->rnode);
      const auto& cn = ctx.C->node(c->cnode);
      if (pr >= rn.begin && pr < rn.end && pc >= cn.begin && pc < cn.end)
        return sparse_entry_into(ctx, *c, pr, pc, value);
    }
    throw std::logic_error("hmatrix axpy_sparse: no covering block");
  }
  if (b.kind == Block::LowRank) {
    // Densify; near-field corrections land in dense blocks, so this is rare.
    b.D = b.U * b.V.transpose();
    b.U.resize(0, 0);
    b.V.resize(0, 0);
    b.kind = Block::Dense;
  }
  b.D(pr - row_begin(ctx, b), pc - col_begin(ctx, b)) += value;
}

}  // namespace

// ---------------------------------------------------------------------------
// HMatrix public interface
// ---------------------------------------------------------------------------

HMatrix::HMatrix(const HMatrix& other)
    : rows_(other.rows_), cols_(other.cols_), params_(other.params_),
      demoted_(other.demoted_) {
  if (other.root_) root_ = other.root_->clone();
}

HMatrix& HMatrix::operator=(const HMatrix& other) {
  if (this == &other) return *this;
  rows_ = other.rows_;
  cols_ = other.cols_;
  params_ = other.params_;
  demoted_ = other.demoted_;
  root_ = other.root_ ? other.root_->clone() : nullptr;
  return *this;
}

HMatrix::HMatrix() = default;
HMatrix::HMatrix(HMatrix&&) noexcept = default;
HMatrix& HMatrix::operator=(HMatrix&&) noexcept = default;
HMatrix::~HMatrix() = default;

Eigen::Index HMatrix::rows() const { return rows_ ? rows_->size() : 0; }
Eigen::Index HMatrix::cols() const { return cols_ ? cols_->size() : 0; }

HMatrix HMatrix::assemble(const BlockEvaluator& eval,
                          std::shared_ptr<const ClusterTree> rows,
                          std::shared_ptr<const ClusterTree> cols,
                          const HParams& params) {
  if (eval.rows() != rows->size() || eval.cols() != cols->size())
    throw std::invalid_argument("hmatrix assemble: evaluator/tree size mismatch");
  if (!(params.tol > 0.0) || params.tol >= 1.0)
    throw std::invalid_argument("hmatrix assemble: tol must be in (0,1)");

  HMatrix h;
  h.rows_ = std::move(rows);
  h.cols_ = std::move(cols);
  h.params_ = params;
  Ctx ctx{h.rows_.get(), h.cols_.get(), params.tol, params.eta};
  int demoted = 0;

  auto ids_of = [](const Tree& t, int node) {
    const auto& nd = t.node(node);
    std::vector<int> ids(nd.size());
    for (int i = 0; i < nd.size(); ++i) ids[i] = t.perm()[nd.begin + i];
    return ids;
  };

  std::function<void(Block&)> build = [&](Block& b) {
    const auto& rn = ctx.R->node(b.rnode);
    const auto& cn = ctx.C->node(b.cnode);
    if (admissible(ctx, b.rnode, b.cnode)) {
      auto row_ids = ids_of(*ctx.R, b.rnode);
      auto col_ids = ids_of(*ctx.C, b.cnode);
      auto entries = [&](const std::vector<int>& lr, const std::vector<int>& lc) {
        std::vector<int> gr(lr.size()), gc(lc.size());
        for (size_t i = 0; i < lr.size(); ++i) gr[i] = row_ids[lr[i]];
        for (size_t i = 0; i < lc.size(); ++i) gc[i] = col_ids[lc[i]];
        Eigen::MatrixXcd out;
        eval.eval(gr, gc, out);
        return out;
      };
      AcaResult res = aca(entries, rn.size(), cn.size(), params.tol);
      if (res.stagnated) {
        ++demoted;
        b.kind = Block::Dense;
        eval.eval(row_ids, col_ids, b.D);
      } else {
        b.kind = Block::LowRank;
        b.U = std::move(res.U);
        b.V = std::move(res.V);
      }
      return;
    }
    if (rn.leaf() && cn.leaf()) {
      b.kind = Block::Dense;
      eval.eval(ids_of(*ctx.R, b.rnode), ids_of(*ctx.C, b.cnode), b.D);
      return;
    }
    make_branch(ctx, b, build);
  };

  h.root_ = std::make_unique<Block>();
  h.root_->rnode = h.rows_->root();
  h.root_->cnode = h.cols_->root();
  build(*h.root_);
  h.demoted_ = demoted;
  return h;
}

Eigen::VectorXcd HMatrix::matvec(const Eigen::VectorXcd& x) const {
  if (x.size() != cols()) throw std::invalid_argument("hmatrix matvec: size mismatch");
  Ctx ctx{rows_.get(), cols_.get(), params_.tol, params_.eta};
  Eigen::MatrixXcd xp(cols(), 1);
  Eigen::MatrixXcd yp = Eigen::MatrixXcd::Zero(rows(), 1);
  for (Eigen::Index i = 0; i < cols(); ++i) xp(i, 0) = x(cols_->perm()[i]);
  apply_mat(ctx, *root_, xp, 0, yp, 0, 1.0);
  Eigen::VectorXcd y(rows());
  for (Eigen::Index i = 0; i < rows(); ++i) y(rows_->perm()[i]) = yp(i, 0);
  return y;
}

Eigen::VectorXcd HMatrix::matvec_transpose(const Eigen::VectorXcd& x) const {
  if (x.size() != rows())
    throw std::invalid_argument("hmatrix matvec_transpose: size mismatch");
  Ctx ctx{rows_.get(), cols_.get(), params_.tol, params_.eta};
  Eigen::MatrixXcd xp(rows(), 1);
  Eigen::MatrixXcd yp = Eigen::MatrixXcd::Zero(cols(), 1);
  for (Eigen::Index i = 0; i < rows(); ++i) xp(i, 0) = x(rows_->perm()[i]);
  apply_transpose_mat(ctx, *root_, xp, 0, yp, 0, 1.0);
  Eigen::VectorXcd y(cols());
  for (Eigen::Index i = 0; i < cols(); ++i) y(cols_->perm()[i]) = yp(i, 0);
  return y;
}

void HMatrix::scale(cplx alpha) {
  if (root_) scale_block(*root_, alpha);
}

void HMatrix::axpy_sparse(cplx alpha, const SpMat& S) {
  SpMatC sc = S.cast<cplx>();
  axpy_sparse(alpha, sc);
}

void HMatrix::axpy_sparse(cplx alpha, const SpMatC& S) {
  if (S.rows() != rows() || S.cols() != cols())
    throw std::invalid_argument("hmatrix axpy_sparse: size mismatch");
  Ctx ctx{rows_.get(), cols_.get(), params_.tol, params_.eta};
  const auto& ipr = rows_->inverse_perm();
  const auto& ipc = cols_->inverse_perm();
  for (int k = 0; k < S.outerSize(); ++k)
    for (SpMatC::InnerIterator it(S, k); it; ++it)
      sparse_entry_into(ctx, *root_, ipr[it.row()], ipc[it.col()],
                        alpha * it.value());
}

void HMatrix::axpy(cplx alpha, const HMatrix& other, double tol) {
  if (rows_->perm() != other.rows_->perm() || cols_->perm() != other.cols_->perm())
    throw std::invalid_argument("hmatrix axpy: cluster tree mismatch");
  Ctx ctx{rows_.get(), cols_.get(), tol, params_.eta};
  add_block(ctx, *root_, *other.root_, alpha);
}

HMatrix HMatrix::add(const HMatrix& a, const HMatrix& b, double tol) {
  HMatrix c = a;
  c.axpy(1.0, b, tol);
  return c;
}

HMatrix HMatrix::multiply(const HMatrix& a, const HMatrix& b, double tol) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("hmatrix multiply: dimension mismatch");
  if (a.cols_->perm() != b.rows_->perm())
    throw std::invalid_argument("hmatrix multiply: middle cluster tree mismatch");
  HMatrix c;
  c.rows_ = a.rows_;
  c.cols_ = b.cols_;
  c.params_ = a.params_;
  c.params_.tol = tol;
  Ctx ctx{c.rows_.get(), c.cols_.get(), tol, c.params_.eta};
  c.root_ = std::make_unique<Block>();
  c.root_->rnode = c.rows_->root();
  c.root_->cnode = c.cols_->root();
  zero_structure(ctx, *c.root_);
  mult_acc(*a.rows_, *a.cols_, *b.cols_, tol, c.params_.eta, *c.root_, *a.root_,
           *b.root_, 1.0);
  return c;
}

HLu HMatrix::lu(double tol) const {
  if (rows() != cols())
    throw std::invalid_argument("hmatrix lu: matrix must be square");
  if (rows_->perm() != cols_->perm())
    throw std::invalid_argument("hmatrix lu: row and column trees must match");
  HLu f;
  f.factored_ = *this;
  f.factored_.params_.tol = tol;
  Ctx ctx{f.factored_.rows_.get(), f.factored_.cols_.get(), tol,
          f.factored_.params_.eta};
  lu_block(ctx, *f.factored_.root_);
  return f;
}

Eigen::MatrixXcd HMatrix::to_dense() const {
  Eigen::MatrixXcd perm_dense = Eigen::MatrixXcd::Zero(rows(), cols());
  Ctx ctx{rows_.get(), cols_.get(), params_.tol, params_.eta};
  to_dense_into(ctx, *root_, perm_dense, 0, 0);
  Eigen::MatrixXcd out(rows(), cols());
  for (Eigen::Index i = 0; i < rows(); ++i)
    for (Eigen::Index j = 0; j < cols(); ++j)
      out(rows_->perm()[i], cols_->perm()[j]) = perm_dense(i, j);
  return out;
}

std::vector<RankMapEntry> HMatrix::rank_map() const {
  std::vector<RankMapEntry> out;
  Ctx ctx{rows_.get(), cols_.get(), params_.tol, params_.eta};
  collect_rank_map(ctx, *root_, out);
  return out;
}

void HMatrix::write_rank_map_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "row_lo,row_hi,col_lo,col_hi,kind,rank\n";
  for (const auto& e : rank_map())
    out << e.row_lo << ',' << e.row_hi << ',' << e.col_lo << ',' << e.col_hi << ','
        << e.kind << ',' << e.rank << '\n';
}

size_t HMatrix::stored_scalars() const {
  Ctx ctx{rows_.get(), cols_.get(), params_.tol, params_.eta};
  return count_scalars(ctx, *root_);
}

// ---------------------------------------------------------------------------
// HLu
// ---------------------------------------------------------------------------

Eigen::VectorXcd HLu::solve(const Eigen::VectorXcd& b) const {
  const auto& tree = *factored_.rows_;
  if (b.size() != factored_.rows())
    throw std::invalid_argument("hlu solve: size mismatch");
  Ctx ctx{factored_.rows_.get(), factored_.cols_.get(), factored_.params_.tol,
          factored_.params_.eta};
  Eigen::MatrixXcd x(b.size(), 1);
  for (Eigen::Index i = 0; i < b.size(); ++i) x(i, 0) = b(tree.perm()[i]);
  solve_lowerL_mat(ctx, *factored_.root_, x);
  solve_upperU_mat(ctx, *factored_.root_, x);
  Eigen::VectorXcd out(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) out(tree.perm()[i]) = x(i, 0);
  return out;
}

namespace {

std::unique_ptr<Block> zero_leaf(int rnode, int cnode, int m, int n) {
  auto b = std::make_unique<Block>();
  b->rnode = rnode;
  b->cnode = cnode;
  b->kind = Block::LowRank;
  b->U = MatrixXcd::Zero(m, 0);
  b->V = MatrixXcd::Zero(n, 0);
  return b;
}

std::unique_ptr<Block> extract_factor(const Ctx& ctx, const Block& b, bool lower) {
  auto out = std::make_unique<Block>();
  out->rnode = b.rnode;
  out->cnode = b.cnode;
  if (b.kind == Block::Dense) {
    const Eigen::Index n = b.plu->matrixLU().rows();
    out->kind = Block::Dense;
    if (lower) {
      MatrixXcd L = MatrixXcd::Identity(n, n);
      L.triangularView<Eigen::StrictlyLower>() =
          b.plu->matrixLU().triangularView<Eigen::StrictlyLower>();
      out->D = b.plu->permutationP().inverse() * L;
    } else {
      out->D = b.plu->matrixLU().triangularView<Eigen::Upper>();
    }
    return out;
  }
  out->kind = Block::Branch;
  out->nrch = b.nrch;
  out->ncch = b.ncch;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const Block& c = *b.child(i, j);
      if (i == j) {
        out->children.push_back(extract_factor(ctx, c, lower));
      } else if ((i > j) == lower) {
        out->children.push_back(c.clone());
      } else {
        out->children.push_back(
            zero_leaf(c.rnode, c.cnode, block_rows(ctx, c), block_cols(ctx, c)));
      }
    }
  return out;
}

}  // namespace

HMatrix HLu::lower() const {
  HMatrix out;
  out.rows_ = factored_.rows_;
  out.cols_ = factored_.cols_;
  out.params_ = factored_.params_;
  Ctx ctx{out.rows_.get(), out.cols_.get(), out.params_.tol, out.params_.eta};
  out.root_ = extract_factor(ctx, *factored_.root_, true);
  return out;
}

HMatrix HLu::upper() const {
  HMatrix out;
  out.rows_ = factored_.rows_;
  out.cols_ = factored_.cols_;
  out.params_ = factored_.params_;
  Ctx ctx{out.rows_.get(), out.cols_.get(), out.params_.tol, out.params_.eta};
  out.root_ = extract_factor(ctx, *factored_.root_, false);
  return out;
}

}  // namespace galerk
