#include "galerk/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace galerk {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using SpMatR = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// --- contraction rules -------------------------------------------------------

struct Term {
  int tc, kc, uc;
  double sign;
};

/// Component pairing of test x kernel x trial. The 3x3x3 case is the
/// cross form  A_ij = int int G(x,y) . (phi_i(x) x psi_j(y)).
std::vector<Term> contraction(int t, int k, int u) {
  if (t == 1 && k == 1 && u == 1) return {{0, 0, 0, 1.0}};
  if (t == 3 && k == 1 && u == 3)
    return {{0, 0, 0, 1.0}, {1, 0, 1, 1.0}, {2, 0, 2, 1.0}};
  if (t == 3 && k == 3 && u == 3) {
    std::vector<Term> terms;
    for (int c = 0; c < 3; ++c) {
      const int a = (c + 1) % 3, b = (c + 2) % 3;
      terms.push_back({a, c, b, 1.0});
      terms.push_back({b, c, a, -1.0});
    }
    return terms;
  }
  if (t == 3 && k == 3 && u == 1)
    return {{0, 0, 0, 1.0}, {1, 1, 0, 1.0}, {2, 2, 0, 1.0}};
  if (t == 1 && k == 3 && u == 3)
    return {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}, {0, 2, 2, 1.0}};
  throw std::invalid_argument("assembly: incompatible operand components (" +
                              std::to_string(t) + "," + std::to_string(k) + "," +
                              std::to_string(u) + ")");
}

void check_fem_operands(const FemSpace& test, const FemSpace& trial) {
  if (test.result_components() != trial.result_components())
    throw std::invalid_argument(
        "assembly: test/trial result dimensions do not match");
}

}  // namespace

// --- FEM ---------------------------------------------------------------------

SpMat bilinear(const Domain& dom, const FemSpace& test, const FemSpace& trial) {
  check_fem_operands(test, trial);
  EvalMatrix bt = eval_matrix(test, dom);
  EvalMatrix bu = eval_matrix(trial, dom);
  QuadratureSet qs = quadrature(dom);
  SpMat a;
  for (int c = 0; c < bt.components(); ++c) {
    SpMat w = SpMat(bt.comps[c].transpose()) * qs.weights.asDiagonal() * bu.comps[c];
    a = (c == 0) ? w : SpMat(a + w);
  }
  return a;
}

SpMat bilinear_weighted(const Domain& dom, const FemSpace& test, const RealField& f,
                        const FemSpace& trial) {
  check_fem_operands(test, trial);
  EvalMatrix bt = eval_matrix(test, dom);
  EvalMatrix bu = eval_matrix(trial, dom);
  QuadratureSet qs = quadrature(dom);
  VectorXd fw = f(qs.points);
  if (fw.size() != qs.weights.size())
    throw std::invalid_argument("bilinear_weighted: weight length mismatch");
  fw.array() *= qs.weights.array();
  SpMat a;
  for (int c = 0; c < bt.components(); ++c) {
    SpMat w = SpMat(bt.comps[c].transpose()) * fw.asDiagonal() * bu.comps[c];
    a = (c == 0) ? w : SpMat(a + w);
  }
  return a;
}

VectorXd linear_form(const Domain& dom, const FemSpace& space, const RealField& f) {
  if (space.result_components() != 1)
    throw std::invalid_argument("linear_form: scalar integrand on a vector space");
  EvalMatrix b = eval_matrix(space, dom);
  QuadratureSet qs = quadrature(dom);
  VectorXd fv = f(qs.points);
  if (fv.size() != qs.weights.size())
    throw std::invalid_argument("linear_form: function output length mismatch");
  return b.comps[0].transpose() * (qs.weights.array() * fv.array()).matrix();
}

VectorXcd linear_form(const Domain& dom, const FemSpace& space, const CplxField& f) {
  if (space.result_components() != 1)
    throw std::invalid_argument("linear_form: scalar integrand on a vector space");
  EvalMatrix b = eval_matrix(space, dom);
  QuadratureSet qs = quadrature(dom);
  VectorXcd fv = f(qs.points);
  if (fv.size() != qs.weights.size())
    throw std::invalid_argument("linear_form: function output length mismatch");
  return b.comps[0].cast<cplx>().transpose() *
         VectorXcd(qs.weights.cast<cplx>().array() * fv.array());
}

VectorXcd linear_form(const Domain& dom, const FemSpace& space, const CplxField3& f) {
  if (space.result_components() != 3)
    throw std::invalid_argument("linear_form: vector integrand on a scalar space");
  EvalMatrix b = eval_matrix(space, dom);
  QuadratureSet qs = quadrature(dom);
  Eigen::MatrixX3cd fv = f(qs.points);
  if (fv.rows() != qs.weights.size())
    throw std::invalid_argument("linear_form: function output length mismatch");
  VectorXcd out = VectorXcd::Zero(space.free_count());
  for (int c = 0; c < 3; ++c)
    out += b.comps[c].cast<cplx>().transpose() *
           VectorXcd(qs.weights.cast<cplx>().array() * fv.col(c).array());
  return out;
}

// --- BEM sides ---------------------------------------------------------------

namespace {

/// One side of a double integral: quadrature points plus basis values with
/// the quadrature weights folded in, in two layouts (global sparse for the
/// dense path, per-dof support lists for block evaluation).
struct BemSide {
  MatX3 points;
  int ncomp = 1;
  Eigen::Index nfree = 0;
  std::vector<SpMatC> weighted;           // nfree x M (transposed)
  std::vector<std::vector<int>> dof_pts;  // per dof: point indices
  std::vector<std::vector<std::array<double, 3>>> dof_vals;  // aligned, weighted
};

BemSide make_side(const Domain& dom, const FemSpace& space) {
  BemSide s;
  QuadratureSet qs = quadrature(dom);
  EvalMatrix em = eval_matrix(space, dom);
  s.points = qs.points;
  s.ncomp = em.components();
  s.nfree = space.free_count();

  s.weighted.resize(s.ncomp);
  for (int c = 0; c < s.ncomp; ++c) {
    SpMat wc = SpMat((qs.weights.asDiagonal() * em.comps[c]).transpose());
    s.weighted[c] = wc.cast<cplx>();
  }

  s.dof_pts.resize(s.nfree);
  s.dof_vals.resize(s.nfree);
  std::vector<std::map<int, std::array<double, 3>>> tmp(s.nfree);
  for (int c = 0; c < s.ncomp; ++c)
    for (int j = 0; j < em.comps[c].outerSize(); ++j)
      for (SpMat::InnerIterator it(em.comps[c], j); it; ++it)
        tmp[j][static_cast<int>(it.row())][c] = it.value() * qs.weights(it.row());
  for (Eigen::Index j = 0; j < s.nfree; ++j)
    for (const auto& [pt, vals] : tmp[j]) {
      s.dof_pts[j].push_back(pt);
      s.dof_vals[j].push_back(vals);
    }
  return s;
}

BemSide make_point_side(const MatX3& points) {
  BemSide s;
  s.points = points;
  s.ncomp = 1;
  s.nfree = points.rows();
  std::vector<Eigen::Triplet<cplx>> trip;
  for (Eigen::Index i = 0; i < points.rows(); ++i) trip.emplace_back(i, i, 1.0);
  s.weighted.resize(1);
  s.weighted[0].resize(s.nfree, points.rows());
  s.weighted[0].setFromTriplets(trip.begin(), trip.end());
  s.dof_pts.resize(s.nfree);
  s.dof_vals.resize(s.nfree);
  for (Eigen::Index i = 0; i < s.nfree; ++i) {
    s.dof_pts[i] = {static_cast<int>(i)};
    s.dof_vals[i] = {{1.0, 0.0, 0.0}};
  }
  return s;
}

MatrixXcd bem_product(const BemSide& tst, const Kernel& kernel, const BemSide& tri,
                      const BemOptions& opts) {
  const auto terms = contraction(tst.ncomp, kernel.components(), tri.ncomp);
  const Eigen::Index mx = tst.points.rows(), my = tri.points.rows();
  const size_t need =
      16u * (size_t(tst.nfree) * tri.nfree + size_t(opts.chunk) * my +
             size_t(opts.chunk) * tri.nfree);
  if (need > opts.memory_cap_bytes)
    throw std::runtime_error(
        "bem_dense: estimated memory " + std::to_string(need / 1000000) +
        " MB exceeds the cap of " + std::to_string(opts.memory_cap_bytes / 1000000) +
        " MB; use the tol (H-matrix) variant");

  const double eps = singular_guard_radius(tst.points, tri.points);
  MatrixXcd a = MatrixXcd::Zero(tst.nfree, tri.nfree);
  std::vector<MatrixXcd> kmats;

  std::vector<SpMatC> right(tri.ncomp);
  for (int c = 0; c < tri.ncomp; ++c) right[c] = tri.weighted[c].transpose();

  for (Eigen::Index lo = 0; lo < mx; lo += opts.chunk) {
    const Eigen::Index len = std::min(opts.chunk, mx - lo);
    MatX3 xchunk = tst.points.middleRows(lo, len);
    kernel.evaluate_blocks(xchunk, tri.points, kmats, eps, /*mask=*/true);
    for (const auto& t : terms) {
      MatrixXcd kr = kmats[t.kc] * right[t.uc];  // len x nfree_trial
      a.noalias() += t.sign * (tst.weighted[t.tc].middleCols(lo, len) * kr);
    }
  }
  return a;
}

/// Galerkin-entry generator over dof pairs, backing ACA/H assembly.
class GalerkinEvaluator : public BlockEvaluator {
 public:
  GalerkinEvaluator(const BemSide& tst, const Kernel& kernel, const BemSide& tri)
      : tst_(tst), tri_(tri), kernel_(kernel),
        terms_(contraction(tst.ncomp, kernel.components(), tri.ncomp)),
        eps_(singular_guard_radius(tst.points, tri.points)) {
    xstamp_.assign(tst_.points.rows(), -1);
    ystamp_.assign(tri_.points.rows(), -1);
    xlocal_.assign(tst_.points.rows(), 0);
    ylocal_.assign(tri_.points.rows(), 0);
  }

  Eigen::Index rows() const override { return tst_.nfree; }
  Eigen::Index cols() const override { return tri_.nfree; }

  void eval(const std::vector<int>& row_ids, const std::vector<int>& col_ids,
            Eigen::MatrixXcd& out) const override {
    const int nr = static_cast<int>(row_ids.size());
    const int nc = static_cast<int>(col_ids.size());

    // Unique quadrature points supporting the requested dofs.
    ++query_;
    std::vector<int> xids, yids;
    for (int a = 0; a < nr; ++a)
      for (int p : tst_.dof_pts[row_ids[a]])
        if (xstamp_[p] != query_) {
          xstamp_[p] = query_;
          xlocal_[p] = static_cast<int>(xids.size());
          xids.push_back(p);
        }
    for (int b = 0; b < nc; ++b)
      for (int p : tri_.dof_pts[col_ids[b]])
        if (ystamp_[p] != query_) {
          ystamp_[p] = query_;
          ylocal_[p] = static_cast<int>(yids.size());
          yids.push_back(p);
        }

    MatX3 X(xids.size(), 3), Y(yids.size(), 3);
    for (size_t i = 0; i < xids.size(); ++i) X.row(i) = tst_.points.row(xids[i]);
    for (size_t i = 0; i < yids.size(); ++i) Y.row(i) = tri_.points.row(yids[i]);

    std::vector<MatrixXcd> kmats;
    kernel_.evaluate_blocks(X, Y, kmats, eps_, /*mask=*/true);

    std::vector<MatrixXcd> lt(tst_.ncomp), ru(tri_.ncomp);
    for (int c = 0; c < tst_.ncomp; ++c)
      lt[c] = MatrixXcd::Zero(nr, static_cast<Eigen::Index>(xids.size()));
    for (int c = 0; c < tri_.ncomp; ++c)
      ru[c] = MatrixXcd::Zero(static_cast<Eigen::Index>(yids.size()), nc);
    for (int a = 0; a < nr; ++a) {
      const auto& pts = tst_.dof_pts[row_ids[a]];
      const auto& vals = tst_.dof_vals[row_ids[a]];
      for (size_t q = 0; q < pts.size(); ++q)
        for (int c = 0; c < tst_.ncomp; ++c) lt[c](a, xlocal_[pts[q]]) = vals[q][c];
    }
    for (int b = 0; b < nc; ++b) {
      const auto& pts = tri_.dof_pts[col_ids[b]];
      const auto& vals = tri_.dof_vals[col_ids[b]];
      for (size_t q = 0; q < pts.size(); ++q)
        for (int c = 0; c < tri_.ncomp; ++c) ru[c](ylocal_[pts[q]], b) = vals[q][c];
    }

    out = MatrixXcd::Zero(nr, nc);
    for (const auto& t : terms_)
      out.noalias() += t.sign * (lt[t.tc] * (kmats[t.kc] * ru[t.uc]));
  }

 private:
  const BemSide& tst_;
  const BemSide& tri_;
  const Kernel& kernel_;
  std::vector<Term> terms_;
  double eps_;
  mutable long query_ = 0;
  mutable std::vector<long> xstamp_, ystamp_;
  mutable std::vector<int> xlocal_, ylocal_;
};

void check_bem_spaces(const Domain& dom_x, const Domain& dom_y, const FemSpace& test,
                      const FemSpace& trial) {
  if (test.mesh().element_count() != dom_x.mesh.element_count() ||
      trial.mesh().element_count() != dom_y.mesh.element_count())
    throw std::invalid_argument("bem: spaces must live on their domain meshes");
}

}  // namespace

Eigen::MatrixXcd bem_dense(const Domain& dom_x, const Domain& dom_y,
                           const FemSpace& test, const Kernel& kernel,
                           const FemSpace& trial, const BemOptions& opts) {
  check_bem_spaces(dom_x, dom_y, test, trial);
  BemSide tst = make_side(dom_x, test);
  BemSide tri = make_side(dom_y, trial);
  return bem_product(tst, kernel, tri, opts);
}

HMatrix bem_h(const Domain& dom_x, const Domain& dom_y, const FemSpace& test,
              const Kernel& kernel, const FemSpace& trial, double tol, double eta,
              int leaf_size) {
  check_bem_spaces(dom_x, dom_y, test, trial);
  BemSide tst = make_side(dom_x, test);
  BemSide tri = make_side(dom_y, trial);
  GalerkinEvaluator eval(tst, kernel, tri);
  auto rt = ClusterTree::build(test.free_dof_locations(), leaf_size);
  auto ct = ClusterTree::build(trial.free_dof_locations(), leaf_size);
  return HMatrix::assemble(eval, rt, ct, HParams{tol, eta, leaf_size});
}

Eigen::MatrixXcd radiation_dense(const MatX3& points, const Domain& dom_y,
                                 const Kernel& kernel, const FemSpace& trial,
                                 const BemOptions& opts) {
  if (points.rows() == 0) return Eigen::MatrixXcd(0, trial.free_count());
  BemSide tst = make_point_side(points);
  BemSide tri = make_side(dom_y, trial);
  return bem_product(tst, kernel, tri, opts);
}

HMatrix radiation_h(const MatX3& points, const Domain& dom_y, const Kernel& kernel,
                    const FemSpace& trial, double tol, double eta, int leaf_size) {
  BemSide tst = make_point_side(points);
  BemSide tri = make_side(dom_y, trial);
  GalerkinEvaluator eval(tst, kernel, tri);
  auto rt = ClusterTree::build(points, leaf_size);
  auto ct = ClusterTree::build(trial.free_dof_locations(), leaf_size);
  return HMatrix::assemble(eval, rt, ct, HParams{tol, eta, leaf_size});
}

// --- regularization ----------------------------------------------------------

namespace {

/// Circumradius of element e (enclosing radius for non-triangles).
double circumradius(const Mesh& mesh, Eigen::Index e) {
  if (mesh.dim() != 2) return mesh.element_radius(e);
  const Vec3 a = mesh.vertices.row(mesh.elements(e, 0));
  const Vec3 b = mesh.vertices.row(mesh.elements(e, 1));
  const Vec3 c = mesh.vertices.row(mesh.elements(e, 2));
  const double area = 0.5 * ((b - a).cross(c - a)).norm();
  if (area <= 0.0) return mesh.element_radius(e);
  return (a - b).norm() * (b - c).norm() * (c - a).norm() / (4.0 * area);
}

/// Near-field pair search: x sources vs y element centroids within
/// 3 x max of the two radii.
std::vector<std::pair<int, int>> close_pairs(const MatX3& xc, const VectorXd& xr,
                                             const MatX3& yc, const VectorXd& yr) {
  const double rmax = std::max(xr.size() ? xr.maxCoeff() : 0.0,
                               yr.size() ? yr.maxCoeff() : 0.0);
  const double cell = std::max(3.0 * rmax, 1e-300);
  std::map<std::array<int64_t, 3>, std::vector<int>> grid;
  auto key = [cell](const Vec3& p) {
    return std::array<int64_t, 3>{static_cast<int64_t>(std::floor(p.x() / cell)),
                                  static_cast<int64_t>(std::floor(p.y() / cell)),
                                  static_cast<int64_t>(std::floor(p.z() / cell))};
  };
  for (Eigen::Index e = 0; e < yc.rows(); ++e)
    grid[key(yc.row(e))].push_back(static_cast<int>(e));

  std::vector<std::pair<int, int>> pairs;
  for (Eigen::Index i = 0; i < xc.rows(); ++i) {
    const Vec3 p = xc.row(i);
    auto k = key(p);
    for (int64_t dx = -1; dx <= 1; ++dx)
      for (int64_t dy = -1; dy <= 1; ++dy)
        for (int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == grid.end()) continue;
          for (int e : it->second) {
            const double radius = 3.0 * std::max(xr(i), yr(e));
            if ((Vec3(yc.row(e)) - p).norm() <= radius)
              pairs.emplace_back(static_cast<int>(i), e);
          }
        }
  }
  return pairs;
}

/// Trial basis descriptor on one y element (geometry-evaluable, so the
/// semi-analytic integrals can be assembled without quadrature).
struct TrialLocal {
  int free_index;
  int kind;         // 0 P0, 1 P1 (vertex), 2 RWG id, 3 RWG div
  int vertex = 0;   // P1 local index
  double coef = 0;  // RWG: sign * l / (2 area)
  Vec3 p_opp = Vec3::Zero();
};

std::vector<TrialLocal> trial_locals(const FemSpace& trial, const Mesh& ymesh,
                                     Eigen::Index ye) {
  std::vector<TrialLocal> out;
  if (trial.family() == Family::P0 && trial.op() == DiffOp::Id) {
    const int fi = trial.free_index(static_cast<int>(ye));
    if (fi >= 0) out.push_back({fi, 0, 0, 0, Vec3::Zero()});
  } else if (trial.family() == Family::P1 && trial.op() == DiffOp::Id) {
    for (int l = 0; l < 3; ++l) {
      const int fi = trial.free_index(ymesh.elements(ye, l));
      if (fi >= 0) out.push_back({fi, 1, l, 0, Vec3::Zero()});
    }
  } else if (trial.family() == Family::RWG &&
             (trial.op() == DiffOp::Id || trial.op() == DiffOp::Div)) {
    const double area = ymesh.element_measure(ye);
    for (const auto& r : trial.rwg_locals(ye)) {
      const int fi = trial.free_index(r.dof);
      if (fi < 0) continue;
      TrialLocal t;
      t.free_index = fi;
      t.kind = trial.op() == DiffOp::Div ? 3 : 2;
      t.coef = r.sign * r.edge_len / (2.0 * area);
      t.p_opp = ymesh.vertices.row(ymesh.elements(ye, r.opp_local));
      out.push_back(t);
    }
  } else {
    throw std::invalid_argument(
        "regularize: unsupported trial family/operator combination");
  }
  return out;
}

/// Per-pair context: the y triangle, the trial dofs on it, and the shape
/// of the contraction. d-vectors contract against the test components
/// (slot 0 for scalar pairings).
struct YContext {
  Vec3 A, B, C;
  bool scalar_kernel;
  int test_comps;
  const FemSpace* trial;
  std::vector<TrialLocal> tdofs;
  Eigen::Matrix<double, Eigen::Dynamic, 3> g_bary;

  Eigen::Vector3d lam_at_rho(const TriangleNewton& tn) const {
    Eigen::Vector3d lam = Eigen::Vector3d::Zero();
    if (trial->family() == Family::P1) {
      Eigen::Matrix<double, 3, 2> E;
      E.col(0) = B - A;
      E.col(1) = C - A;
      Eigen::Vector2d uv =
          (E.transpose() * E).ldlt().solve(E.transpose() * (tn.rho - A));
      lam << 1.0 - uv(0) - uv(1), uv(0), uv(1);
    }
    return lam;
  }

  /// Semi-analytic integral of the singular kernel against trial dof j.
  Eigen::Vector3d exact(const Vec3& x, size_t j, const TriangleNewton& tn,
                        const Eigen::Vector3d& lam_rho) const {
    const TrialLocal& td = tdofs[j];
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    if (scalar_kernel) {
      switch (td.kind) {
        case 0: d(0) = tn.newton; break;
        case 1:
          d(0) = lam_rho(td.vertex) * tn.newton +
                 Vec3(g_bary.row(td.vertex)).dot(tn.moment);
          break;
        case 2:
          d = td.coef * (tn.moment + (tn.rho - td.p_opp) * tn.newton);
          break;
        case 3: d(0) = 2.0 * td.coef * tn.newton; break;
      }
    } else {
      switch (td.kind) {
        case 0: d = tn.grad; break;
        case 2:
          if (test_comps == 3)
            d = td.coef * (x - td.p_opp).cross(tn.grad);  // int psi x grad_y
          else
            d(0) = td.coef * (tn.grad.dot(x - td.p_opp) - tn.newton);
          break;
        default:
          throw std::invalid_argument(
              "regularize: grady[1/r] supports P0 and RWG-id trial only");
      }
    }
    return d;
  }

  /// Gauss part against trial dof j at one x point, with the domain's
  /// y rule; coincident pairs contribute zero (matching bem assembly).
  Eigen::Vector3d gauss(const Vec3& x, size_t j, const QuadratureSet& yqs,
                        Eigen::Index ye, int yg, double eps,
                        const ReferenceRule& yrule) const {
    const TrialLocal& td = tdofs[j];
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    for (int l = 0; l < yg; ++l) {
      const Eigen::Index yq = ye * yg + l;
      const Vec3 y = yqs.points.row(yq);
      const double w = yqs.weights(yq);
      const Vec3 rv = x - y;
      const double r = rv.norm();
      if (r <= eps) continue;
      double psi_s = 0.0;
      Vec3 psi_v = Vec3::Zero();
      switch (td.kind) {
        case 0: psi_s = 1.0; break;
        case 1: psi_s = yrule.barycentric(l, td.vertex); break;
        case 2: psi_v = td.coef * (y - td.p_opp); break;
        case 3: psi_s = 2.0 * td.coef; break;
      }
      if (scalar_kernel) {
        const double kv = 1.0 / r;
        if (td.kind == 2)
          d += w * kv * psi_v;
        else
          d(0) += w * kv * psi_s;
      } else {
        const Vec3 gv = rv / (r * r * r);  // grad_y 1/r = (x - y)/r^3
        if (td.kind == 2) {
          if (test_comps == 3)
            d += w * psi_v.cross(gv);
          else
            d(0) += w * gv.dot(psi_v);
        } else {
          d += w * gv * psi_s;
        }
      }
    }
    return d;
  }
};

/// Local matrix of the semi-analytic part over one barycentric
/// sub-triangle of the x element, degree-5 rule.
Eigen::MatrixXd accurate_cell(const FemSpace& test, const Mesh& xmesh,
                              Eigen::Index ex, const Eigen::Matrix3d& corners,
                              double measure_frac, const YContext& yctx) {
  const ReferenceRule& rule = reference_rule(2, 7);
  Eigen::MatrixXd bary = rule.barycentric * corners;  // 7 x 3 element bary
  auto tvals = element_basis_values(test, ex, bary, test.op());
  const int nloc_t = static_cast<int>(tvals[0].cols());
  const double measure = xmesh.element_measure(ex) * measure_frac;

  const Vec3 v0 = xmesh.vertices.row(xmesh.elements(ex, 0));
  const Vec3 v1 = xmesh.vertices.row(xmesh.elements(ex, 1));
  const Vec3 v2 = xmesh.vertices.row(xmesh.elements(ex, 2));

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nloc_t, yctx.tdofs.size());
  for (int q = 0; q < 7; ++q) {
    const Vec3 x = bary(q, 0) * v0 + bary(q, 1) * v1 + bary(q, 2) * v2;
    const double w = rule.weights(q) * measure;
    const TriangleNewton tn = analytic_triangle_integrals(yctx.A, yctx.B, yctx.C, x);
    const Eigen::Vector3d lam = yctx.lam_at_rho(tn);
    for (size_t j = 0; j < yctx.tdofs.size(); ++j) {
      const Eigen::Vector3d d = yctx.exact(x, j, tn, lam);
      for (int i = 0; i < nloc_t; ++i) {
        double acc = 0.0;
        for (int c = 0; c < yctx.test_comps; ++c) acc += tvals[c](q, i) * d(c);
        out(i, static_cast<Eigen::Index>(j)) += w * acc;
      }
    }
  }
  return out;
}

/// Adaptive x integration of the semi-analytic part: subdivide the
/// barycentric sub-triangle until the local matrix stabilizes.
void accurate_adaptive(const FemSpace& test, const Mesh& xmesh, Eigen::Index ex,
                       const Eigen::Matrix3d& corners, double measure_frac,
                       const YContext& yctx, double cell_tol, int depth,
                       Eigen::MatrixXd& acc) {
  Eigen::MatrixXd whole =
      accurate_cell(test, xmesh, ex, corners, measure_frac, yctx);
  Eigen::Matrix3d sub[4];
  const Eigen::RowVector3d m01 = 0.5 * (corners.row(0) + corners.row(1));
  const Eigen::RowVector3d m12 = 0.5 * (corners.row(1) + corners.row(2));
  const Eigen::RowVector3d m20 = 0.5 * (corners.row(2) + corners.row(0));
  sub[0] << corners.row(0), m01, m20;
  sub[1] << corners.row(1), m12, m01;
  sub[2] << corners.row(2), m20, m12;
  sub[3] << m01, m12, m20;
  Eigen::MatrixXd split = Eigen::MatrixXd::Zero(whole.rows(), whole.cols());
  for (const auto& s : sub)
    split += accurate_cell(test, xmesh, ex, s, 0.25 * measure_frac, yctx);
  if ((split - whole).cwiseAbs().maxCoeff() <= cell_tol || depth >= 6) {
    acc += split;
    return;
  }
  for (const auto& s : sub)
    accurate_adaptive(test, xmesh, ex, s, 0.25 * measure_frac, yctx,
                      0.5 * cell_tol, depth + 1, acc);
}

}  // namespace

SpMat regularize(const Domain& dom_x, const Domain& dom_y, const FemSpace& test,
                 const std::string& singular_name, const FemSpace& trial) {
  const bool scalar_kernel = singular_name == "[1/r]";
  if (!scalar_kernel && singular_name != "grady[1/r]")
    throw std::invalid_argument("regularize: unsupported singular kernel '" +
                                singular_name + "'");
  if (dom_x.mesh.dim() != 2 || dom_y.mesh.dim() != 2)
    throw std::invalid_argument("regularize: triangle meshes required");
  const Mesh& xmesh = dom_x.mesh;
  const Mesh& ymesh = dom_y.mesh;
  const int test_comps = test.result_components();
  contraction(test_comps, scalar_kernel ? 1 : 3, trial.result_components());

  QuadratureSet xqs = quadrature(dom_x);
  QuadratureSet yqs = quadrature(dom_y);
  const ReferenceRule& xrule = reference_rule(2, dom_x.gauss_count);
  const ReferenceRule& yrule = reference_rule(2, dom_y.gauss_count);
  const int xg = dom_x.gauss_count, yg = dom_y.gauss_count;
  const double eps = singular_guard_radius(xqs.points, yqs.points);

  MatX3 xc(xmesh.element_count(), 3), yc(ymesh.element_count(), 3);
  VectorXd xr(xmesh.element_count()), yr(ymesh.element_count());
  for (Eigen::Index e = 0; e < xmesh.element_count(); ++e) {
    xc.row(e) = xmesh.element_centroid(e).transpose();
    xr(e) = circumradius(xmesh, e);
  }
  for (Eigen::Index e = 0; e < ymesh.element_count(); ++e) {
    yc.row(e) = ymesh.element_centroid(e).transpose();
    yr(e) = circumradius(ymesh, e);
  }
  auto pairs = close_pairs(xc, xr, yc, yr);

  const Eigen::Matrix3d whole_bary = Eigen::Matrix3d::Identity();
  std::vector<Eigen::Triplet<double>> trip;

  for (const auto& [ex, ye] : pairs) {
    YContext yctx;
    yctx.A = ymesh.vertices.row(ymesh.elements(ye, 0));
    yctx.B = ymesh.vertices.row(ymesh.elements(ye, 1));
    yctx.C = ymesh.vertices.row(ymesh.elements(ye, 2));
    yctx.scalar_kernel = scalar_kernel;
    yctx.test_comps = test_comps;
    yctx.trial = &trial;
    yctx.tdofs = trial_locals(trial, ymesh, ye);
    if (yctx.tdofs.empty()) continue;
    if (trial.family() == Family::P1) yctx.g_bary = trial.barycentric_gradients(ye);

    auto test_dofs = test.element_dofs(ex);

    // Gauss x Gauss part at the domain rule (mirrors bem assembly).
    auto tvals = element_basis_values(test, ex, xrule.barycentric, test.op());
    Eigen::MatrixXd local =
        Eigen::MatrixXd::Zero(test_dofs.size(), yctx.tdofs.size());
    for (int k = 0; k < xg; ++k) {
      const Eigen::Index xq = static_cast<Eigen::Index>(ex) * xg + k;
      const Vec3 x = xqs.points.row(xq);
      const double w = xqs.weights(xq);
      for (size_t j = 0; j < yctx.tdofs.size(); ++j) {
        const Eigen::Vector3d d = yctx.gauss(x, j, yqs, ye, yg, eps, yrule);
        for (size_t i = 0; i < test_dofs.size(); ++i) {
          double acc = 0.0;
          for (int c = 0; c < test_comps; ++c) acc += tvals[c](k, i) * d(c);
          local(i, j) -= w * acc;
        }
      }
    }

    // Semi-analytic part with adaptive x refinement.
    Eigen::MatrixXd acc =
        Eigen::MatrixXd::Zero(test_dofs.size(), yctx.tdofs.size());
    Eigen::MatrixXd probe =
        accurate_cell(test, xmesh, ex, whole_bary, 1.0, yctx);
    const double cell_tol =
        1e-8 * std::max(probe.cwiseAbs().maxCoeff(), 1e-300);
    accurate_adaptive(test, xmesh, ex, whole_bary, 1.0, yctx, cell_tol, 0, acc);
    local += acc;

    for (size_t i = 0; i < test_dofs.size(); ++i) {
      const int fi = test.free_index(test_dofs[i]);
      if (fi < 0) continue;
      for (size_t j = 0; j < yctx.tdofs.size(); ++j)
        trip.emplace_back(fi, yctx.tdofs[j].free_index, local(i, j));
    }
  }

  SpMat out(test.free_count(), trial.free_count());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

SpMat regularize_radiation(const MatX3& points, const Domain& dom_y,
                           const std::string& singular_name, const FemSpace& trial) {
  const bool scalar_kernel = singular_name == "[1/r]";
  if (!scalar_kernel && singular_name != "grady[1/r]")
    throw std::invalid_argument("regularize: unsupported singular kernel '" +
                                singular_name + "'");
  if (dom_y.mesh.dim() != 2)
    throw std::invalid_argument("regularize: dom_y must be a triangle mesh");
  const Mesh& ymesh = dom_y.mesh;
  contraction(1, scalar_kernel ? 1 : 3, trial.result_components());

  QuadratureSet yqs = quadrature(dom_y);
  const ReferenceRule& yrule = reference_rule(2, dom_y.gauss_count);
  const int yg = dom_y.gauss_count;
  const double eps = singular_guard_radius(points, yqs.points);

  MatX3 yc(ymesh.element_count(), 3);
  VectorXd yr(ymesh.element_count());
  for (Eigen::Index e = 0; e < ymesh.element_count(); ++e) {
    yc.row(e) = ymesh.element_centroid(e).transpose();
    yr(e) = circumradius(ymesh, e);
  }
  VectorXd zero_radius = VectorXd::Zero(points.rows());
  auto pairs = close_pairs(points, zero_radius, yc, yr);

  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& [pt, ye] : pairs) {
    YContext yctx;
    yctx.A = ymesh.vertices.row(ymesh.elements(ye, 0));
    yctx.B = ymesh.vertices.row(ymesh.elements(ye, 1));
    yctx.C = ymesh.vertices.row(ymesh.elements(ye, 2));
    yctx.scalar_kernel = scalar_kernel;
    yctx.test_comps = 1;
    yctx.trial = &trial;
    yctx.tdofs = trial_locals(trial, ymesh, ye);
    if (yctx.tdofs.empty()) continue;
    if (trial.family() == Family::P1) yctx.g_bary = trial.barycentric_gradients(ye);

    const Vec3 x = points.row(pt);
    const TriangleNewton tn = analytic_triangle_integrals(yctx.A, yctx.B, yctx.C, x);
    const Eigen::Vector3d lam = yctx.lam_at_rho(tn);
    for (size_t j = 0; j < yctx.tdofs.size(); ++j) {
      const double exact = yctx.exact(x, j, tn, lam)(0);
      const double gauss = yctx.gauss(x, j, yqs, ye, yg, eps, yrule)(0);
      trip.emplace_back(pt, yctx.tdofs[j].free_index, exact - gauss);
    }
  }

  SpMat out(points.rows(), trial.free_count());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace galerk
