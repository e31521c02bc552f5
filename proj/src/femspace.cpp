#include "galerk/femspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace galerk {

namespace {

bool same_mesh(const Mesh& a, const Mesh& b) {
  return a.vertices.rows() == b.vertices.rows() &&
         a.elements.rows() == b.elements.rows() &&
         a.elements.cols() == b.elements.cols() &&
         (a.vertices.array() == b.vertices.array()).all() &&
         (a.elements.array() == b.elements.array()).all();
}

// Local edge orderings per element dimension.
const std::vector<std::array<int, 2>>& local_edges(int dim) {
  static const std::vector<std::array<int, 2>> seg = {{0, 1}};
  static const std::vector<std::array<int, 2>> tri = {{0, 1}, {1, 2}, {2, 0}};
  static const std::vector<std::array<int, 2>> tet = {{0, 1}, {0, 2}, {0, 3},
                                                      {1, 2}, {1, 3}, {2, 3}};
  switch (dim) {
    case 1: return seg;
    case 2: return tri;
    default: return tet;
  }
}

/// Match query points against a reference point set within tol.
class PointMatcher {
 public:
  PointMatcher(const MatX3& ref, double tol) : ref_(ref), tol_(std::max(tol, 1e-300)) {
    for (Eigen::Index i = 0; i < ref.rows(); ++i)
      grid_[key(ref.row(i))].push_back(static_cast<int>(i));
  }
  int find(const Vec3& p) const {
    auto k = key(p);
    const double tol2 = tol_ * tol_;
    for (int64_t dx = -1; dx <= 1; ++dx)
      for (int64_t dy = -1; dy <= 1; ++dy)
        for (int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid_.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == grid_.end()) continue;
          for (int j : it->second)
            if ((Vec3(ref_.row(j)) - p).squaredNorm() <= tol2) return j;
        }
    return -1;
  }

 private:
  std::array<int64_t, 3> key(const Vec3& p) const {
    return {static_cast<int64_t>(std::floor(p.x() / tol_)),
            static_cast<int64_t>(std::floor(p.y() / tol_)),
            static_cast<int64_t>(std::floor(p.z() / tol_))};
  }
  MatX3 ref_;
  double tol_;
  std::map<std::array<int64_t, 3>, std::vector<int>> grid_;
};

std::string op_name(DiffOp op) {
  switch (op) {
    case DiffOp::Id: return "id";
    case DiffOp::Grad: return "grad";
    case DiffOp::Div: return "div";
    case DiffOp::Nx: return "nx";
    case DiffOp::Ntimes: return "ntimes";
  }
  return "?";
}

}  // namespace

FemSpace::FemSpace(Mesh mesh, Family family) : mesh_(std::move(mesh)), family_(family) {
  const int d = mesh_.dim();
  if (mesh_.empty()) throw std::invalid_argument("fem: empty mesh");
  if (family == Family::RWG && d != 2)
    throw std::invalid_argument("fem: RWG requires a dimension-2 mesh");

  if (family == Family::P2 || family == Family::RWG) {
    edges_ = unique_edges(mesh_);
    std::map<std::array<int, 2>, int> index;
    for (size_t i = 0; i < edges_.size(); ++i) index[edges_[i]] = static_cast<int>(i);
    const auto& loc = local_edges(d);
    element_edges_.assign(mesh_.element_count(), {-1, -1, -1, -1, -1, -1});
    for (Eigen::Index e = 0; e < mesh_.element_count(); ++e)
      for (size_t le = 0; le < loc.size(); ++le) {
        int u = mesh_.elements(e, loc[le][0]), v = mesh_.elements(e, loc[le][1]);
        element_edges_[e][le] = index.at({std::min(u, v), std::max(u, v)});
      }
  }

  switch (family) {
    case Family::P0:
      dof_count_ = static_cast<int>(mesh_.element_count());
      break;
    case Family::P1:
      dof_count_ = static_cast<int>(mesh_.vertex_count());
      break;
    case Family::P2:
      dof_count_ = static_cast<int>(mesh_.vertex_count() + edges_.size());
      break;
    case Family::RWG: {
      // Dofs on edges shared by exactly two triangles; plus/minus by
      // ascending element index.
      edge_elements_.assign(edges_.size(), {-1, -1});
      std::vector<int> adjacency(edges_.size(), 0);
      const auto& loc = local_edges(2);
      for (Eigen::Index e = 0; e < mesh_.element_count(); ++e)
        for (size_t le = 0; le < loc.size(); ++le) {
          int id = element_edges_[e][le];
          if (adjacency[id] == 0)
            edge_elements_[id][0] = static_cast<int>(e);
          else if (adjacency[id] == 1)
            edge_elements_[id][1] = static_cast<int>(e);
          ++adjacency[id];
        }
      // Keep only interior edges; renumber them as dofs.
      std::vector<std::array<int, 2>> kept_edges;
      std::vector<std::array<int, 2>> kept_elems;
      std::vector<int> edge_dof(edges_.size(), -1);
      for (size_t i = 0; i < edges_.size(); ++i)
        if (adjacency[i] == 2) {
          edge_dof[i] = static_cast<int>(kept_edges.size());
          kept_edges.push_back(edges_[i]);
          kept_elems.push_back(edge_elements_[i]);
        }
      // element_edges_ rewritten in dof numbering (-1 for boundary edges).
      for (auto& per_elt : element_edges_)
        for (int& id : per_elt)
          if (id >= 0) id = edge_dof[id];
      edges_ = std::move(kept_edges);
      edge_elements_ = std::move(kept_elems);
      dof_count_ = static_cast<int>(edges_.size());
      break;
    }
  }
  constrained_.assign(dof_count_, 0);
  free_index_.resize(dof_count_);
  std::iota(free_index_.begin(), free_index_.end(), 0);
  free_count_ = dof_count_;
}

void FemSpace::constrain(const std::vector<int>& dofs) {
  for (int d : dofs) constrained_[d] = 1;
  free_count_ = 0;
  for (int i = 0; i < dof_count_; ++i)
    free_index_[i] = constrained_[i] ? -1 : free_count_++;
}

int FemSpace::result_components() const {
  switch (op_) {
    case DiffOp::Id: return family_ == Family::RWG ? 3 : 1;
    case DiffOp::Grad:
    case DiffOp::Nx:
    case DiffOp::Ntimes: return 3;
    case DiffOp::Div: return 1;
  }
  return 1;
}

MatX3 FemSpace::dof_locations() const {
  MatX3 loc(dof_count_, 3);
  switch (family_) {
    case Family::P0:
      for (Eigen::Index e = 0; e < mesh_.element_count(); ++e)
        loc.row(e) = mesh_.element_centroid(e).transpose();
      break;
    case Family::P1:
      loc = mesh_.vertices;
      break;
    case Family::P2:
      loc.topRows(mesh_.vertex_count()) = mesh_.vertices;
      for (size_t i = 0; i < edges_.size(); ++i)
        loc.row(mesh_.vertex_count() + i) =
            0.5 * (mesh_.vertices.row(edges_[i][0]) + mesh_.vertices.row(edges_[i][1]));
      break;
    case Family::RWG:
      for (size_t i = 0; i < edges_.size(); ++i)
        loc.row(i) =
            0.5 * (mesh_.vertices.row(edges_[i][0]) + mesh_.vertices.row(edges_[i][1]));
      break;
  }
  return loc;
}

MatX3 FemSpace::free_dof_locations() const {
  MatX3 all = dof_locations();
  MatX3 out(free_count_, 3);
  for (int i = 0; i < dof_count_; ++i)
    if (free_index_[i] >= 0) out.row(free_index_[i]) = all.row(i);
  return out;
}

int FemSpace::dofs_per_element() const {
  const int d = mesh_.dim();
  switch (family_) {
    case Family::P0: return 1;
    case Family::P1: return d + 1;
    case Family::P2: return d + 1 + static_cast<int>(local_edges(d).size());
    case Family::RWG: return 3;
  }
  return 0;
}

std::vector<int> FemSpace::element_dofs(Eigen::Index e) const {
  std::vector<int> out;
  const int d = mesh_.dim();
  switch (family_) {
    case Family::P0:
      out.push_back(static_cast<int>(e));
      break;
    case Family::P1:
      for (int c = 0; c <= d; ++c) out.push_back(mesh_.elements(e, c));
      break;
    case Family::P2: {
      for (int c = 0; c <= d; ++c) out.push_back(mesh_.elements(e, c));
      const int nv = static_cast<int>(mesh_.vertex_count());
      for (size_t le = 0; le < local_edges(d).size(); ++le)
        out.push_back(nv + element_edges_[e][le]);
      break;
    }
    case Family::RWG:
      for (int le = 0; le < 3; ++le)
        if (element_edges_[e][le] >= 0) out.push_back(element_edges_[e][le]);
      break;
  }
  return out;
}

std::vector<FemSpace::RwgLocal> FemSpace::rwg_locals(Eigen::Index e) const {
  if (family_ != Family::RWG) throw std::logic_error("rwg_locals: not an RWG space");
  std::vector<RwgLocal> out;
  const auto& loc = local_edges(2);
  for (int le = 0; le < 3; ++le) {
    const int dof = element_edges_[e][le];
    if (dof < 0) continue;
    RwgLocal r;
    r.dof = dof;
    r.sign = (edge_elements_[dof][0] == static_cast<int>(e)) ? 1.0 : -1.0;
    r.opp_local = 3 - loc[le][0] - loc[le][1];
    r.edge_len = (Vec3(mesh_.vertices.row(edges_[dof][0])) -
                  Vec3(mesh_.vertices.row(edges_[dof][1]))).norm();
    out.push_back(r);
  }
  return out;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> FemSpace::barycentric_gradients(
    Eigen::Index e) const {
  const int d = mesh_.dim();
  Eigen::Matrix<double, Eigen::Dynamic, 3> g(d + 1, 3);
  Vec3 v0 = mesh_.vertices.row(mesh_.elements(e, 0));
  if (d == 1) {
    Vec3 t = Vec3(mesh_.vertices.row(mesh_.elements(e, 1))) - v0;
    g.row(1) = (t / t.squaredNorm()).transpose();
    g.row(0) = -g.row(1);
  } else {
    Eigen::Matrix<double, 3, Eigen::Dynamic> E(3, d);
    for (int c = 1; c <= d; ++c)
      E.col(c - 1) = Vec3(mesh_.vertices.row(mesh_.elements(e, c))) - v0;
    // Tangential gradients: G = E (E^T E)^{-1}.
    Eigen::MatrixXd gram = E.transpose() * E;
    Eigen::MatrixXd G = E * gram.inverse();
    g.row(0).setZero();
    for (int c = 1; c <= d; ++c) {
      g.row(c) = G.col(c - 1).transpose();
      g.row(0) -= g.row(c);
    }
  }
  return g;
}

FemSpace make_fem(const Mesh& mesh, const std::string& family_name) {
  Family f;
  if (family_name == "P0") f = Family::P0;
  else if (family_name == "P1") f = Family::P1;
  else if (family_name == "P2") f = Family::P2;
  else if (family_name == "RWG") f = Family::RWG;
  else throw std::invalid_argument("fem: unknown family '" + family_name + "'");
  return FemSpace(mesh, f);
}

FemSpace dirichlet(const FemSpace& space, const Mesh& bnd) {
  if (!space.scalar_family())
    throw std::invalid_argument("dirichlet: unsupported for vector families");
  if (bnd.empty()) return space;

  FemSpace bspace(bnd, space.family());
  MatX3 targets = bspace.dof_locations();
  const double tol = std::max(1e-300, 1e-12 * space.mesh().bounding_box_diagonal());
  PointMatcher matcher(space.dof_locations(), tol);

  std::vector<int> constrained;
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    int dof = matcher.find(targets.row(i));
    if (dof >= 0) constrained.push_back(dof);
  }
  FemSpace out = space;
  out.constrain(constrained);
  return out;
}

namespace {

FemSpace with_op(const FemSpace& s, DiffOp op) {
  FemSpace out = s;
  out.set_op(op);
  return out;
}

void check_op(const FemSpace& s, DiffOp op) {
  const bool scalar = s.scalar_family();
  switch (op) {
    case DiffOp::Id:
      return;
    case DiffOp::Grad:
      if (s.family() == Family::P1 || s.family() == Family::P2) return;
      break;
    case DiffOp::Div:
    case DiffOp::Nx:
      if (s.family() == Family::RWG) return;
      break;
    case DiffOp::Ntimes:
      if (scalar && s.mesh().dim() == 2) return;
      break;
  }
  throw std::invalid_argument("operator '" + op_name(op) +
                              "' incompatible with this finite element space");
}

}  // namespace

FemSpace grad(const FemSpace& s) { return with_op(s, DiffOp::Grad); }
FemSpace div(const FemSpace& s) { return with_op(s, DiffOp::Div); }
FemSpace nx(const FemSpace& s) { return with_op(s, DiffOp::Nx); }
FemSpace ntimes(const FemSpace& s) { return with_op(s, DiffOp::Ntimes); }

namespace {

/// Dense per-element basis table: values(q, local, comp).
void element_basis(const FemSpace& space, Eigen::Index e,
                   const Eigen::MatrixXd& bary, DiffOp op,
                   std::vector<Eigen::MatrixXd>& values) {
  const Mesh& mesh = space.mesh();
  const int d = mesh.dim();
  const int nq = static_cast<int>(bary.rows());
  const int ncomp = (op == DiffOp::Id && space.family() != Family::RWG) ? 1
                    : (op == DiffOp::Div)                               ? 1
                                                                        : 3;
  const int nloc = space.dofs_per_element();
  values.assign(ncomp, Eigen::MatrixXd::Zero(nq, nloc));

  Vec3 normal = Vec3::Zero();
  if (op == DiffOp::Nx || op == DiffOp::Ntimes) {
    Vec3 a = mesh.vertices.row(mesh.elements(e, 0)),
         b = mesh.vertices.row(mesh.elements(e, 1)),
         c = mesh.vertices.row(mesh.elements(e, 2));
    normal = (b - a).cross(c - a).normalized();
  }

  switch (space.family()) {
    case Family::P0:
      if (op == DiffOp::Id)
        values[0].setOnes();
      else if (op == DiffOp::Ntimes)
        for (int c = 0; c < 3; ++c) values[c].setConstant(normal[c]);
      else
        throw std::invalid_argument("operator '" + op_name(op) + "' undefined for P0");
      break;

    case Family::P1: {
      if (op == DiffOp::Id) {
        for (int l = 0; l <= d; ++l) values[0].col(l) = bary.col(l);
      } else if (op == DiffOp::Grad) {
        auto g = space.barycentric_gradients(e);
        for (int l = 0; l <= d; ++l)
          for (int c = 0; c < 3; ++c) values[c].col(l).setConstant(g(l, c));
      } else if (op == DiffOp::Ntimes) {
        for (int l = 0; l <= d; ++l)
          for (int c = 0; c < 3; ++c) values[c].col(l) = normal[c] * bary.col(l);
      } else {
        throw std::invalid_argument("operator '" + op_name(op) + "' undefined for P1");
      }
      break;
    }

    case Family::P2: {
      const auto& ledges = local_edges(d);
      auto value_of = [&](int q, int l) {
        if (l <= d) {
          const double lam = bary(q, l);
          return lam * (2.0 * lam - 1.0);
        }
        const auto& le = ledges[l - d - 1];
        return 4.0 * bary(q, le[0]) * bary(q, le[1]);
      };
      if (op == DiffOp::Id) {
        for (int q = 0; q < nq; ++q)
          for (int l = 0; l < nloc; ++l) values[0](q, l) = value_of(q, l);
      } else if (op == DiffOp::Grad) {
        auto g = space.barycentric_gradients(e);
        for (int q = 0; q < nq; ++q)
          for (int l = 0; l < nloc; ++l) {
            Vec3 gv;
            if (l <= d)
              gv = (4.0 * bary(q, l) - 1.0) * Vec3(g.row(l));
            else {
              const auto& le = ledges[l - d - 1];
              gv = 4.0 * (bary(q, le[0]) * Vec3(g.row(le[1])) +
                          bary(q, le[1]) * Vec3(g.row(le[0])));
            }
            for (int c = 0; c < 3; ++c) values[c](q, l) = gv[c];
          }
      } else if (op == DiffOp::Ntimes) {
        for (int q = 0; q < nq; ++q)
          for (int l = 0; l < nloc; ++l)
            for (int c = 0; c < 3; ++c) values[c](q, l) = normal[c] * value_of(q, l);
      } else {
        throw std::invalid_argument("operator '" + op_name(op) + "' undefined for P2");
      }
      break;
    }

    case Family::RWG: {
      auto locals = space.rwg_locals(e);
      const double area = mesh.element_measure(e);
      Vec3 a = mesh.vertices.row(mesh.elements(e, 0)),
           b = mesh.vertices.row(mesh.elements(e, 1)),
           c = mesh.vertices.row(mesh.elements(e, 2));
      Vec3 n = (b - a).cross(c - a).normalized();
      Vec3 verts[3] = {a, b, c};
      for (int q = 0; q < nq; ++q) {
        Vec3 x = bary(q, 0) * a + bary(q, 1) * b + bary(q, 2) * c;
        for (size_t l = 0; l < locals.size(); ++l) {
          const auto& r = locals[l];
          const double coef = r.sign * r.edge_len / (2.0 * area);
          if (op == DiffOp::Div) {
            values[0](q, l) = 2.0 * coef;  // sign * l_e / area
          } else {
            Vec3 v = coef * (x - verts[r.opp_local]);
            if (op == DiffOp::Nx) v = n.cross(v);
            else if (op != DiffOp::Id)
              throw std::invalid_argument("operator '" + op_name(op) +
                                          "' undefined for RWG");
            for (int cc = 0; cc < 3; ++cc) values[cc](q, l) = v[cc];
          }
        }
      }
      break;
    }
  }
}

EvalMatrix eval_same_mesh(const FemSpace& space, const Domain& dom, DiffOp op) {
  const Mesh& mesh = space.mesh();
  const ReferenceRule& rule = reference_rule(mesh.dim(), dom.gauss_count);
  const int g = static_cast<int>(rule.weights.size());
  const Eigen::Index ne = mesh.element_count();
  const Eigen::Index rows = ne * g;

  const int ncomp = (op == DiffOp::Id && space.family() != Family::RWG) ? 1
                    : (op == DiffOp::Div)                               ? 1
                                                                        : 3;
  std::vector<std::vector<Eigen::Triplet<double>>> trip(ncomp);

  std::vector<Eigen::MatrixXd> values;
  for (Eigen::Index e = 0; e < ne; ++e) {
    element_basis(space, e, rule.barycentric, op, values);
    auto dofs = space.element_dofs(e);
    for (size_t l = 0; l < dofs.size(); ++l) {
      const int j = space.free_index(dofs[l]);
      if (j < 0) continue;
      for (int c = 0; c < ncomp; ++c)
        for (int q = 0; q < g; ++q) {
          const double v = values[c](q, l);
          if (v != 0.0) trip[c].emplace_back(e * g + q, j, v);
        }
    }
  }

  EvalMatrix out;
  out.comps.resize(ncomp);
  for (int c = 0; c < ncomp; ++c) {
    out.comps[c].resize(rows, space.free_count());
    out.comps[c].setFromTriplets(trip[c].begin(), trip[c].end());
  }
  return out;
}

}  // namespace

EvalMatrix eval_matrix(const FemSpace& space, const Domain& dom, DiffOp op) {
  check_op(space, op);
  if (same_mesh(space.mesh(), dom.mesh)) return eval_same_mesh(space, dom, op);

  // Trace path: evaluate on a boundary (or sub-) mesh of the space's mesh
  // by building the same family there and matching dof locations.
  if (op != DiffOp::Id)
    throw std::invalid_argument(
        "eval_matrix: only the identity operator is supported on trace domains");
  if (space.family() != Family::P1 && space.family() != Family::P2)
    throw std::invalid_argument(
        "eval_matrix: trace evaluation requires a P1 or P2 space");
  if (dom.mesh.dim() >= space.mesh().dim())
    throw std::invalid_argument(
        "eval_matrix: domain mesh does not match the space's mesh");

  FemSpace tspace(dom.mesh, space.family());
  EvalMatrix tmat = eval_same_mesh(tspace, dom, DiffOp::Id);

  const double tol = std::max(1e-300, 1e-12 * space.mesh().bounding_box_diagonal());
  PointMatcher matcher(space.dof_locations(), tol);
  MatX3 tloc = tspace.dof_locations();

  std::vector<Eigen::Triplet<double>> trip;
  for (int j = 0; j < tspace.dof_count(); ++j) {
    const int parent = matcher.find(tloc.row(j));
    if (parent < 0)
      throw std::invalid_argument(
          "eval_matrix: trace dof has no geometric match in the parent space");
    const int col = space.free_index(parent);
    if (col >= 0) trip.emplace_back(j, col, 1.0);
  }
  SpMat map(tspace.dof_count(), space.free_count());
  map.setFromTriplets(trip.begin(), trip.end());

  EvalMatrix out;
  out.comps.reserve(tmat.comps.size());
  for (auto& m : tmat.comps) out.comps.push_back(SpMat(m * map));
  return out;
}

EvalMatrix eval_matrix(const FemSpace& space, const Domain& dom) {
  return eval_matrix(space, dom, space.op());
}

std::vector<Eigen::MatrixXd> element_basis_values(const FemSpace& space,
                                                  Eigen::Index e,
                                                  const Eigen::MatrixXd& bary,
                                                  DiffOp op) {
  check_op(space, op);
  std::vector<Eigen::MatrixXd> values;
  element_basis(space, e, bary, op, values);
  const auto ndofs = space.element_dofs(e).size();
  for (auto& v : values)
    if (v.cols() != static_cast<Eigen::Index>(ndofs))
      v = Eigen::MatrixXd(v.leftCols(ndofs));
  return values;
}

SpMat elimination_map(const FemSpace& space) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < space.dof_count(); ++i)
    if (space.free_index(i) >= 0) trip.emplace_back(i, space.free_index(i), 1.0);
  SpMat p(space.dof_count(), space.free_count());
  p.setFromTriplets(trip.begin(), trip.end());
  return p;
}

namespace {

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> interpolate_impl(
    const FemSpace& space, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& coeffs,
    const MatX3& points) {
  if (!space.scalar_family())
    throw std::invalid_argument("interpolate: scalar families only");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> full;
  if (coeffs.size() == space.dof_count()) {
    full = coeffs;
  } else if (coeffs.size() == space.free_count()) {
    full.setZero(space.dof_count());
    for (int i = 0; i < space.dof_count(); ++i)
      if (space.free_index(i) >= 0) full(i) = coeffs(space.free_index(i));
  } else {
    throw std::invalid_argument("interpolate: coefficient vector length mismatch");
  }

  const Mesh& mesh = space.mesh();
  const int d = mesh.dim();
  const double scale = mesh.bounding_box_diagonal();
  const double slack = 1e-9 * scale;

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(points.rows());
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    const Vec3 x = points.row(p);
    double best_violation = std::numeric_limits<double>::infinity();
    Eigen::Index best_e = -1;
    Eigen::VectorXd best_bary;
    for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
      // Cheap reject on the enclosing sphere.
      if ((mesh.element_centroid(e) - x).norm() >
          mesh.element_radius(e) + slack + 1e-12 * scale)
        continue;
      Vec3 v0 = mesh.vertices.row(mesh.elements(e, 0));
      Eigen::Matrix<double, 3, Eigen::Dynamic> E(3, d);
      for (int c = 1; c <= d; ++c)
        E.col(c - 1) = Vec3(mesh.vertices.row(mesh.elements(e, c))) - v0;
      Eigen::VectorXd lam =
          (E.transpose() * E).ldlt().solve(E.transpose() * (x - v0));
      Vec3 residual = (x - v0) - E * lam;  // off-plane part for d < 3
      Eigen::VectorXd bary(d + 1);
      bary(0) = 1.0 - lam.sum();
      bary.tail(d) = lam;
      double violation = residual.norm();
      for (int c = 0; c <= d; ++c) violation = std::max(violation, -bary(c) * scale);
      if (violation < best_violation) {
        best_violation = violation;
        best_e = e;
        best_bary = bary;
      }
    }
    if (best_e < 0 || best_violation > 1e-8 * scale)
      throw std::invalid_argument("interpolate: point " + std::to_string(p) +
                                  " lies outside the mesh");
    std::vector<Eigen::MatrixXd> values;
    Eigen::MatrixXd bary_row = best_bary.transpose();
    element_basis(space, best_e, bary_row, DiffOp::Id, values);
    auto dofs = space.element_dofs(best_e);
    Scalar acc{};
    for (size_t l = 0; l < dofs.size(); ++l) acc += values[0](0, l) * full(dofs[l]);
    out(p) = acc;
  }
  return out;
}

}  // namespace

Eigen::VectorXd interpolate(const FemSpace& space, const Eigen::VectorXd& coeffs,
                            const MatX3& points) {
  return interpolate_impl<double>(space, coeffs, points);
}

Eigen::VectorXcd interpolate(const FemSpace& space, const Eigen::VectorXcd& coeffs,
                             const MatX3& points) {
  return interpolate_impl<cplx>(space, coeffs, points);
}

}  // namespace galerk
