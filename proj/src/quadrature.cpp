#include "galerk/quadrature.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace galerk {

namespace {

ReferenceRule segment_rule(int n) {
  // Gauss-Legendre on [-1,1], mapped to barycentric (1-t, t) on [0,1].
  static const std::map<int, std::pair<std::vector<double>, std::vector<double>>> gl = {
      {1, {{0.0}, {2.0}}},
      {2, {{-0.5773502691896257, 0.5773502691896257}, {1.0, 1.0}}},
      {3, {{-0.7745966692414834, 0.0, 0.7745966692414834},
           {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}}},
      {4, {{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
            0.8611363115940526},
           {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
            0.3478548451374538}}},
      {5, {{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
            0.9061798459386640},
           {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
            0.4786286704993665, 0.2369268850561891}}}};
  const auto& [x, w] = gl.at(n);
  ReferenceRule r;
  r.barycentric.resize(n, 2);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = 0.5 * (x[i] + 1.0);
    r.barycentric(i, 0) = 1.0 - t;
    r.barycentric(i, 1) = t;
    r.weights(i) = 0.5 * w[i];
  }
  return r;
}

ReferenceRule triangle_rule(int n) {
  ReferenceRule r;
  if (n == 1) {
    r.barycentric.resize(1, 3);
    r.barycentric << 1.0 / 3, 1.0 / 3, 1.0 / 3;
    r.weights.resize(1);
    r.weights << 1.0;
  } else if (n == 3) {
    // Edge-midpoint rule, degree 2.
    r.barycentric.resize(3, 3);
    r.barycentric << 0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5;
    r.weights = Eigen::VectorXd::Constant(3, 1.0 / 3);
  } else if (n == 7) {
    // Symmetric degree-5 rule.
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0, w1 = (155.0 - s15) / 1200.0;
    const double a2 = (6.0 + s15) / 21.0, w2 = (155.0 + s15) / 1200.0;
    r.barycentric.resize(7, 3);
    r.weights.resize(7);
    r.barycentric.row(0) << 1.0 / 3, 1.0 / 3, 1.0 / 3;
    r.weights(0) = 9.0 / 40.0;
    int k = 1;
    for (auto [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
      const double b = 1.0 - 2.0 * a;
      r.barycentric.row(k) << a, a, b;
      r.weights(k++) = w;
      r.barycentric.row(k) << a, b, a;
      r.weights(k++) = w;
      r.barycentric.row(k) << b, a, a;
      r.weights(k++) = w;
    }
  } else {
    throw std::logic_error("triangle_rule: bad count");
  }
  return r;
}

ReferenceRule tetra_rule(int n) {
  ReferenceRule r;
  if (n == 1) {
    r.barycentric = Eigen::MatrixXd::Constant(1, 4, 0.25);
    r.weights = Eigen::VectorXd::Constant(1, 1.0);
  } else if (n == 4) {
    // Symmetric degree-2 rule.
    const double a = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
    const double b = (5.0 - std::sqrt(5.0)) / 20.0;
    r.barycentric.resize(4, 4);
    r.weights = Eigen::VectorXd::Constant(4, 0.25);
    for (int i = 0; i < 4; ++i) {
      for (int c = 0; c < 4; ++c) r.barycentric(i, c) = b;
      r.barycentric(i, i) = a;
    }
  } else if (n == 15) {
    // Degree-5 rule (centroid + two 4-point orbits + one 6-point orbit).
    const double s15 = std::sqrt(15.0);
    r.barycentric.resize(15, 4);
    r.weights.resize(15);
    int k = 0;
    r.barycentric.row(k) << 0.25, 0.25, 0.25, 0.25;
    r.weights(k++) = 16.0 / 135.0;
    struct Orbit4 { double a, w; };
    for (auto [a, w] : {Orbit4{(7.0 + s15) / 34.0, (2665.0 - 14.0 * s15) / 37800.0},
                        Orbit4{(7.0 - s15) / 34.0, (2665.0 + 14.0 * s15) / 37800.0}}) {
      const double b = 1.0 - 3.0 * a;
      for (int i = 0; i < 4; ++i) {
        for (int c = 0; c < 4; ++c) r.barycentric(k, c) = a;
        r.barycentric(k, i) = b;
        r.weights(k++) = w;
      }
    }
    const double a = (10.0 - 2.0 * s15) / 40.0, b = 0.5 - a, w = 10.0 / 189.0;
    static const int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const auto& p : pairs) {
      for (int c = 0; c < 4; ++c) r.barycentric(k, c) = b;
      r.barycentric(k, p[0]) = a;
      r.barycentric(k, p[1]) = a;
      r.weights(k++) = w;
    }
  } else {
    throw std::logic_error("tetra_rule: bad count");
  }
  return r;
}

}  // namespace

const std::vector<int>& supported_rules(int dim) {
  static const std::vector<int> seg = {1, 2, 3, 4, 5};
  static const std::vector<int> tri = {1, 3, 7};
  static const std::vector<int> tet = {1, 4, 15};
  switch (dim) {
    case 1: return seg;
    case 2: return tri;
    case 3: return tet;
    default: throw std::invalid_argument("supported_rules: bad dimension");
  }
}

const ReferenceRule& reference_rule(int dim, int count) {
  static std::map<std::pair<int, int>, ReferenceRule> cache;
  auto key = std::make_pair(dim, count);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  ReferenceRule r;
  switch (dim) {
    case 1: r = segment_rule(count); break;
    case 2: r = triangle_rule(count); break;
    case 3: r = tetra_rule(count); break;
    default: throw std::invalid_argument("reference_rule: bad dimension");
  }
  return cache.emplace(key, std::move(r)).first->second;
}

Domain make_domain(const Mesh& mesh, int gauss_count) {
  if (mesh.empty()) throw std::invalid_argument("make_domain: empty mesh");
  const auto& ok = supported_rules(mesh.dim());
  if (std::find(ok.begin(), ok.end(), gauss_count) == ok.end()) {
    std::ostringstream msg;
    msg << "make_domain: no " << gauss_count
        << "-point rule for dimension " << mesh.dim() << " (supported: ";
    for (size_t i = 0; i < ok.size(); ++i) msg << (i ? "," : "") << ok[i];
    msg << ")";
    throw std::invalid_argument(msg.str());
  }
  return Domain{mesh, gauss_count};
}

QuadratureSet quadrature(const Domain& dom) {
  const Mesh& mesh = dom.mesh;
  const ReferenceRule& rule = reference_rule(mesh.dim(), dom.gauss_count);
  const int g = static_cast<int>(rule.weights.size());
  const Eigen::Index ne = mesh.element_count();

  QuadratureSet qs;
  qs.points.resize(ne * g, 3);
  qs.weights.resize(ne * g);
  qs.element_of.resize(ne * g);
  for (Eigen::Index e = 0; e < ne; ++e) {
    const double measure = mesh.element_measure(e);
    for (int q = 0; q < g; ++q) {
      Vec3 p = Vec3::Zero();
      for (Eigen::Index c = 0; c < mesh.elements.cols(); ++c)
        p += rule.barycentric(q, c) * Vec3(mesh.vertices.row(mesh.elements(e, c)));
      qs.points.row(e * g + q) = p.transpose();
      qs.weights(e * g + q) = rule.weights(q) * measure;
      qs.element_of(e * g + q) = static_cast<int>(e);
    }
  }
  return qs;
}

double integrate(const Domain& dom, const RealField& f) {
  QuadratureSet qs = quadrature(dom);
  Eigen::VectorXd vals = f(qs.points);
  if (vals.size() != qs.weights.size())
    throw std::invalid_argument("integrate: function output length mismatch");
  return qs.weights.dot(vals);
}

cplx integrate(const Domain& dom, const CplxField& f) {
  QuadratureSet qs = quadrature(dom);
  Eigen::VectorXcd vals = f(qs.points);
  if (vals.size() != qs.weights.size())
    throw std::invalid_argument("integrate: function output length mismatch");
  return (qs.weights.cast<cplx>().asDiagonal() * vals).sum();
}

}  // namespace galerk
