#include "galerk/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace galerk {

namespace {

constexpr cplx kImag{0.0, 1.0};

}  // namespace

double singular_guard_radius(const MatX3& X, const MatX3& Y) {
  if (X.rows() == 0 || Y.rows() == 0) return 0.0;
  Vec3 lo = X.colwise().minCoeff().cwiseMin(Y.colwise().minCoeff());
  Vec3 hi = X.colwise().maxCoeff().cwiseMax(Y.colwise().maxCoeff());
  return 1e-12 * (hi - lo).norm();
}

Kernel Kernel::green(const std::string& name, double wavenumber) {
  Kernel k;
  k.wavenumber_ = wavenumber;
  k.name_ = name;
  auto parse = [&](const std::string& base, bool grad) {
    if (name == base && !grad) {
      k.kind_ = Builtin::Helmholtz;
      k.components_ = 1;
      return true;
    }
    if (!grad) return false;
    const std::string g = "grady" + base;
    if (name == g) {
      k.kind_ = Builtin::GradYHelmholtz;
      k.components_ = 3;
      return true;
    }
    for (int j = 1; j <= 3; ++j)
      if (name == g + std::to_string(j)) {
        k.kind_ = Builtin::GradYHelmholtz;
        k.components_ = 1;
        k.component_index_ = j - 1;
        return true;
      }
    return false;
  };
  if (name == "[1/r]" || name == "grady[1/r]" || name == "grady[1/r]1" ||
      name == "grady[1/r]2" || name == "grady[1/r]3")
    k.wavenumber_ = 0.0;
  if (parse("[exp(ikr)/r]", false) || parse("[exp(ikr)/r]", true) ||
      parse("[1/r]", false) || parse("[1/r]", true))
    return k;
  throw std::invalid_argument("green_kernel: unknown kernel name '" + name + "'");
}

Kernel Kernel::custom(int components, EvalFn fn, const std::string& name) {
  if (components != 1 && components != 3)
    throw std::invalid_argument("Kernel::custom: components must be 1 or 3");
  Kernel k;
  k.kind_ = Builtin::Custom;
  k.components_ = components;
  k.fn_ = std::move(fn);
  k.name_ = name;
  return k;
}

std::string Kernel::singular_name() const {
  switch (kind_) {
    case Builtin::Helmholtz: return "[1/r]";
    case Builtin::GradYHelmholtz: return "grady[1/r]";
    case Builtin::Custom: return "";
  }
  return "";
}

void Kernel::evaluate_blocks(const MatX3& X, const MatX3& Y,
                             std::vector<Eigen::MatrixXcd>& out, double eps_r,
                             bool mask_singular) const {
  const Eigen::Index nx = X.rows(), ny = Y.rows();
  if (kind_ == Builtin::Custom) {
    fn_(X, Y, out);
    if (static_cast<int>(out.size()) != components_)
      throw std::runtime_error("custom kernel returned wrong component count");
    return;
  }

  out.assign(components_, Eigen::MatrixXcd(nx, ny));
  const double eps2 = eps_r * eps_r;
  const double k = wavenumber_;

  Eigen::ArrayXd dx(nx), dy(nx), dz(nx), r(nx), cosv(nx), sinv(nx);
  for (Eigen::Index j = 0; j < ny; ++j) {
    const double yx = Y(j, 0), yy = Y(j, 1), yz = Y(j, 2);
    dx = X.col(0).array() - yx;
    dy = X.col(1).array() - yy;
    dz = X.col(2).array() - yz;
    r = (dx * dx + dy * dy + dz * dz).sqrt();
    if (k != 0.0) {
      cosv = (k * r).cos();
      sinv = (k * r).sin();
    }
    for (Eigen::Index i = 0; i < nx; ++i) {
      const double ri = r(i);
      if (ri * ri <= eps2) {
        if (!mask_singular)
          throw std::runtime_error(
              "kernel evaluation at singular point pair (" + std::to_string(i) +
              "," + std::to_string(j) + "), r=" + std::to_string(ri));
        for (auto& m : out) m(i, j) = 0.0;
        continue;
      }
      const cplx eikr = (k != 0.0) ? cplx(cosv(i), sinv(i)) : cplx(1.0, 0.0);
      if (kind_ == Builtin::Helmholtz) {
        out[0](i, j) = eikr / ri;
      } else {
        // grad_y e^{ikr}/r = e^{ikr} (ikr - 1) (y - x) / r^3
        const cplx f = eikr * (kImag * (k * ri) - 1.0) / (ri * ri * ri);
        if (components_ == 3) {
          out[0](i, j) = -f * dx(i);
          out[1](i, j) = -f * dy(i);
          out[2](i, j) = -f * dz(i);
        } else {
          const double d = component_index_ == 0 ? -dx(i)
                           : component_index_ == 1 ? -dy(i)
                                                   : -dz(i);
          out[0](i, j) = f * d;
        }
      }
    }
  }
}

Eigen::MatrixXcd Kernel::evaluate(const MatX3& X, const MatX3& Y) const {
  if (components_ != 1)
    throw std::invalid_argument(
        "Kernel::evaluate: kernel has 3 components; use evaluate_blocks");
  std::vector<Eigen::MatrixXcd> out;
  evaluate_blocks(X, Y, out, singular_guard_radius(X, Y), /*mask=*/false);
  return out[0];
}

Kernel green_kernel(const std::string& name, double wavenumber) {
  return Kernel::green(name, wavenumber);
}

// ---------------------------------------------------------------------------
// Analytic Newton-potential integrals over a flat triangle (edge-wise
// log/arctan decomposition).
// ---------------------------------------------------------------------------

TriangleNewton analytic_triangle_integrals(const Vec3& a, const Vec3& b,
                                           const Vec3& c, const Vec3& x) {
  Vec3 cross = (b - a).cross(c - a);
  const double area2 = cross.norm();
  const double diam = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
  if (area2 <= 1e-14 * diam * diam)
    throw std::invalid_argument("analytic_triangle_integrals: degenerate triangle");
  const Vec3 n = cross / area2;

  TriangleNewton res;
  res.height = (x - a).dot(n);
  const double w0 = res.height, aw0 = std::abs(w0);
  res.rho = x - w0 * n;

  const Vec3 verts[3] = {a, b, c};
  double newton = 0.0, beta_total = 0.0;
  Vec3 grad_inplane = Vec3::Zero(), moment = Vec3::Zero();

  for (int i = 0; i < 3; ++i) {
    const Vec3 pm = verts[i];
    const Vec3 pp = verts[(i + 1) % 3];
    const double len = (pp - pm).norm();
    if (len <= 1e-300) continue;
    const Vec3 s_hat = (pp - pm) / len;
    const Vec3 m_hat = s_hat.cross(n);  // outward in-plane edge normal
    const double t = (pm - res.rho).dot(m_hat);
    const double sm = (pm - res.rho).dot(s_hat);
    const double sp = (pp - res.rho).dot(s_hat);
    const double rm = (x - pm).norm();
    const double rp = (x - pp).norm();
    const double r0sq = t * t + w0 * w0;

    // f = log((rp+sp)/(rm+sm)) in a cancellation-free form.
    double f = 0.0;
    if (r0sq > 1e-28 * len * len) {
      if (sm >= 0.0)
        f = std::log((rp + sp) / (rm + sm));
      else if (sp <= 0.0)
        f = std::log((rm - sm) / (rp - sp));
      else
        f = std::log((rp + sp) * (rm - sm) / r0sq);
    }
    const double beta =
        std::atan(t * sp / (r0sq + aw0 * rp)) - std::atan(t * sm / (r0sq + aw0 * rm));

    newton += t * f - aw0 * beta;
    beta_total += beta;
    grad_inplane += m_hat * f;
    moment += 0.5 * m_hat * (r0sq * f + sp * rp - sm * rm);
  }

  const double sgn = (w0 > 0.0) ? 1.0 : (w0 < 0.0 ? -1.0 : 0.0);
  res.newton = newton;
  res.grad = grad_inplane + n * (sgn * beta_total);
  res.moment = moment;
  return res;
}

}  // namespace galerk
