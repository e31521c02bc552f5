#pragma once

#include <functional>
#include <string>
#include <vector>

#include "galerk/types.hpp"

namespace galerk {

/// Two-point Green kernel with vectorized evaluation. Built-in names:
///   "[exp(ikr)/r]"            e^{ikr}/r
///   "[1/r]"                   1/r
///   "grady[exp(ikr)/r]"       grad_y e^{ikr}/r, 3 components
///   "grady[exp(ikr)/r]j"      component j in {1,2,3}
///   "grady[1/r]", "grady[1/r]j"  k = 0 variants
/// The 1/(4*pi) normalization is NOT included; callers apply it.
class Kernel {
 public:
  using EvalFn = std::function<void(const MatX3& X, const MatX3& Y,
                                    std::vector<Eigen::MatrixXcd>& out)>;

  static Kernel green(const std::string& name, double wavenumber);
  /// User-supplied kernel (1 or 3 components); assumed nonsingular.
  static Kernel custom(int components, EvalFn fn, const std::string& name = "custom");

  int components() const { return components_; }
  double wavenumber() const { return wavenumber_; }
  const std::string& name() const { return name_; }

  /// Name of the leading singular part ("[1/r]", "grady[1/r]"), empty for
  /// custom kernels.
  std::string singular_name() const;

  /// All components at all point pairs. Pairs closer than eps_r are zeroed
  /// when mask_singular is set, otherwise they raise.
  void evaluate_blocks(const MatX3& X, const MatX3& Y,
                       std::vector<Eigen::MatrixXcd>& out, double eps_r,
                       bool mask_singular) const;

  /// Single-matrix evaluation (scalar or single-component kernels).
  /// Coincident pairs (within 1e-12 x scene diameter) raise.
  Eigen::MatrixXcd evaluate(const MatX3& X, const MatX3& Y) const;

 private:
  enum class Builtin { Helmholtz, GradYHelmholtz, Custom };
  Builtin kind_ = Builtin::Custom;
  int components_ = 1;
  int component_index_ = -1;  // fixed component of a grady kernel, or -1
  double wavenumber_ = 0.0;
  std::string name_;
  EvalFn fn_;
};

Kernel green_kernel(const std::string& name, double wavenumber);

/// Scene-diameter based guard radius used to flag singular pairs.
double singular_guard_radius(const MatX3& X, const MatX3& Y);

/// Closed-form Newton-potential integrals of a flat triangle T at an
/// arbitrary observation point x:
///   newton  = int_T 1/|x-y| dy
///   grad    = int_T grad_y 1/|x-y| dy  =  int_T (x-y)/|x-y|^3 dy
///   moment  = int_T (y-rho)/|x-y| dy   (rho = in-plane projection of x)
/// For x in the triangle's plane, grad is the principal value.
struct TriangleNewton {
  double newton = 0.0;
  Vec3 grad = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
  Vec3 rho = Vec3::Zero();
  double height = 0.0;  // signed distance of x above the plane
};

TriangleNewton analytic_triangle_integrals(const Vec3& a, const Vec3& b,
                                           const Vec3& c, const Vec3& x);

}  // namespace galerk
