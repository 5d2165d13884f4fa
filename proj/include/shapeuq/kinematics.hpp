// Transport map x -> x + eps V(x) and the coefficients it induces when a
// weak form on the perturbed domain is pulled back to the reference domain.
#pragma once

#include "shapeuq/common.hpp"

#include <array>
#include <memory>
#include <string>

namespace shapeuq {

/// Compactly supported W^{1,inf} vector field with an analytic Jacobian.
///
/// The field lives on a bounding box `domain` (the hold-all region U+);
/// outside the ball (support_center, support_radius) it vanishes identically.
class VelocityField {
 public:
  using EvalFn = std::function<Vec(const Vec&)>;
  using JacobianFn = std::function<Mat(const Vec&)>;

  struct Properties {
    Box domain;
    Vec support_center;
    double support_radius = 0.0;
    double lipschitz_bound = 0.0;
    std::string name;
  };

  VelocityField(int dim, EvalFn eval, JacobianFn jac, Properties props);

  int dim() const { return dim_; }
  Vec eval(const Vec& x) const;
  /// jac(x)(k, l) = dV_k / dx_l.
  Mat jac(const Vec& x) const;
  double divergence(const Vec& x) const { return jac(x).trace(); }

  const Box& domain() const { return props_.domain; }
  const Vec& support_center() const { return props_.support_center; }
  double support_radius() const { return props_.support_radius; }
  double lipschitz_bound() const { return props_.lipschitz_bound; }
  const std::string& name() const { return props_.name; }
  /// Axis-aligned box enclosing the support ball, clipped to the domain.
  Box support_box() const;

  /// V = 0.
  static VelocityField zero(const Box& domain);
  /// V(x) = (M (x - c) + b) chi(|x - c|) with a C^1 radial cutoff chi.
  static VelocityField affine(const Mat& m, const Vec& b, const Vec& center, RadialCutoff cutoff,
                              const Box& domain);

  /// V(x) = s * V_original(x); used by linearity checks.
  VelocityField scaled(double s) const;

 private:
  int dim_;
  EvalFn eval_;
  JacobianFn jac_;
  Properties props_;
};

struct PerturbationMap {
  VelocityField velocity;
  double epsilon = 0.0;
};

/// Jacobian determinant and pulled-back diffusion matrix of the transport map.
struct TransportedCoefficients {
  double gamma = 1.0;
  /// gamma = 1 + eps g1 + eps^2 g2 + eps^3 g3 for admissible eps.
  std::array<double, 3> gamma_poly{0.0, 0.0, 0.0};
  Mat a_matrix;  // gamma J^{-1} J^{-T}
  Mat a_prime0;  // (div V) I - J_V - J_V^T
};

Vec apply(const PerturbationMap& map, const Vec& x);

/// Same quantities from a velocity Jacobian; throws NumericalError when the
/// transport Jacobian is (numerically) singular.
TransportedCoefficients transported_coefficients_from_jacobian(const Mat& velocity_jacobian,
                                                               double epsilon);
TransportedCoefficients transported_coefficients(const PerturbationMap& map, const Vec& x);

/// Reference route for A(eps, x): gamma and J^{-1} formed by LU of the full
/// transport Jacobian instead of the determinant expansion.
Mat diffusion_matrix_by_inversion(const Mat& velocity_jacobian, double epsilon);

struct AdmissibilityOptions {
  int lattice = 64;        // probes per axis over the support box
  int max_halvings = 40;   // grid {2^0, 2^-1, ..., 2^-max_halvings}
};

/// Largest eps = 2^-k with gamma(s, x) >= floor for all s in [0, eps] on the
/// probe lattice.
double epsilon_admissible(const VelocityField& velocity, double floor,
                          const AdmissibilityOptions& options = {});

/// (t, x) -> field(t, x + eps V(x)).
SpaceTimeFunction pullback(SpaceTimeFunction field, const PerturbationMap& map);
SpatialFunction pullback(SpatialFunction field, const PerturbationMap& map);

}  // namespace shapeuq
