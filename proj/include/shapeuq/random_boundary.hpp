// Reference boundaries, centered random amplitude models kappa on them, and
// the normal velocity fields V = kappa n0 extended into a collar.
#pragma once

#include "shapeuq/common.hpp"
#include "shapeuq/kinematics.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace shapeuq {

/// Nodes, outward normals and weights on the boundary; curvature is the
/// boundary divergence of the normal when the geometry provides it.
struct BoundaryQuadrature {
  std::vector<Vec> params;
  std::vector<Vec> points;
  std::vector<Vec> normals;
  std::vector<double> weights;
  std::optional<std::vector<double>> curvature;
};

/// Closest-point data for a point near the boundary.
struct BoundaryFrame {
  Vec param;
  double signed_distance = 0.0;  // positive outside
  Vec normal;
  Mat param_gradient;   // (param_dim x dim): d param / d x
  Mat normal_gradient;  // (dim x dim): d n / d x of the extended normal
};

class ReferenceBoundary {
 public:
  virtual ~ReferenceBoundary() = default;

  virtual int dim() const = 0;
  int param_dim() const { return dim() - 1; }
  virtual Vec point(const Vec& param) const = 0;
  virtual Vec normal(const Vec& param) const = 0;
  /// Columns are d point / d param_i.
  virtual Mat tangents(const Vec& param) const = 0;
  virtual double curvature(const Vec& param) const = 0;
  virtual double measure() const = 0;
  virtual double inradius() const = 0;
  virtual double circumradius() const = 0;
  virtual Vec center() const = 0;
  virtual BoundaryFrame project(const Vec& x) const = 0;
  virtual BoundaryQuadrature quadrature(int n) const = 0;
};

/// Circle of radius R; parameter theta in [0, 2 pi).
class Circle final : public ReferenceBoundary {
 public:
  explicit Circle(double radius = 1.0, Vec center = Vec::Zero(2));

  int dim() const override { return 2; }
  Vec point(const Vec& param) const override;
  Vec normal(const Vec& param) const override;
  Mat tangents(const Vec& param) const override;
  double curvature(const Vec&) const override { return 1.0 / radius_; }
  double measure() const override;
  double inradius() const override { return radius_; }
  double circumradius() const override { return radius_; }
  Vec center() const override { return center_; }
  double radius() const { return radius_; }
  BoundaryFrame project(const Vec& x) const override;
  /// n equispaced nodes; exact for trigonometric polynomials of degree < n.
  BoundaryQuadrature quadrature(int n) const override;

 private:
  double radius_;
  Vec center_;
};

/// Sphere of radius R; parameters (azimuth theta, polar phi).
class Sphere final : public ReferenceBoundary {
 public:
  explicit Sphere(double radius = 1.0, Vec center = Vec::Zero(3));

  int dim() const override { return 3; }
  Vec point(const Vec& param) const override;
  Vec normal(const Vec& param) const override;
  Mat tangents(const Vec& param) const override;
  double curvature(const Vec&) const override { return 2.0 / radius_; }
  double measure() const override;
  double inradius() const override { return radius_; }
  double circumradius() const override { return radius_; }
  Vec center() const override { return center_; }
  BoundaryFrame project(const Vec& x) const override;
  /// Gauss-Legendre in cos(phi) with n nodes times 2n azimuthal nodes.
  BoundaryQuadrature quadrature(int n) const override;

 private:
  double radius_;
  Vec center_;
};

/// Scalar function on the boundary, expressed in the boundary parameter.
class BoundaryFunction {
 public:
  virtual ~BoundaryFunction() = default;
  virtual double value(const Vec& param) const = 0;
  /// Derivatives with respect to the parameter; empty when unavailable.
  virtual std::optional<Vec> param_gradient(const Vec& param) const = 0;
  /// Upper bounds for |value| and for every |d value / d param_i|.
  virtual double sup_bound() const = 0;
  virtual double gradient_sup_bound() const = 0;
};

/// Real Fourier mode on a curve (cos k theta, sin k theta, constant) or a
/// separable sphere mode sin^m(phi) {cos, sin}(m theta) cos^l(phi).
struct BoundaryMode {
  enum class Kind { constant, cosine, sine };
  Kind kind = Kind::constant;
  int frequency = 0;  // k on curves, m on spheres
  int polar_power = 0;  // l on spheres; unused on curves
  int dim = 2;

  double value(const Vec& param) const;
  Vec param_gradient(const Vec& param) const;
  double sup_norm() const { return 1.0; }
  double gradient_sup_bound() const;
  std::string label() const;
};

/// Centered, bounded coefficient law.
struct CoefficientLaw {
  enum class Kind { uniform, truncated_gaussian };
  Kind kind = Kind::uniform;
  double scale = 0.0;  // half-width for uniform, sigma for the Gaussian

  double variance() const;
  double bound() const;
};

struct KappaMode {
  BoundaryMode basis;
  CoefficientLaw law;
};

/// Truncated random series kappa = sum_m c_m phi_m with independent centered c_m.
class KappaModel {
 public:
  KappaModel(int dim, std::vector<KappaMode> modes, std::optional<double> amplitude_cap = {});

  int dim() const { return dim_; }
  const std::vector<KappaMode>& modes() const { return modes_; }
  std::size_t truncation() const { return modes_.size(); }
  double amplitude_cap() const { return cap_; }

 private:
  int dim_;
  std::vector<KappaMode> modes_;
  double cap_;
};

/// Realization of a KappaModel (or any fixed coefficient vector).
class KappaSample final : public BoundaryFunction {
 public:
  KappaSample(std::shared_ptr<const KappaModel> model, std::vector<double> coefficients,
              std::uint64_t seed);

  double value(const Vec& param) const override;
  std::optional<Vec> param_gradient(const Vec& param) const override;
  double sup_bound() const override;
  double gradient_sup_bound() const override;

  const std::vector<double>& coefficients() const { return coefficients_; }
  std::uint64_t seed() const { return seed_; }
  const KappaModel& model() const { return *model_; }

 private:
  std::shared_ptr<const KappaModel> model_;
  std::vector<double> coefficients_;
  std::uint64_t seed_;
};

/// Deterministic boundary function from callables (no derivative unless given).
class AnalyticBoundaryFunction final : public BoundaryFunction {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradientFn = std::function<Vec(const Vec&)>;
  AnalyticBoundaryFunction(ValueFn value, GradientFn gradient, double sup, double grad_sup);

  double value(const Vec& param) const override { return value_(param); }
  std::optional<Vec> param_gradient(const Vec& param) const override;
  double sup_bound() const override { return sup_; }
  double gradient_sup_bound() const override { return grad_sup_; }

 private:
  ValueFn value_;
  GradientFn gradient_;
  double sup_;
  double grad_sup_;
};

/// Independent draws per mode from a stream keyed by (seed, mode index).
KappaSample sample(std::shared_ptr<const KappaModel> model, std::uint64_t seed);

/// Cov[kappa](p, q) = sum_m sigma_m^2 phi_m(p) phi_m(q).
double covariance(const KappaModel& model, const Vec& param_x, const Vec& param_y);

struct CollarOptions {
  /// Collar half-width as a fraction of the boundary inradius.
  double width_fraction = 0.2;
};

/// V(x) = kappa(p(x)) n(x) chi(|dist(x)|), chi = 1 for |dist| <= w, 0 beyond 2w.
VelocityField velocity_from_kappa(std::shared_ptr<const ReferenceBoundary> boundary,
                                  std::shared_ptr<const BoundaryFunction> kappa,
                                  const Box& domain, const CollarOptions& options = {});

using BoundaryVectorField = std::function<Vec(const Vec& param)>;

/// Surface gradient of kappa; central differences in the parameter with the
/// given step when kappa has no analytic derivative.
BoundaryVectorField tangential_gradient(std::shared_ptr<const ReferenceBoundary> boundary,
                                        std::shared_ptr<const BoundaryFunction> kappa,
                                        double fd_step = 1e-4);

/// Forces the parametric finite-difference route.
BoundaryVectorField tangential_gradient_fd(std::shared_ptr<const ReferenceBoundary> boundary,
                                           std::shared_ptr<const BoundaryFunction> kappa,
                                           double fd_step);

/// CSV rows "theta,kappa" (curves) or "theta,phi,kappa" (spheres) on the
/// quadrature nodes of order n.
void write_kappa_csv(std::ostream& os, const ReferenceBoundary& boundary,
                     const BoundaryFunction& kappa, int n);

}  // namespace shapeuq
