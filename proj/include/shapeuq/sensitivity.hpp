// Material derivative z and shape derivative u' of the Dirichlet heat
// problem with respect to a velocity field, plus the derivative formulas for
// domain and boundary functionals.
#pragma once

#include "shapeuq/fem.hpp"
#include "shapeuq/kinematics.hpp"
#include "shapeuq/random_boundary.hpp"

#include <iosfwd>
#include <memory>
#include <vector>

namespace shapeuq {

class SensitivityProblem {
 public:
  /// Solves u0 on the given space and grid.
  SensitivityProblem(std::shared_ptr<const FeSpace> space, const TimeGrid& grid, SourceData data,
                     VelocityField velocity, const SolverOptions& options = {});
  /// Reuses a reference solution computed on the same space and grid.
  SensitivityProblem(std::shared_ptr<const FeSpace> space, SpaceTimeField u0, SourceData data,
                     VelocityField velocity, const SolverOptions& options = {});

  /// Same reference solution and data with another velocity.
  SensitivityProblem with_velocity(VelocityField velocity) const;

  const FeSpace& space() const { return *space_; }
  std::shared_ptr<const FeSpace> space_ptr() const { return space_; }
  const TimeGrid& grid() const { return u0_.grid; }
  const SpaceTimeField& u0() const { return u0_; }
  const SourceData& data() const { return data_; }
  const VelocityField& velocity() const { return velocity_; }
  const SolverOptions& options() const { return options_; }

  /// Quadrature-point samples of V, div V and A'(0).
  const std::vector<Vec>& velocity_at_quadrature() const { return v_qp_; }
  const std::vector<double>& divergence_at_quadrature() const { return div_qp_; }
  const std::vector<Mat>& a_prime_at_quadrature() const { return a_prime_qp_; }

  /// Outward normal used on boundary vertices; mesh vertex normals if unset.
  VectorFunction boundary_normal;
  FluxMethod flux_method = FluxMethod::element_average;

 private:
  void derive();

  std::shared_ptr<const FeSpace> space_;
  SpaceTimeField u0_;
  SourceData data_;
  VelocityField velocity_;
  SolverOptions options_;
  std::vector<Vec> v_qp_;
  std::vector<double> div_qp_;
  std::vector<Mat> a_prime_qp_;
};

/// z_t - Lap z = -u0_t div V - div(A'(0) grad u0) + div(V f), z = 0 on the
/// boundary, z(0) = grad g . V; divergence terms enter in weak form.
SpaceTimeField material_derivative(const SensitivityProblem& p);

/// Boundary datum -d_n u0 (V . n) at the boundary vertices per time node.
std::vector<VectorXd> shape_boundary_datum(const SensitivityProblem& p);

/// u'_t - Lap u' = 0, u'(0) = 0, u' = -(d_n u0)(V . n) on the boundary.
SpaceTimeField shape_derivative(const SensitivityProblem& p);

/// z - P(grad u0 . V) with P the L2 projection onto P1.
SpaceTimeField shape_from_material(const SpaceTimeField& z, const SensitivityProblem& p);

enum class FunctionalKind { volume, surface };

/// d/deps of int_U v or int_Gamma v: int v' + int_Gamma v0 <V,n> (volume) or
/// int_Gamma v' + (d_n v0 + H v0) <V,n> (surface, H the boundary divergence
/// of n). Boundary integrals use the reference boundary quadrature.
double functional_derivative(const FeSpace& space, const VectorXd& v0, const VectorXd& vprime,
                             const VelocityField& velocity, const ReferenceBoundary& boundary,
                             FunctionalKind which, int quadrature_nodes = 256);

/// Shape and material derivative of the normal field: -grad_Gamma kappa.
BoundaryVectorField normal_derivative_field(std::shared_ptr<const ReferenceBoundary> boundary,
                                            std::shared_ptr<const BoundaryFunction> kappa);

/// CSV rows "time,probe,x,y,value".
void write_probe_series_csv(std::ostream& os, const FeSpace& space, const SpaceTimeField& field,
                            const std::vector<Vec>& probes);

}  // namespace shapeuq
