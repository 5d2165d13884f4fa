// P1 finite elements for the heat equation on the reference domain: variable
// coefficient assembly, theta-scheme time stepping with Dirichlet lifting,
// the pulled-back perturbed problem, flux recovery and discrete norms.
#pragma once

#include "shapeuq/common.hpp"
#include "shapeuq/kinematics.hpp"
#include "shapeuq/mesh.hpp"

#include <Eigen/SparseCore>

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace shapeuq {

using SparseMatrix = Eigen::SparseMatrix<double>;
using VectorXd = Eigen::VectorXd;
using VectorFunction = std::function<Vec(const Vec&)>;

struct TimeGrid {
  double T = 1.0;
  int N = 1;

  TimeGrid() = default;
  TimeGrid(double final_time, int steps);
  double dt() const { return T / N; }
  double t(int j) const { return T * j / N; }
};

/// Nodal P1 space with per-cell basis gradients and a degree-2 quadrature
/// rule (3 points on triangles, 4 on tetrahedra).
class FeSpace {
 public:
  using GradientMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 3>;

  explicit FeSpace(std::shared_ptr<const Mesh> mesh);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  int dim() const { return mesh_->dim(); }
  std::size_t num_dofs() const { return mesh_->num_vertices(); }
  std::size_t num_cells() const { return mesh_->num_cells(); }

  /// Rows are the constant gradients of the local basis functions.
  const GradientMatrix& basis_gradients(std::size_t c) const { return grads_[c]; }
  int quad_per_cell() const { return static_cast<int>(quad_bary_.size()); }
  const std::array<double, 4>& quad_bary(int q) const { return quad_bary_[q]; }
  double quad_weight(std::size_t c, int q) const { return mesh_->cell_measure(c) * quad_w_[q]; }
  Vec quad_point(std::size_t c, int q) const;
  std::size_t num_quad_points() const { return num_cells() * quad_per_cell(); }

  const std::vector<int>& interior_dofs() const { return interior_; }
  const std::vector<int>& boundary_dofs() const { return mesh_->boundary_vertices(); }

  VectorXd interpolate(const SpatialFunction& fn) const;
  /// Values of fn at all quadrature points, indexed c * quad_per_cell() + q.
  std::vector<double> sample_quadrature(const SpatialFunction& fn) const;

  Vec cell_gradient(std::size_t c, const VectorXd& u) const;
  double cell_value(std::size_t c, const std::array<double, 4>& bary, const VectorXd& u) const;
  /// Point evaluation; throws DomainError more than one element outside.
  double evaluate(const VectorXd& u, const Vec& x) const;
  Vec evaluate_gradient(const VectorXd& u, const Vec& x) const;
  const PointLocator& locator() const { return locator_; }

 private:
  std::shared_ptr<const Mesh> mesh_;
  std::vector<GradientMatrix> grads_;
  std::vector<std::array<double, 4>> quad_bary_;
  std::vector<double> quad_w_;
  std::vector<int> interior_;
  PointLocator locator_;
};

/// Mass matrix with optional density at quadrature points.
SparseMatrix assemble_mass(const FeSpace& space, const std::vector<double>* density = nullptr);
/// Stiffness matrix with optional diffusion matrices at quadrature points.
SparseMatrix assemble_stiffness(const FeSpace& space, const std::vector<Mat>* coefficient = nullptr);
/// (q, phi_i) for q given at quadrature points.
VectorXd assemble_load(const FeSpace& space, const std::vector<double>& values);
/// (q, grad phi_i) for a vector field q given at quadrature points.
VectorXd assemble_gradient_load(const FeSpace& space, const std::vector<Vec>& values);
/// Boundary mass matrix over the boundary facets (full dof numbering).
SparseMatrix assemble_boundary_mass(const FeSpace& space);
/// Cell-restricted mass and stiffness (used for norms on a subdomain).
SparseMatrix assemble_mass_on(const FeSpace& space, const std::vector<char>& cell_mask);
SparseMatrix assemble_stiffness_on(const FeSpace& space, const std::vector<char>& cell_mask);

struct SourceData {
  SpaceTimeFunction f;
  SpatialFunction g;
  /// Dirichlet trace; empty means homogeneous.
  SpaceTimeFunction dirichlet;
  /// Optional analytic gradient of g (finite differences otherwise).
  VectorFunction grad_g;
  std::string name;

  static SourceData zero();
};

/// Nodal P1 coefficients at every time node.
struct SpaceTimeField {
  std::shared_ptr<const Mesh> mesh;
  TimeGrid grid;
  std::vector<VectorXd> snapshots;

  static SpaceTimeField zeros(std::shared_ptr<const Mesh> mesh, const TimeGrid& grid);
  std::size_t num_nodes() const { return snapshots.size(); }
  /// Linear interpolation in time.
  VectorXd at_time(double t) const;
};

SpaceTimeField operator-(const SpaceTimeField& a, const SpaceTimeField& b);
SpaceTimeField operator+(const SpaceTimeField& a, const SpaceTimeField& b);
SpaceTimeField operator*(double s, const SpaceTimeField& a);

enum class TimeScheme { crank_nicolson, implicit_euler };
double theta_of(TimeScheme scheme);

struct SolverOptions {
  TimeScheme scheme = TimeScheme::crank_nicolson;
  /// Smallest admissible Jacobian determinant at quadrature points.
  double gamma_floor = 1e-3;
};

/// Marches M (u_{j+1} - u_j)/dt + K (theta u_{j+1} + (1 - theta) u_j) = b_j
/// with prescribed values on the boundary dofs at every time node.
class ThetaStepper {
 public:
  using IntervalLoad = std::function<VectorXd(int j)>;
  using BoundaryValues = std::function<VectorXd(int j)>;

  ThetaStepper(const FeSpace& space, const TimeGrid& grid, const SparseMatrix& mass,
               const SparseMatrix& stiffness, TimeScheme scheme);
  ~ThetaStepper();
  ThetaStepper(ThetaStepper&&) noexcept;

  double theta() const { return theta_; }
  /// `boundary(j)` returns a full-length vector of which only the boundary
  /// entries are read; an empty callable means zero boundary values. The
  /// boundary entries of `initial` are overwritten by boundary(0).
  SpaceTimeField march(VectorXd initial, const IntervalLoad& load,
                       const BoundaryValues& boundary = {}) const;

 private:
  struct Impl;
  const FeSpace* space_;
  TimeGrid grid_;
  double theta_;
  std::unique_ptr<Impl> impl_;
};

/// Theta-weighted interval loads (phi_i, f(t)) from a source on the space.
ThetaStepper::IntervalLoad source_interval_load(const FeSpace& space, const TimeGrid& grid,
                                                const SpaceTimeFunction& f, TimeScheme scheme,
                                                const std::vector<double>* weight = nullptr,
                                                const std::function<Vec(const Vec&)>& map = {});

SpaceTimeField solve_heat_dirichlet(const FeSpace& space, const TimeGrid& grid,
                                    const SourceData& data, const SolverOptions& options = {});

/// Reference-domain solve with mass density gamma(eps), diffusion A(eps),
/// source (f o T) gamma and initial value g o T: returns u^eps o T^eps.
SpaceTimeField solve_pulled_back(const FeSpace& space, const TimeGrid& grid, const SourceData& data,
                                 const PerturbationMap& map, const SolverOptions& options = {});

enum class FluxMethod { element_average, variational };

struct FluxOptions {
  FluxMethod method = FluxMethod::element_average;
  /// Outward normal used at boundary vertices; mesh vertex normals if empty.
  VectorFunction normal;
  /// Source of the solved problem (variational recovery only).
  SpaceTimeFunction source;
  TimeScheme scheme = TimeScheme::crank_nicolson;
};

/// Outward normal derivative at the boundary vertices for every time node.
struct BoundaryFlux {
  std::vector<int> vertices;
  std::vector<Vec> normals;
  TimeGrid grid;
  std::vector<VectorXd> values;  // values[j](k) at vertex k, time node j
};

BoundaryFlux boundary_flux(const FeSpace& space, const SpaceTimeField& field,
                           const FluxOptions& options = {});

/// Cached matrices for the discrete L2, H1 and H^{-1} norms.
class DiscreteNorms {
 public:
  explicit DiscreteNorms(const FeSpace& space);
  /// Norms restricted to the cells flagged in the mask (H^{-1} unavailable).
  DiscreteNorms(const FeSpace& space, const std::vector<char>& cell_mask);
  ~DiscreteNorms();
  DiscreteNorms(DiscreteNorms&&) noexcept;

  double l2(const VectorXd& v) const;
  double h1_semi(const VectorXd& v) const;
  double h1(const VectorXd& v) const;
  /// Dual norm against H^1_0 test functions via the discrete Riesz representer.
  double hminus1(const VectorXd& v) const;
  /// Dual norm of a load vector b (b_i = <F, phi_i>) against H^1_0.
  double dual_of_load(const VectorXd& b) const;

  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& stiffness() const { return stiffness_; }

 private:
  struct Impl;
  const FeSpace* space_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;
  std::unique_ptr<Impl> impl_;
};

enum class NormKind { L2L2, L2H1, CL2, L2Hminus1 };

/// Time integrals by the trapezoid rule over the snapshots.
double compute_norm(const FeSpace& space, const SpaceTimeField& field, NormKind kind);
double compute_norm(const DiscreteNorms& norms, const SpaceTimeField& field, NormKind kind);
/// Same norms of the difference quotients (u_j - u_{j-1})/dt, one per interval.
double time_derivative_norm(const DiscreteNorms& norms, const SpaceTimeField& field, NormKind kind);

/// Smallest generalized eigenvalue of (K_II, M_II).
double smallest_dirichlet_eigenvalue(const FeSpace& space);
/// C with ||v||_{H1} <= C |v|_{H1} for zero-trace discrete v.
double poincare_constant(const FeSpace& space);

/// x -> field(t, x) through mesh interpolation, linear in time.
SpaceTimeFunction as_function(std::shared_ptr<const FeSpace> space, const SpaceTimeField& field);
/// Nodal values of v o T (v interpolated on the mesh).
VectorXd pullback_nodal(const FeSpace& space, const VectorXd& v, const PerturbationMap& map);

/// CSV rows "time,node,value".
void write_field_csv(std::ostream& os, const SpaceTimeField& field);
/// CSV rows "x,y,value" on an n x n grid over the mesh bounding box; points
/// outside the mesh are skipped.
void write_grid_sampling_csv(std::ostream& os, const FeSpace& space, const VectorXd& snapshot, int n);
/// Legacy VTK unstructured grid with one point-data array.
void write_vtk(std::ostream& os, const Mesh& mesh, const VectorXd& values, const std::string& name);

}  // namespace shapeuq
