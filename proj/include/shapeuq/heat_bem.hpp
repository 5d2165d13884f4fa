// Space-time boundary elements for the heat equation in 2D: heat kernel and
// its time primitives, thermal layer potentials, the causal boundary
// operators V, K, N, W with piecewise-constant Galerkin blocks per time lag,
// and marching-on-in-time solvers.
#pragma once

#include "shapeuq/common.hpp"
#include "shapeuq/fem.hpp"
#include "shapeuq/mesh.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <vector>

namespace shapeuq {

using MatrixXd = Eigen::MatrixXd;

/// G(t, x) = (4 pi t)^{-d/2} exp(-|x|^2 / 4t) for t > 0, zero otherwise.
struct HeatKernel {
  int dim = 2;
};
double kernel_eval(const HeatKernel& kernel, double t, const Vec& x);

/// E1(x) for x > 0.
double exp_integral_e1(double x);

// Time primitives of the 2D kernels at squared distance r2, vanishing at
// tau <= 0: G1 = int_0^tau G, G2 = int_0^tau G1, and the same for the
// double-layer kernel without the geometric factor (x - y).n_y / (2 pi r^2).
double single_layer_primitive1(double tau, double r2);
double single_layer_primitive2(double tau, double r2);
/// G2 + (tau / 4 pi) log r^2, bounded as r -> 0.
double single_layer_primitive2_regular(double tau, double r2);
double double_layer_primitive1(double tau, double r2);
double double_layer_primitive2(double tau, double r2);

/// Closed polygon with counterclockwise vertices; element e joins vertex e
/// to vertex e + 1.
class BoundaryElementMesh {
 public:
  explicit BoundaryElementMesh(std::vector<Vec> vertices);
  static BoundaryElementMesh circle(double radius, int elements, const Vec& center = Vec::Zero(2));
  /// Boundary polygon of a 2D finite element mesh, in its vertex order.
  static BoundaryElementMesh from_mesh(const Mesh& mesh);

  std::size_t size() const { return vertices_.size(); }
  const std::vector<Vec>& vertices() const { return vertices_; }
  const Vec& start(std::size_t e) const { return vertices_[e]; }
  const Vec& end(std::size_t e) const { return vertices_[(e + 1) % vertices_.size()]; }
  Vec midpoint(std::size_t e) const { return 0.5 * (start(e) + end(e)); }
  const Vec& normal(std::size_t e) const { return normals_[e]; }
  double length(std::size_t e) const { return lengths_[e]; }
  double h() const { return h_; }
  double perimeter() const;
  /// Winding-number test.
  bool inside(const Vec& x) const;
  double distance(const Vec& x) const;

 private:
  std::vector<Vec> vertices_;
  std::vector<Vec> normals_;
  std::vector<double> lengths_;
  double h_ = 0.0;
};

/// Piecewise-constant coefficients, one column per time interval.
struct BoundaryDensity {
  TimeGrid grid;
  MatrixXd values;  // elements x intervals

  BoundaryDensity() = default;
  BoundaryDensity(std::size_t elements, const TimeGrid& grid);
  double& operator()(int interval, std::size_t element) { return values(element, interval); }
  double operator()(int interval, std::size_t element) const { return values(element, interval); }
  std::size_t elements() const { return static_cast<std::size_t>(values.rows()); }
  int intervals() const { return static_cast<int>(values.cols()); }
  /// Column-stacked vector: index = interval * elements + element.
  VectorXd stacked() const;
  static BoundaryDensity from_stacked(const VectorXd& v, std::size_t elements, const TimeGrid& grid);
};

enum class OperatorKind { V, K, N, W };

/// One Galerkin block per time lag: (A psi)_k = sum_{l <= k} blocks[k - l] psi_l.
struct CausalOperator {
  OperatorKind kind = OperatorKind::V;
  TimeGrid grid;
  std::vector<MatrixXd> blocks;

  std::size_t elements() const { return blocks.empty() ? 0 : static_cast<std::size_t>(blocks[0].rows()); }
  int lags() const { return static_cast<int>(blocks.size()); }
};

struct AssemblyOptions {
  int gauss_far = 6;
  int gauss_near = 12;
  int workers = 0;
};

/// Galerkin assembly for P0 x P0 in space and time. Time integrals are in
/// closed form; the lag-0 logarithmic singularity of V is integrated
/// semi-analytically. W is the hypersingular-free form 1/2 M - K.
CausalOperator assemble(const BoundaryElementMesh& mesh, const TimeGrid& grid, OperatorKind which,
                        const AssemblyOptions& options = {});

/// Galerkin moments (A psi, phi_{k,i}).
BoundaryDensity apply(const CausalOperator& op, const BoundaryDensity& psi);
/// Same on column-stacked densities (one column per right-hand side).
MatrixXd apply_stacked(const CausalOperator& op, const MatrixXd& x);

/// Diagonal P0 x P0 mass: |element| * dt.
VectorXd boundary_mass_diagonal(const BoundaryElementMesh& mesh, const TimeGrid& grid);

enum class EquationKind { first, second_plus, second_minus };

/// Marching-on-in-time for A x = b (first), (1/2 M + A) x = b or
/// (1/2 M - A) x = b; the lag-0 stepping matrix is factorized once.
class MarchingSolver {
 public:
  MarchingSolver(const CausalOperator& op, const BoundaryElementMesh& mesh, EquationKind kind);
  ~MarchingSolver();
  MarchingSolver(MarchingSolver&&) noexcept;

  /// Column-stacked right-hand sides; columns are independent and processed
  /// together.
  MatrixXd solve(const MatrixXd& rhs) const;
  BoundaryDensity solve(const BoundaryDensity& rhs) const;
  /// Reciprocal condition estimate of the stepping matrix.
  double stepping_rcond() const;

 private:
  struct Impl;
  const CausalOperator* op_;
  std::unique_ptr<Impl> impl_;
};

BoundaryDensity solve_boundary_equation(const CausalOperator& op, const BoundaryElementMesh& mesh,
                                        const BoundaryDensity& rhs, EquationKind kind);

/// Galerkin load (g, phi_{k,i}) by Gauss quadrature in space and time.
BoundaryDensity project_data(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                             const SpaceTimeFunction& g, int points = 4);
/// L2-projection coefficients of g (load divided by the element mass).
BoundaryDensity l2_coefficients(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                                const SpaceTimeFunction& g, int points = 4);
/// Load of a field given at the polygon vertices and time nodes, bilinear in
/// arclength and time (nodal[j](e) at vertex e, time node j).
BoundaryDensity load_from_vertex_values(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                                        const std::vector<VectorXd>& nodal);

/// Values at the polygon vertices picked from a series given on a point set
/// that contains every vertex (for instance the boundary vertices of a finer
/// finite element mesh). Throws DomainError when a vertex has no match.
std::vector<VectorXd> vertex_trace(const BoundaryElementMesh& mesh, const std::vector<Vec>& points,
                                   const std::vector<VectorXd>& values, double tol = 1e-9);

struct Probe {
  double t = 0.0;
  Vec x;
};

struct PotentialOptions {
  int gauss = 8;
  /// Warn when a probe is closer to the boundary than this many element lengths.
  double near_factor = 1.0;
};

/// K0 psi (t0, x0) = int_0^t0 int_Gamma G(t0 - t, x0 - y) psi dsigma dt.
double eval_single_layer(const BoundaryElementMesh& mesh, const BoundaryDensity& psi, double t0,
                         const Vec& x0, const PotentialOptions& options = {});
/// K1 w (t0, x0) with the kernel d G / d n_y.
double eval_double_layer(const BoundaryElementMesh& mesh, const BoundaryDensity& w, double t0,
                         const Vec& x0, const PotentialOptions& options = {});

/// Rows: probes; columns: column-stacked density coefficients.
MatrixXd single_layer_matrix(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                             const std::vector<Probe>& probes, const PotentialOptions& options = {});
MatrixXd double_layer_matrix(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                             const std::vector<Probe>& probes, const PotentialOptions& options = {});

/// (a) u = K0 psi - K1 g, (c) u = K0 psi, (d) u = K1 w.
enum class Representation { a, c, d };

/// Evaluates the representation at the probes; `trace` holds the P0
/// coefficients of the Dirichlet trace and is required for (a).
std::vector<double> represent_interior(const BoundaryElementMesh& mesh, const BoundaryDensity& density,
                                       const std::vector<Probe>& probes,
                                       Representation rep = Representation::c,
                                       const BoundaryDensity* trace = nullptr,
                                       const PotentialOptions& options = {});

/// Density of the chosen representation for the Dirichlet trace whose P0
/// coefficients are `trace`:
///  (c) V psi = M trace, (a) V psi = (1/2 M + K) trace, (d) (1/2 M - K) w = -M trace.
BoundaryDensity dirichlet_density(const BoundaryElementMesh& mesh, const BoundaryDensity& trace,
                                  Representation rep, const CausalOperator& v_op,
                                  const CausalOperator* k_op = nullptr);

/// Binary layout: 8-byte magic "SHUQOP01", int32 kind, int32 elements,
/// int32 lags, float64 dt, then lags row-major float64 blocks.
void write_operator_binary(std::ostream& os, const CausalOperator& op);
CausalOperator read_operator_binary(std::istream& is);
/// CSV rows "interval,element,value".
void write_density_csv(std::ostream& os, const BoundaryDensity& density);

}  // namespace shapeuq
