#include "shapeuq/fem.hpp"

#include <Eigen/LU>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace shapeuq {

TimeGrid::TimeGrid(double final_time, int steps) : T(final_time), N(steps) {
  if (!(final_time > 0.0)) throw std::invalid_argument("final time must be positive");
  if (steps < 1) throw std::invalid_argument("time grid needs at least one step");
}

// ---------------------------------------------------------------- space

FeSpace::FeSpace(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)), locator_(*mesh_) {
  const int d = mesh_->dim();
  grads_.reserve(mesh_->num_cells());
  for (std::size_t c = 0; c < mesh_->num_cells(); ++c) {
    const auto& cell = mesh_->cell(c);
    Mat e(d, d);
    for (int k = 0; k < d; ++k) e.col(k) = mesh_->vertex(cell[k + 1]) - mesh_->vertex(cell[0]);
    const Mat inv = e.inverse();
    GradientMatrix g(d + 1, d);
    g.bottomRows(d) = inv;
    g.row(0) = -inv.colwise().sum();
    grads_.push_back(g);
  }
  if (d == 2) {
    const double a = 2.0 / 3.0, b = 1.0 / 6.0;
    quad_bary_ = {{a, b, b, 0.0}, {b, a, b, 0.0}, {b, b, a, 0.0}};
    quad_w_ = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  } else {
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    quad_bary_ = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
    quad_w_ = {0.25, 0.25, 0.25, 0.25};
  }
  for (std::size_t v = 0; v < mesh_->num_vertices(); ++v) {
    if (!mesh_->on_boundary(v)) interior_.push_back(static_cast<int>(v));
  }
}

Vec FeSpace::quad_point(std::size_t c, int q) const {
  const auto& cell = mesh_->cell(c);
  Vec x = Vec::Zero(dim());
  for (int k = 0; k <= dim(); ++k) x += quad_bary_[q][k] * mesh_->vertex(cell[k]);
  return x;
}

VectorXd FeSpace::interpolate(const SpatialFunction& fn) const {
  VectorXd u = VectorXd::Zero(static_cast<Eigen::Index>(num_dofs()));
  if (!fn) return u;
  for (std::size_t i = 0; i < num_dofs(); ++i) u(i) = fn(mesh_->vertex(i));
  return u;
}

std::vector<double> FeSpace::sample_quadrature(const SpatialFunction& fn) const {
  std::vector<double> out(num_quad_points());
  const int nq = quad_per_cell();
  for (std::size_t c = 0; c < num_cells(); ++c) {
    for (int q = 0; q < nq; ++q) out[c * nq + q] = fn(quad_point(c, q));
  }
  return out;
}

Vec FeSpace::cell_gradient(std::size_t c, const VectorXd& u) const {
  const auto& cell = mesh_->cell(c);
  Vec g = Vec::Zero(dim());
  for (int k = 0; k <= dim(); ++k) g += u(cell[k]) * grads_[c].row(k).transpose();
  return g;
}

double FeSpace::cell_value(std::size_t c, const std::array<double, 4>& bary,
                           const VectorXd& u) const {
  const auto& cell = mesh_->cell(c);
  double s = 0.0;
  for (int k = 0; k <= dim(); ++k) s += bary[k] * u(cell[k]);
  return s;
}

double FeSpace::evaluate(const VectorXd& u, const Vec& x) const {
  const Location loc = locator_.locate_or_nearest(x);
  return cell_value(loc.cell, loc.bary, u);
}

Vec FeSpace::evaluate_gradient(const VectorXd& u, const Vec& x) const {
  return cell_gradient(locator_.locate_or_nearest(x).cell, u);
}

// ---------------------------------------------------------------- assembly

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(std::size_t n, const Triplets& t) {
  SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseMatrix mass_impl(const FeSpace& space, const std::vector<double>* density,
                       const std::vector<char>* mask) {
  const int d = space.dim(), nq = space.quad_per_cell();
  Triplets t;
  t.reserve(space.num_cells() * (d + 1) * (d + 1));
  for (std::size_t c = 0; c < space.num_cells(); ++c) {
    if (mask && !(*mask)[c]) continue;
    const auto& cell = space.mesh().cell(c);
    for (int a = 0; a <= d; ++a) {
      for (int b = 0; b <= d; ++b) {
        double s = 0.0;
        for (int q = 0; q < nq; ++q) {
          const double rho = density ? (*density)[c * nq + q] : 1.0;
          s += space.quad_weight(c, q) * rho * space.quad_bary(q)[a] * space.quad_bary(q)[b];
        }
        t.emplace_back(cell[a], cell[b], s);
      }
    }
  }
  return from_triplets(space.num_dofs(), t);
}

SparseMatrix stiffness_impl(const FeSpace& space, const std::vector<Mat>* coefficient,
                            const std::vector<char>* mask) {
  const int d = space.dim(), nq = space.quad_per_cell();
  Triplets t;
  t.reserve(space.num_cells() * (d + 1) * (d + 1));
  for (std::size_t c = 0; c < space.num_cells(); ++c) {
    if (mask && !(*mask)[c]) continue;
    const auto& cell = space.mesh().cell(c);
    const auto& g = space.basis_gradients(c);
    Mat a_bar = Mat::Zero(d, d);
    if (coefficient) {
      for (int q = 0; q < nq; ++q) a_bar += space.quad_weight(c, q) * (*coefficient)[c * nq + q];
    } else {
      a_bar = space.mesh().cell_measure(c) * Mat::Identity(d, d);
    }
    // Gradients are constant per cell, so only the integral of A matters.
    for (int a = 0; a <= d; ++a) {
      for (int b = 0; b <= d; ++b) {
        t.emplace_back(cell[a], cell[b], g.row(a) * a_bar * g.row(b).transpose());
      }
    }
  }
  return from_triplets(space.num_dofs(), t);
}

}  // namespace

SparseMatrix assemble_mass(const FeSpace& space, const std::vector<double>* density) {
  return mass_impl(space, density, nullptr);
}

SparseMatrix assemble_stiffness(const FeSpace& space, const std::vector<Mat>* coefficient) {
  return stiffness_impl(space, coefficient, nullptr);
}

SparseMatrix assemble_mass_on(const FeSpace& space, const std::vector<char>& cell_mask) {
  return mass_impl(space, nullptr, &cell_mask);
}

SparseMatrix assemble_stiffness_on(const FeSpace& space, const std::vector<char>& cell_mask) {
  return stiffness_impl(space, nullptr, &cell_mask);
}

VectorXd assemble_load(const FeSpace& space, const std::vector<double>& values) {
  const int d = space.dim(), nq = space.quad_per_cell();
  VectorXd b = VectorXd::Zero(static_cast<Eigen::Index>(space.num_dofs()));
  for (std::size_t c = 0; c < space.num_cells(); ++c) {
    const auto& cell = space.mesh().cell(c);
    for (int q = 0; q < nq; ++q) {
      const double wq = space.quad_weight(c, q) * values[c * nq + q];
      for (int a = 0; a <= d; ++a) b(cell[a]) += wq * space.quad_bary(q)[a];
    }
  }
  return b;
}

VectorXd assemble_gradient_load(const FeSpace& space, const std::vector<Vec>& values) {
  const int d = space.dim(), nq = space.quad_per_cell();
  VectorXd b = VectorXd::Zero(static_cast<Eigen::Index>(space.num_dofs()));
  for (std::size_t c = 0; c < space.num_cells(); ++c) {
    const auto& cell = space.mesh().cell(c);
    const auto& g = space.basis_gradients(c);
    Vec qbar = Vec::Zero(d);
    for (int q = 0; q < nq; ++q) qbar += space.quad_weight(c, q) * values[c * nq + q];
    for (int a = 0; a <= d; ++a) b(cell[a]) += g.row(a).dot(qbar);
  }
  return b;
}

SparseMatrix assemble_boundary_mass(const FeSpace& space) {
  const Mesh& mesh = space.mesh();
  const int d = mesh.dim();
  Triplets t;
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
    const auto& facet = mesh.facet(f);
    const double m = mesh.facet_measure(f);
    // Exact P1 facet mass: diagonal 2, off-diagonal 1, scaled by m/(d(d+1)).
    const double scale = m / (d * (d + 1));
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) t.emplace_back(facet[a], facet[b], scale * (a == b ? 2.0 : 1.0));
    }
  }
  return from_triplets(space.num_dofs(), t);
}

SourceData SourceData::zero() {
  SourceData s;
  s.f = [](double, const Vec&) { return 0.0; };
  s.g = [](const Vec&) { return 0.0; };
  s.name = "zero";
  return s;
}

// ---------------------------------------------------------------- fields

SpaceTimeField SpaceTimeField::zeros(std::shared_ptr<const Mesh> mesh, const TimeGrid& grid) {
  SpaceTimeField f;
  f.grid = grid;
  f.snapshots.assign(grid.N + 1, VectorXd::Zero(static_cast<Eigen::Index>(mesh->num_vertices())));
  f.mesh = std::move(mesh);
  return f;
}

VectorXd SpaceTimeField::at_time(double t) const {
  const double s = std::clamp(t / grid.dt(), 0.0, static_cast<double>(grid.N));
  const int j = std::min(static_cast<int>(std::floor(s)), grid.N - 1);
  const double w = s - j;
  return (1.0 - w) * snapshots[j] + w * snapshots[j + 1];
}

namespace {

void check_compatible(const SpaceTimeField& a, const SpaceTimeField& b) {
  if (a.snapshots.size() != b.snapshots.size() ||
      (!a.snapshots.empty() && a.snapshots[0].size() != b.snapshots[0].size())) {
    throw std::invalid_argument("space-time fields live on different grids");
  }
}

}  // namespace

SpaceTimeField operator-(const SpaceTimeField& a, const SpaceTimeField& b) {
  check_compatible(a, b);
  SpaceTimeField r = a;
  for (std::size_t j = 0; j < r.snapshots.size(); ++j) r.snapshots[j] -= b.snapshots[j];
  return r;
}

SpaceTimeField operator+(const SpaceTimeField& a, const SpaceTimeField& b) {
  check_compatible(a, b);
  SpaceTimeField r = a;
  for (std::size_t j = 0; j < r.snapshots.size(); ++j) r.snapshots[j] += b.snapshots[j];
  return r;
}

SpaceTimeField operator*(double s, const SpaceTimeField& a) {
  SpaceTimeField r = a;
  for (auto& v : r.snapshots) v *= s;
  return r;
}

double theta_of(TimeScheme scheme) { return scheme == TimeScheme::crank_nicolson ? 0.5 : 1.0; }

// ---------------------------------------------------------------- stepping

struct ThetaStepper::Impl {
  SparseMatrix rhs_matrix;  // M/dt - (1 - theta) K
  SparseMatrix s_ib;
  Eigen::SimplicialLDLT<SparseMatrix> solver;
  std::vector<int> interior;
  std::vector<int> boundary;
};

ThetaStepper::~ThetaStepper() = default;
ThetaStepper::ThetaStepper(ThetaStepper&&) noexcept = default;

ThetaStepper::ThetaStepper(const FeSpace& space, const TimeGrid& grid, const SparseMatrix& mass,
                           const SparseMatrix& stiffness, TimeScheme scheme)
    : space_(&space), grid_(grid), theta_(theta_of(scheme)), impl_(std::make_unique<Impl>()) {
  const double dt = grid.dt();
  const SparseMatrix s = mass / dt + theta_ * stiffness;
  impl_->rhs_matrix = mass / dt - (1.0 - theta_) * stiffness;
  impl_->interior = space.interior_dofs();
  impl_->boundary = space.boundary_dofs();

  const std::size_t n = space.num_dofs();
  std::vector<int> local(n, -1);
  std::vector<char> is_interior(n, 0);
  for (std::size_t k = 0; k < impl_->interior.size(); ++k) {
    local[impl_->interior[k]] = static_cast<int>(k);
    is_interior[impl_->interior[k]] = 1;
  }
  std::vector<int> blocal(n, -1);
  for (std::size_t k = 0; k < impl_->boundary.size(); ++k) blocal[impl_->boundary[k]] = static_cast<int>(k);

  Triplets tii, tib;
  for (int col = 0; col < s.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(s, col); it; ++it) {
      const auto r = it.row(), c = it.col();
      if (!is_interior[r]) continue;
      if (is_interior[c]) {
        tii.emplace_back(local[r], local[c], it.value());
      } else {
        tib.emplace_back(local[r], blocal[c], it.value());
      }
    }
  }
  const auto ni = static_cast<Eigen::Index>(impl_->interior.size());
  const auto nb = static_cast<Eigen::Index>(impl_->boundary.size());
  SparseMatrix s_ii(ni, ni);
  s_ii.setFromTriplets(tii.begin(), tii.end());
  impl_->s_ib.resize(ni, nb);
  impl_->s_ib.setFromTriplets(tib.begin(), tib.end());
  if (ni > 0) {
    impl_->solver.compute(s_ii);
    if (impl_->solver.info() != Eigen::Success) {
      throw NumericalError("time-stepping matrix factorization failed (degenerate mesh?)");
    }
  }
}

SpaceTimeField ThetaStepper::march(VectorXd initial, const IntervalLoad& load,
                                   const BoundaryValues& boundary) const {
  const auto& in = impl_->interior;
  const auto& bd = impl_->boundary;
  auto boundary_vector = [&](int j) {
    VectorXd ub = VectorXd::Zero(static_cast<Eigen::Index>(bd.size()));
    if (boundary) {
      const VectorXd full = boundary(j);
      for (std::size_t k = 0; k < bd.size(); ++k) ub(k) = full(bd[k]);
    }
    return ub;
  };

  SpaceTimeField field;
  field.mesh = space_->mesh_ptr();
  field.grid = grid_;
  field.snapshots.reserve(grid_.N + 1);
  {
    const VectorXd ub = boundary_vector(0);
    for (std::size_t k = 0; k < bd.size(); ++k) initial(bd[k]) = ub(k);
  }
  field.snapshots.push_back(std::move(initial));

  VectorXd bi(static_cast<Eigen::Index>(in.size()));
  for (int j = 0; j < grid_.N; ++j) {
    const VectorXd& u = field.snapshots.back();
    VectorXd rhs = impl_->rhs_matrix * u;
    if (load) rhs += load(j);
    const VectorXd ub = boundary_vector(j + 1);
    for (std::size_t k = 0; k < in.size(); ++k) bi(k) = rhs(in[k]);
    if (bd.size() > 0) bi -= impl_->s_ib * ub;
    VectorXd next(u.size());
    if (!in.empty()) {
      const VectorXd ui = impl_->solver.solve(bi);
      for (std::size_t k = 0; k < in.size(); ++k) next(in[k]) = ui(k);
    }
    for (std::size_t k = 0; k < bd.size(); ++k) next(bd[k]) = ub(k);
    if (!next.allFinite()) throw NumericalError("non-finite values in time stepping");
    field.snapshots.push_back(std::move(next));
  }
  return field;
}

ThetaStepper::IntervalLoad source_interval_load(const FeSpace& space, const TimeGrid& grid,
                                                const SpaceTimeFunction& f, TimeScheme scheme,
                                                const std::vector<double>* weight,
                                                const std::function<Vec(const Vec&)>& map) {
  if (!f) return {};
  const int nq = space.quad_per_cell();
  std::vector<Vec> points(space.num_quad_points());
  for (std::size_t c = 0; c < space.num_cells(); ++c) {
    for (int q = 0; q < nq; ++q) {
      const Vec x = space.quad_point(c, q);
      points[c * nq + q] = map ? map(x) : x;
    }
  }
  auto nodal = std::make_shared<std::vector<VectorXd>>();
  std::vector<double> values(points.size());
  for (int j = 0; j <= grid.N; ++j) {
    const double t = grid.t(j);
    for (std::size_t i = 0; i < points.size(); ++i) {
      values[i] = f(t, points[i]) * (weight ? (*weight)[i] : 1.0);
    }
    nodal->push_back(assemble_load(space, values));
  }
  const double th = theta_of(scheme);
  return [nodal, th](int j) -> VectorXd {
    return th * (*nodal)[j + 1] + (1.0 - th) * (*nodal)[j];
  };
}

namespace {

ThetaStepper::BoundaryValues dirichlet_values(const FeSpace& space, const TimeGrid& grid,
                                              const SpaceTimeFunction& dirichlet,
                                              const std::function<Vec(const Vec&)>& map) {
  if (!dirichlet) return {};
  return [&space, grid, dirichlet, map](int j) {
    VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(space.num_dofs()));
    for (int b : space.boundary_dofs()) {
      const Vec& x = space.mesh().vertex(b);
      v(b) = dirichlet(grid.t(j), map ? map(x) : x);
    }
    return v;
  };
}

void warn_if_incompatible(const FeSpace& space, const VectorXd& initial,
                          const ThetaStepper::BoundaryValues& boundary) {
  double worst = 0.0;
  VectorXd b0 = boundary ? boundary(0) : VectorXd::Zero(initial.size());
  for (int b : space.boundary_dofs()) worst = std::max(worst, std::abs(initial(b) - b0(b)));
  if (worst > 1e-8) {
    std::ostringstream os;
    os << "initial value and Dirichlet data differ on the boundary at t=0 (max " << worst << ")";
    warn(os.str());
  }
}

}  // namespace

SpaceTimeField solve_heat_dirichlet(const FeSpace& space, const TimeGrid& grid,
                                    const SourceData& data, const SolverOptions& options) {
  const SparseMatrix m = assemble_mass(space);
  const SparseMatrix k = assemble_stiffness(space);
  ThetaStepper stepper(space, grid, m, k, options.scheme);
  VectorXd initial = space.interpolate(data.g);
  auto boundary = dirichlet_values(space, grid, data.dirichlet, {});
  warn_if_incompatible(space, initial, boundary);
  return stepper.march(std::move(initial), source_interval_load(space, grid, data.f, options.scheme),
                       boundary);
}

SpaceTimeField solve_pulled_back(const FeSpace& space, const TimeGrid& grid, const SourceData& data,
                                 const PerturbationMap& map, const SolverOptions& options) {
  const int nq = space.quad_per_cell();
  std::vector<double> gamma(space.num_quad_points());
  std::vector<Mat> a(space.num_quad_points());
  for (std::size_t c = 0; c < space.num_cells(); ++c) {
    for (int q = 0; q < nq; ++q) {
      const auto tc = transported_coefficients(map, space.quad_point(c, q));
      const auto& g = tc.gamma_poly;
      const double e = map.epsilon;
      const double det = 1.0 + e * (g[0] + e * (g[1] + e * g[2]));
      if (det < options.gamma_floor) {
        std::ostringstream os;
        os << "inadmissible epsilon " << e << ": Jacobian determinant " << det
           << " below the floor " << options.gamma_floor;
        throw NumericalError(os.str());
      }
      gamma[c * nq + q] = tc.gamma;
      a[c * nq + q] = tc.a_matrix;
    }
  }
  const SparseMatrix m = assemble_mass(space, &gamma);
  const SparseMatrix k = assemble_stiffness(space, &a);
  ThetaStepper stepper(space, grid, m, k, options.scheme);
  auto t_map = [map](const Vec& x) { return apply(map, x); };
  VectorXd initial = VectorXd::Zero(static_cast<Eigen::Index>(space.num_dofs()));
  if (data.g) {
    for (std::size_t i = 0; i < space.num_dofs(); ++i) initial(i) = data.g(t_map(space.mesh().vertex(i)));
  }
  auto boundary = dirichlet_values(space, grid, data.dirichlet, t_map);
  warn_if_incompatible(space, initial, boundary);
  return stepper.march(std::move(initial),
                       source_interval_load(space, grid, data.f, options.scheme, &gamma, t_map),
                       boundary);
}

// ---------------------------------------------------------------- flux

BoundaryFlux boundary_flux(const FeSpace& space, const SpaceTimeField& field,
                           const FluxOptions& options) {
  const Mesh& mesh = space.mesh();
  BoundaryFlux out;
  out.vertices = mesh.boundary_vertices();
  out.grid = field.grid;
  for (int v : out.vertices) {
    out.normals.push_back(options.normal ? options.normal(mesh.vertex(v)) : mesh.vertex_normal(v));
  }
  const std::size_t nb = out.vertices.size();

  if (options.method == FluxMethod::element_average) {
    std::vector<int> local(mesh.num_vertices(), -1);
    for (std::size_t k = 0; k < nb; ++k) local[out.vertices[k]] = static_cast<int>(k);
    std::vector<std::vector<std::size_t>> cells_of(nb);
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      for (int k = 0; k <= mesh.dim(); ++k) {
        const int l = local[mesh.cell(c)[k]];
        if (l >= 0) cells_of[l].push_back(c);
      }
    }
    for (const VectorXd& u : field.snapshots) {
      VectorXd vals(static_cast<Eigen::Index>(nb));
      for (std::size_t k = 0; k < nb; ++k) {
        double s = 0.0, w = 0.0;
        for (std::size_t c : cells_of[k]) {
          s += mesh.cell_measure(c) * space.cell_gradient(c, u).dot(out.normals[k]);
          w += mesh.cell_measure(c);
        }
        vals(k) = s / w;
      }
      out.values.push_back(std::move(vals));
    }
    return out;
  }

  // Variational recovery: the boundary rows of the discrete residual define
  // the flux functional, tested against the boundary mass matrix.
  const TimeGrid& grid = field.grid;
  const SparseMatrix m = assemble_mass(space);
  const SparseMatrix k = assemble_stiffness(space);
  const SparseMatrix mb_full = assemble_boundary_mass(space);
  std::vector<int> local(mesh.num_vertices(), -1);
  for (std::size_t i = 0; i < nb; ++i) local[out.vertices[i]] = static_cast<int>(i);
  Triplets tb;
  for (int col = 0; col < mb_full.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(mb_full, col); it; ++it) {
      tb.emplace_back(local[it.row()], local[it.col()], it.value());
    }
  }
  SparseMatrix mb(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));
  mb.setFromTriplets(tb.begin(), tb.end());
  Eigen::SimplicialLDLT<SparseMatrix> solver(mb);
  if (solver.info() != Eigen::Success) throw NumericalError("boundary mass factorization failed");

  const double th = theta_of(options.scheme);
  auto load = source_interval_load(space, grid, options.source, options.scheme);
  std::vector<VectorXd> mid;
  for (int j = 0; j < grid.N; ++j) {
    const VectorXd& u0 = field.snapshots[j];
    const VectorXd& u1 = field.snapshots[j + 1];
    VectorXd r = m * (u1 - u0) / grid.dt() + k * (th * u1 + (1.0 - th) * u0);
    if (load) r -= load(j);
    VectorXd rb(static_cast<Eigen::Index>(nb));
    for (std::size_t i = 0; i < nb; ++i) rb(i) = r(out.vertices[i]);
    mid.push_back(solver.solve(rb));
  }
  // Interval values sit at the midpoints; average to the nodes and
  // extrapolate linearly at both ends.
  const int n = grid.N;
  for (int j = 0; j <= n; ++j) {
    if (n == 1) {
      out.values.push_back(mid[0]);
    } else if (j == 0) {
      out.values.push_back(1.5 * mid[0] - 0.5 * mid[1]);
    } else if (j == n) {
      out.values.push_back(1.5 * mid[n - 1] - 0.5 * mid[n - 2]);
    } else {
      out.values.push_back(0.5 * (mid[j - 1] + mid[j]));
    }
  }
  return out;
}

// ---------------------------------------------------------------- norms

struct DiscreteNorms::Impl {
  Eigen::SimplicialLDLT<SparseMatrix> riesz;
  std::vector<int> interior;
  bool has_dual = false;
};

DiscreteNorms::~DiscreteNorms() = default;
DiscreteNorms::DiscreteNorms(DiscreteNorms&&) noexcept = default;

DiscreteNorms::DiscreteNorms(const FeSpace& space)
    : space_(&space),
      mass_(assemble_mass(space)),
      stiffness_(assemble_stiffness(space)),
      impl_(std::make_unique<Impl>()) {
  impl_->interior = space.interior_dofs();
  const std::size_t n = space.num_dofs();
  std::vector<int> local(n, -1);
  for (std::size_t k = 0; k < impl_->interior.size(); ++k) local[impl_->interior[k]] = static_cast<int>(k);
  const SparseMatrix h = stiffness_ + mass_;
  Triplets t;
  for (int col = 0; col < h.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(h, col); it; ++it) {
      if (local[it.row()] >= 0 && local[it.col()] >= 0) {
        t.emplace_back(local[it.row()], local[it.col()], it.value());
      }
    }
  }
  const auto ni = static_cast<Eigen::Index>(impl_->interior.size());
  SparseMatrix hii(ni, ni);
  hii.setFromTriplets(t.begin(), t.end());
  if (ni > 0) {
    impl_->riesz.compute(hii);
    if (impl_->riesz.info() != Eigen::Success) throw NumericalError("Riesz map factorization failed");
    impl_->has_dual = true;
  }
}

DiscreteNorms::DiscreteNorms(const FeSpace& space, const std::vector<char>& cell_mask)
    : space_(&space),
      mass_(assemble_mass_on(space, cell_mask)),
      stiffness_(assemble_stiffness_on(space, cell_mask)),
      impl_(std::make_unique<Impl>()) {}

double DiscreteNorms::l2(const VectorXd& v) const { return std::sqrt(std::max(0.0, v.dot(mass_ * v))); }

double DiscreteNorms::h1_semi(const VectorXd& v) const {
  return std::sqrt(std::max(0.0, v.dot(stiffness_ * v)));
}

double DiscreteNorms::h1(const VectorXd& v) const {
  return std::sqrt(std::max(0.0, v.dot(mass_ * v) + v.dot(stiffness_ * v)));
}

double DiscreteNorms::hminus1(const VectorXd& v) const { return dual_of_load(mass_ * v); }

double DiscreteNorms::dual_of_load(const VectorXd& b) const {
  if (!impl_->has_dual) throw std::logic_error("dual norm unavailable for restricted norms");
  const auto& in = impl_->interior;
  VectorXd bi(static_cast<Eigen::Index>(in.size()));
  for (std::size_t k = 0; k < in.size(); ++k) bi(k) = b(in[k]);
  const VectorXd r = impl_->riesz.solve(bi);
  return std::sqrt(std::max(0.0, bi.dot(r)));
}

namespace {

double snapshot_norm(const DiscreteNorms& norms, const VectorXd& v, NormKind kind) {
  switch (kind) {
    case NormKind::L2L2:
    case NormKind::CL2:
      return norms.l2(v);
    case NormKind::L2H1:
      return norms.h1(v);
    case NormKind::L2Hminus1:
      return norms.hminus1(v);
  }
  return 0.0;
}

}  // namespace

double compute_norm(const DiscreteNorms& norms, const SpaceTimeField& field, NormKind kind) {
  const std::size_t n = field.snapshots.size();
  if (kind == NormKind::CL2) {
    double m = 0.0;
    for (const auto& v : field.snapshots) m = std::max(m, norms.l2(v));
    return m;
  }
  std::vector<double> terms(n);
  const double dt = field.grid.dt();
  for (std::size_t j = 0; j < n; ++j) {
    const double s = snapshot_norm(norms, field.snapshots[j], kind);
    terms[j] = (j == 0 || j + 1 == n ? 0.5 : 1.0) * dt * s * s;
  }
  return std::sqrt(pairwise_sum(terms));
}

double compute_norm(const FeSpace& space, const SpaceTimeField& field, NormKind kind) {
  return compute_norm(DiscreteNorms(space), field, kind);
}

double time_derivative_norm(const DiscreteNorms& norms, const SpaceTimeField& field, NormKind kind) {
  const double dt = field.grid.dt();
  std::vector<double> terms;
  double m = 0.0;
  for (std::size_t j = 1; j < field.snapshots.size(); ++j) {
    const VectorXd d = (field.snapshots[j] - field.snapshots[j - 1]) / dt;
    const double s = snapshot_norm(norms, d, kind);
    m = std::max(m, s);
    terms.push_back(dt * s * s);
  }
  return kind == NormKind::CL2 ? m : std::sqrt(pairwise_sum(terms));
}

double smallest_dirichlet_eigenvalue(const FeSpace& space) {
  const auto& in = space.interior_dofs();
  if (in.empty()) throw NumericalError("mesh has no interior vertices");
  const SparseMatrix m = assemble_mass(space);
  const SparseMatrix k = assemble_stiffness(space);
  std::vector<int> local(space.num_dofs(), -1);
  for (std::size_t i = 0; i < in.size(); ++i) local[in[i]] = static_cast<int>(i);
  auto restrict_matrix = [&](const SparseMatrix& a) {
    Triplets t;
    for (int col = 0; col < a.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
        if (local[it.row()] >= 0 && local[it.col()] >= 0) {
          t.emplace_back(local[it.row()], local[it.col()], it.value());
        }
      }
    }
    SparseMatrix r(static_cast<Eigen::Index>(in.size()), static_cast<Eigen::Index>(in.size()));
    r.setFromTriplets(t.begin(), t.end());
    return r;
  };
  const SparseMatrix mii = restrict_matrix(m), kii = restrict_matrix(k);
  Eigen::SimplicialLDLT<SparseMatrix> solver(kii);
  if (solver.info() != Eigen::Success) throw NumericalError("stiffness factorization failed");
  // Inverse iteration; the lowest Dirichlet mode has one sign, so a constant
  // start vector has a component along it.
  VectorXd x = VectorXd::Ones(static_cast<Eigen::Index>(in.size()));
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    x = solver.solve(mii * x);
    x /= std::sqrt(x.dot(mii * x));
    const double next = x.dot(kii * x);
    if (std::abs(next - lambda) < 1e-13 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

double poincare_constant(const FeSpace& space) {
  return std::sqrt(1.0 + 1.0 / smallest_dirichlet_eigenvalue(space));
}

SpaceTimeFunction as_function(std::shared_ptr<const FeSpace> space, const SpaceTimeField& field) {
  return [space = std::move(space), field](double t, const Vec& x) {
    return space->evaluate(field.at_time(t), x);
  };
}

VectorXd pullback_nodal(const FeSpace& space, const VectorXd& v, const PerturbationMap& map) {
  VectorXd out(v.size());
  for (std::size_t i = 0; i < space.num_dofs(); ++i) {
    out(i) = space.evaluate(v, apply(map, space.mesh().vertex(i)));
  }
  return out;
}

// ---------------------------------------------------------------- export

void write_field_csv(std::ostream& os, const SpaceTimeField& field) {
  os << "time,node,value\n";
  os.precision(12);
  for (std::size_t j = 0; j < field.snapshots.size(); ++j) {
    const double t = field.grid.t(static_cast<int>(j));
    for (Eigen::Index i = 0; i < field.snapshots[j].size(); ++i) {
      os << t << ',' << i << ',' << field.snapshots[j](i) << '\n';
    }
  }
}

void write_grid_sampling_csv(std::ostream& os, const FeSpace& space, const VectorXd& snapshot, int n) {
  const Mesh& mesh = space.mesh();
  Vec lo = mesh.vertex(0), hi = lo;
  for (const Vec& v : mesh.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  os << "x,y,value\n";
  os.precision(12);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      Vec x = Vec::Zero(mesh.dim());
      x(0) = lo(0) + (hi(0) - lo(0)) * (n == 1 ? 0.5 : double(i) / (n - 1));
      x(1) = lo(1) + (hi(1) - lo(1)) * (n == 1 ? 0.5 : double(j) / (n - 1));
      if (mesh.dim() == 3) x(2) = 0.5 * (lo(2) + hi(2));
      const auto loc = space.locator().locate(x);
      if (!loc) continue;
      os << x(0) << ',' << x(1) << ',' << space.cell_value(loc->cell, loc->bary, snapshot) << '\n';
    }
  }
}

void write_vtk(std::ostream& os, const Mesh& mesh, const VectorXd& values, const std::string& name) {
  const int d = mesh.dim();
  os << "# vtk DataFile Version 3.0\nshapeuq field\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os.precision(12);
  os << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Vec& v : mesh.vertices()) os << v(0) << ' ' << v(1) << ' ' << (d == 3 ? v(2) : 0.0) << '\n';
  os << "CELLS " << mesh.num_cells() << ' ' << mesh.num_cells() * (d + 2) << '\n';
  for (const auto& c : mesh.cells()) {
    os << d + 1;
    for (int k = 0; k <= d; ++k) os << ' ' << c[k];
    os << '\n';
  }
  os << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) os << (d == 2 ? 5 : 10) << '\n';
  os << "POINT_DATA " << mesh.num_vertices() << "\nSCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index i = 0; i < values.size(); ++i) os << values(i) << '\n';
}

}  // namespace shapeuq
