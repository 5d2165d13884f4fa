#include "shapeuq/sensitivity.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <ostream>

namespace shapeuq {

SensitivityProblem::SensitivityProblem(std::shared_ptr<const FeSpace> space, const TimeGrid& grid,
                                       SourceData data, VelocityField velocity,
                                       const SolverOptions& options)
    : space_(std::move(space)),
      u0_(solve_heat_dirichlet(*space_, grid, data, options)),
      data_(std::move(data)),
      velocity_(std::move(velocity)),
      options_(options) {
  derive();
}

SensitivityProblem::SensitivityProblem(std::shared_ptr<const FeSpace> space, SpaceTimeField u0,
                                       SourceData data, VelocityField velocity,
                                       const SolverOptions& options)
    : space_(std::move(space)),
      u0_(std::move(u0)),
      data_(std::move(data)),
      velocity_(std::move(velocity)),
      options_(options) {
  if (u0_.mesh.get() != &space_->mesh() &&
      (u0_.snapshots.empty() || u0_.snapshots[0].size() != static_cast<Eigen::Index>(space_->num_dofs()))) {
    throw std::invalid_argument("reference solution was computed on another mesh");
  }
  derive();
}

SensitivityProblem SensitivityProblem::with_velocity(VelocityField velocity) const {
  SensitivityProblem p = *this;
  p.velocity_ = std::move(velocity);
  p.derive();
  return p;
}

void SensitivityProblem::derive() {
  if (velocity_.dim() != space_->dim()) throw std::invalid_argument("velocity and mesh dimensions differ");
  if (u0_.snapshots.size() < 2) throw std::invalid_argument("reference trajectory too short for u0_t");
  const int nq = space_->quad_per_cell();
  const std::size_t n = space_->num_quad_points();
  v_qp_.resize(n);
  div_qp_.resize(n);
  a_prime_qp_.resize(n);
  for (std::size_t c = 0; c < space_->num_cells(); ++c) {
    for (int q = 0; q < nq; ++q) {
      const Vec x = space_->quad_point(c, q);
      const Mat j = velocity_.jac(x);
      const auto tc = transported_coefficients_from_jacobian(j, 0.0);
      v_qp_[c * nq + q] = velocity_.eval(x);
      div_qp_[c * nq + q] = j.trace();
      a_prime_qp_[c * nq + q] = tc.a_prime0;
    }
  }
}

namespace {

Vec gradient_fd(const SpatialFunction& g, const Vec& x) {
  Vec out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
    Vec xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    out(k) = (g(xp) - g(xm)) / (2.0 * h);
  }
  return out;
}

}  // namespace

SpaceTimeField material_derivative(const SensitivityProblem& p) {
  const FeSpace& space = p.space();
  const TimeGrid& grid = p.grid();
  const auto& u = p.u0().snapshots;
  if (u.size() != static_cast<std::size_t>(grid.N + 1)) {
    throw std::invalid_argument("reference trajectory does not match the time grid");
  }
  const double th = theta_of(p.options().scheme);
  const SparseMatrix m = assemble_mass(space);
  const SparseMatrix k = assemble_stiffness(space);
  const SparseMatrix m_div = assemble_mass(space, &p.divergence_at_quadrature());
  const SparseMatrix k_prime = assemble_stiffness(space, &p.a_prime_at_quadrature());
  ThetaStepper stepper(space, grid, m, k, p.options().scheme);

  // -(f V, grad w) at every time node.
  const int nq = space.quad_per_cell();
  const auto& vq = p.velocity_at_quadrature();
  std::vector<VectorXd> g_nodes;
  if (p.data().f) {
    std::vector<Vec> fv(vq.size());
    for (int j = 0; j <= grid.N; ++j) {
      for (std::size_t c = 0; c < space.num_cells(); ++c) {
        for (int q = 0; q < nq; ++q) {
          const std::size_t i = c * nq + q;
          fv[i] = p.data().f(grid.t(j), space.quad_point(c, q)) * vq[i];
        }
      }
      g_nodes.push_back(-assemble_gradient_load(space, fv));
    }
  }
  const double dt = grid.dt();
  auto load = [&](int j) -> VectorXd {
    // u0_t is the increment over the interval, attributed to its midpoint.
    VectorXd b = -(m_div * ((u[j + 1] - u[j]) / dt)) - k_prime * (th * u[j + 1] + (1.0 - th) * u[j]);
    if (!g_nodes.empty()) b += th * g_nodes[j + 1] + (1.0 - th) * g_nodes[j];
    return b;
  };

  VectorXd initial = VectorXd::Zero(static_cast<Eigen::Index>(space.num_dofs()));
  if (p.data().g) {
    for (std::size_t i = 0; i < space.num_dofs(); ++i) {
      const Vec& x = space.mesh().vertex(i);
      const Vec v = p.velocity().eval(x);
      if (v.isZero(0.0)) continue;
      const Vec grad = p.data().grad_g ? p.data().grad_g(x) : gradient_fd(p.data().g, x);
      initial(i) = grad.dot(v);
    }
  }
  ThetaStepper::BoundaryValues boundary;
  if (p.data().dirichlet) {
    // Pulled-back trace differentiated along V.
    boundary = [&](int j) {
      VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(space.num_dofs()));
      const double t = grid.t(j);
      for (int b : space.boundary_dofs()) {
        const Vec& x = space.mesh().vertex(b);
        const Vec vel = p.velocity().eval(x);
        const double h = 1e-6;
        v(b) = (p.data().dirichlet(t, x + h * vel) - p.data().dirichlet(t, x - h * vel)) / (2.0 * h);
      }
      return v;
    };
  }
  return stepper.march(std::move(initial), load, boundary);
}

std::vector<VectorXd> shape_boundary_datum(const SensitivityProblem& p) {
  const FeSpace& space = p.space();
  FluxOptions fo;
  fo.method = p.flux_method;
  fo.normal = p.boundary_normal;
  fo.source = p.data().f;
  fo.scheme = p.options().scheme;
  const BoundaryFlux flux = boundary_flux(space, p.u0(), fo);
  const std::size_t nb = flux.vertices.size();
  VectorXd vn(static_cast<Eigen::Index>(nb));
  for (std::size_t k = 0; k < nb; ++k) {
    vn(k) = p.velocity().eval(space.mesh().vertex(flux.vertices[k])).dot(flux.normals[k]);
  }
  std::vector<VectorXd> out;
  out.reserve(flux.values.size());
  for (const VectorXd& f : flux.values) out.push_back(-f.cwiseProduct(vn));
  return out;
}

SpaceTimeField shape_derivative(const SensitivityProblem& p) {
  const FeSpace& space = p.space();
  const TimeGrid& grid = p.grid();
  const auto datum = shape_boundary_datum(p);
  const auto& verts = space.mesh().boundary_vertices();
  ThetaStepper stepper(space, grid, assemble_mass(space), assemble_stiffness(space), p.options().scheme);
  auto boundary = [&](int j) {
    VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(space.num_dofs()));
    for (std::size_t k = 0; k < verts.size(); ++k) v(verts[k]) = datum[j](k);
    return v;
  };
  return stepper.march(VectorXd::Zero(static_cast<Eigen::Index>(space.num_dofs())), {}, boundary);
}

SpaceTimeField shape_from_material(const SpaceTimeField& z, const SensitivityProblem& p) {
  const FeSpace& space = p.space();
  const SparseMatrix m = assemble_mass(space);
  Eigen::SimplicialLDLT<SparseMatrix> solver(m);
  if (solver.info() != Eigen::Success) throw NumericalError("mass matrix factorization failed");
  const int nq = space.quad_per_cell();
  const auto& vq = p.velocity_at_quadrature();
  SpaceTimeField out = z;
  std::vector<double> values(vq.size());
  for (std::size_t j = 0; j < z.snapshots.size(); ++j) {
    const VectorXd& u = p.u0().snapshots[j];
    for (std::size_t c = 0; c < space.num_cells(); ++c) {
      const Vec grad = space.cell_gradient(c, u);
      for (int q = 0; q < nq; ++q) values[c * nq + q] = grad.dot(vq[c * nq + q]);
    }
    out.snapshots[j] -= solver.solve(assemble_load(space, values));
  }
  return out;
}

double functional_derivative(const FeSpace& space, const VectorXd& v0, const VectorXd& vprime,
                             const VelocityField& velocity, const ReferenceBoundary& boundary,
                             FunctionalKind which, int quadrature_nodes) {
  const BoundaryQuadrature bq = boundary.quadrature(quadrature_nodes);
  if (which == FunctionalKind::surface && !bq.curvature) {
    throw std::invalid_argument("surface functional derivative needs boundary curvature");
  }
  std::vector<double> terms;
  if (which == FunctionalKind::volume) {
    const SparseMatrix m = assemble_mass(space);
    terms.push_back((m * vprime).sum());
  }
  for (std::size_t i = 0; i < bq.points.size(); ++i) {
    const Vec& x = bq.points[i];
    const Vec& n = bq.normals[i];
    const double vn = velocity.eval(x).dot(n);
    const double v = space.evaluate(v0, x);
    if (which == FunctionalKind::volume) {
      terms.push_back(bq.weights[i] * v * vn);
    } else {
      const double dn = space.evaluate_gradient(v0, x).dot(n);
      const double vp = space.evaluate(vprime, x);
      terms.push_back(bq.weights[i] * (vp + (dn + (*bq.curvature)[i] * v) * vn));
    }
  }
  return pairwise_sum(terms);
}

BoundaryVectorField normal_derivative_field(std::shared_ptr<const ReferenceBoundary> boundary,
                                            std::shared_ptr<const BoundaryFunction> kappa) {
  auto grad = tangential_gradient(std::move(boundary), std::move(kappa));
  return [grad = std::move(grad)](const Vec& param) -> Vec { return -grad(param); };
}

void write_probe_series_csv(std::ostream& os, const FeSpace& space, const SpaceTimeField& field,
                            const std::vector<Vec>& probes) {
  os << "time,probe,x,y,value\n";
  os.precision(12);
  for (std::size_t j = 0; j < field.snapshots.size(); ++j) {
    for (std::size_t k = 0; k < probes.size(); ++k) {
      os << field.grid.t(static_cast<int>(j)) << ',' << k << ',' << probes[k](0) << ','
         << probes[k](1) << ',' << space.evaluate(field.snapshots[j], probes[k]) << '\n';
    }
  }
}

}  // namespace shapeuq
