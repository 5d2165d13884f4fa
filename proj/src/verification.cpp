#include "shapeuq/verification.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace shapeuq {

// ------------------------------------------------------------ studies

void evaluate_study(RateStudy& s, double floor_fraction) {
  const std::size_t n = s.params.size();
  s.note.clear();
  s.floor_start.reset();
  s.slope = std::numeric_limits<double>::quiet_NaN();
  s.passed = false;
  if (n != s.errors.size()) throw std::invalid_argument("study " + s.name + ": params and errors differ in length");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(s.params[i] < s.params[i - 1])) throw std::invalid_argument("study " + s.name + ": grid must be strictly decreasing");
  }
  s.monotone = true;
  for (std::size_t i = 1; i < n; ++i) s.monotone = s.monotone && s.errors[i] < s.errors[i - 1];

  double max_err = 0.0;
  for (double e : s.errors) max_err = std::max(max_err, std::abs(e));
  s.degenerate = max_err <= kDegenerateError;
  if (s.degenerate) {
    s.passed = true;
    s.note = "degenerate: all errors vanish";
    return;
  }
  if (n < 3) {
    s.note = "fewer than three grid values";
    return;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double expected = std::pow(s.params[i] / s.params[i + 1], s.target_slope);
    const double observed = s.errors[i] / s.errors[i + 1];
    if (observed < floor_fraction * expected) {
      s.floor_start = i + 1;
      break;
    }
  }
  const std::size_t usable = s.floor_start.value_or(n);
  if (s.floor_start) {
    std::ostringstream os;
    os << s.name << ": error plateau from " << s.parameter << " = " << s.params[*s.floor_start];
    warn(os.str());
  }
  if (usable >= 2) {
    const std::size_t first = usable >= 3 ? usable - 3 : 0;
    s.slope = loglog_slope(std::span<const double>(s.params).subspan(first, usable - first),
                           std::span<const double>(s.errors).subspan(first, usable - first));
  }
  bool ok = true;
  if (usable < 3) {
    ok = s.slope_min == -std::numeric_limits<double>::infinity();
    s.note = "fewer than three points above the floor";
  } else {
    ok = s.slope >= s.slope_min && s.slope <= s.slope_max;
  }
  if (s.require_monotone && !s.monotone) {
    ok = false;
    if (!s.note.empty()) s.note += "; ";
    s.note += "not monotone";
  }
  s.passed = ok;
}

RateStudy make_study(std::string name, std::string description, std::vector<double> params,
                     std::vector<double> errors, double target, double slope_min, double slope_max,
                     bool require_monotone) {
  RateStudy s;
  s.name = std::move(name);
  s.description = std::move(description);
  s.params = std::move(params);
  s.errors = std::move(errors);
  s.target_slope = target;
  s.slope_min = slope_min;
  s.slope_max = slope_max;
  s.require_monotone = require_monotone;
  evaluate_study(s);
  return s;
}

// ------------------------------------------------------------ kinematics

KinematicsTestFunctions KinematicsTestFunctions::preset(int dim) {
  KinematicsTestFunctions f;
  f.v = [](const Vec& x) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) s += (k + 1) * x(k);
    return std::sin(s) + 0.5 * x.squaredNorm();
  };
  f.grad_v = [](const Vec& x) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) s += (k + 1) * x(k);
    Vec g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) g(k) = (k + 1) * std::cos(s) + x(k);
    return g;
  };
  f.w = [](double t, const Vec& x) { return std::exp(-t) * std::cos(x(0)) * (1.0 + x.squaredNorm()); };
  f.grad_w = [](double t, const Vec& x) {
    Vec g = 2.0 * std::cos(x(0)) * x;
    g(0) -= std::sin(x(0)) * (1.0 + x.squaredNorm());
    return Vec(std::exp(-t) * g);
  };
  (void)dim;
  return f;
}

namespace {

std::vector<Vec> lattice_points(const Box& box, int n) {
  const int d = box.dim();
  std::vector<Vec> pts;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec x(d);
    for (int k = 0; k < d; ++k) x(k) = box.lower(k) + (idx[k] + 0.5) / n * (box.upper(k) - box.lower(k));
    pts.push_back(x);
    int k = 0;
    while (k < d && ++idx[k] == n) idx[k++] = 0;
    if (k == d) break;
  }
  return pts;
}

struct WeightedPoints {
  std::vector<Vec> points;
  std::vector<double> weights;
};

WeightedPoints composite_gauss(const Box& box, int cells, int gauss) {
  const auto& g = gauss_legendre(gauss);
  const int d = box.dim();
  const int per_axis = cells * gauss;
  WeightedPoints out;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec x(d);
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      const int c = idx[k] / gauss, q = idx[k] % gauss;
      const double h = (box.upper(k) - box.lower(k)) / cells;
      x(k) = box.lower(k) + (c + g.nodes[q]) * h;
      w *= g.weights[q] * h;
    }
    out.points.push_back(x);
    out.weights.push_back(w);
    int k = 0;
    while (k < d && ++idx[k] == per_axis) idx[k++] = 0;
    if (k == d) break;
  }
  return out;
}

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

std::vector<RateStudy> kinematics_rates(const VelocityField& velocity, const std::vector<double>& eps_grid,
                                        const KinematicsTestFunctions& fn, const KinematicsOptions& options) {
  const int d = velocity.dim();
  const Box box = velocity.support_box();
  const std::vector<Vec> sup_pts = lattice_points(box, options.sup_lattice);
  const WeightedPoints quad = composite_gauss(box, options.cells, options.gauss);
  const auto& tq = gauss_legendre(options.time_points);
  const Mat id = Mat::Identity(d, d);

  struct Sample {
    Vec x, v;
    Mat j;
    double div;
  };
  auto make_samples = [&](const std::vector<Vec>& pts) {
    std::vector<Sample> out;
    out.reserve(pts.size());
    for (const Vec& x : pts) {
      const Mat j = velocity.jac(x);
      out.push_back({x, velocity.eval(x), j, j.trace()});
    }
    return out;
  };
  const std::vector<Sample> sup_s = make_samples(sup_pts);
  const std::vector<Sample> quad_s = make_samples(quad.points);

  std::vector<std::vector<double>> errors(9, std::vector<double>(eps_grid.size(), 0.0));
  parallel_for(eps_grid.size(), 0, [&](std::size_t ie) {
    const double eps = eps_grid[ie];
    double e[4] = {0, 0, 0, 0};
    for (const Sample& s : sup_s) {
      const TransportedCoefficients tc = transported_coefficients_from_jacobian(s.j, eps);
      e[0] = std::max(e[0], std::abs(tc.gamma - 1.0));
      e[1] = std::max(e[1], std::abs((tc.gamma - 1.0) / eps - s.div));
      e[2] = std::max(e[2], max_abs(tc.a_matrix - id));
      e[3] = std::max(e[3], max_abs((tc.a_matrix - id) / eps - tc.a_prime0));
    }
    for (int k = 0; k < 4; ++k) errors[k][ie] = e[k];

    std::vector<double> t4, t5, t6, t7, t8;
    for (std::size_t i = 0; i < quad_s.size(); ++i) {
      const Sample& s = quad_s[i];
      const double w = quad.weights[i];
      const double gamma = transported_coefficients_from_jacobian(s.j, eps).gamma;
      const Vec y = s.x + eps * s.v;
      const double v0 = fn.v(s.x);
      const Vec gv = fn.grad_v(s.x);
      const double vy = fn.v(y);
      const double r5 = (vy - v0) / eps - s.v.dot(gv);
      const double r6 = (gamma * vy - v0) / eps - (gv.dot(s.v) + v0 * s.div);
      t5.push_back(w * r5 * r5);
      t6.push_back(w * r6 * r6);
      for (std::size_t q = 0; q < tq.nodes.size(); ++q) {
        const double t = tq.nodes[q] * fn.final_time;
        const double wt = w * tq.weights[q] * fn.final_time;
        const double w0 = fn.w(t, s.x);
        const double wy = fn.w(t, y);
        const double r4 = wy * gamma - w0;
        const double r7 = (wy - w0) / eps - s.v.dot(fn.grad_w(t, s.x));
        const double r8 = (gamma - 1.0) / eps * wy - w0 * s.div;
        t4.push_back(wt * r4 * r4);
        t7.push_back(wt * r7 * r7);
        t8.push_back(wt * r8 * r8);
      }
    }
    errors[4][ie] = std::sqrt(pairwise_sum(t4));
    errors[5][ie] = std::sqrt(pairwise_sum(t5));
    errors[6][ie] = std::sqrt(pairwise_sum(t6));
    errors[7][ie] = std::sqrt(pairwise_sum(t7));
    errors[8][ie] = std::sqrt(pairwise_sum(t8));
  });

  const char* names[9] = {"jacobian_determinant",      "jacobian_determinant_quotient",
                          "diffusion_matrix",          "diffusion_matrix_quotient",
                          "weighted_pullback_l2l2",    "pullback_quotient_l2",
                          "weighted_pullback_quotient_l2", "pullback_quotient_l2l2",
                          "determinant_quotient_l2l2"};
  const char* desc[9] = {"sup |gamma - 1|",
                         "sup |(gamma - 1)/eps - div V|",
                         "sup |A - I|",
                         "sup |(A - I)/eps - A'(0)|",
                         "||(w o T) gamma - w||_{L2L2}",
                         "||(v o T - v)/eps - V.grad v||_{L2}",
                         "||(gamma v o T - v)/eps - div(v V)||_{L2}",
                         "||(w o T - w)/eps - V.grad w||_{L2L2}",
                         "||(gamma - 1)/eps w o T - w div V||_{L2L2}"};
  std::vector<RateStudy> out;
  for (int k = 0; k < 9; ++k) out.push_back(make_study(names[k], desc[k], eps_grid, errors[k], 1.0, 0.9, 1.1));
  return out;
}

CheckResult a_prime_fd_check(const VelocityField& velocity, int probes, double h, std::uint64_t seed,
                             double tolerance) {
  const Box box = velocity.support_box();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Vec x(box.dim());
    for (int k = 0; k < box.dim(); ++k) x(k) = box.lower(k) + u(rng) * (box.upper(k) - box.lower(k));
    const Mat j = velocity.jac(x);
    const Mat fd = (diffusion_matrix_by_inversion(j, h) - diffusion_matrix_by_inversion(j, -h)) / (2.0 * h);
    worst = std::max(worst, max_abs(fd - transported_coefficients_from_jacobian(j, 0.0).a_prime0));
  }
  CheckResult c;
  c.name = "a_prime_finite_difference";
  c.description = "max |A'(0) - central difference of A| over random probes";
  c.value = worst;
  c.threshold = tolerance;
  c.passed = worst <= tolerance;
  return c;
}

// ------------------------------------------------------------ solver rates

double manufactured_square_solution(double t, const Vec& x) {
  constexpr double pi = std::numbers::pi;
  return std::exp(-t) * std::sin(pi * x(0)) * std::sin(pi * x(1));
}

SourceData manufactured_square_data() {
  constexpr double pi = std::numbers::pi;
  SourceData d;
  d.name = "manufactured";
  d.f = [](double t, const Vec& x) { return (2.0 * pi * pi - 1.0) * manufactured_square_solution(t, x); };
  d.g = [](const Vec& x) { return manufactured_square_solution(0.0, x); };
  d.grad_g = [](const Vec& x) {
    return make_vec({pi * std::cos(pi * x(0)) * std::sin(pi * x(1)), pi * std::sin(pi * x(0)) * std::cos(pi * x(1))});
  };
  return d;
}

RateStudy mms_spatial_study(const std::vector<int>& cells_per_side, int steps, TimeScheme scheme) {
  const SourceData data = manufactured_square_data();
  const TimeGrid grid(1.0, steps);
  std::vector<double> h, err(cells_per_side.size());
  for (int n : cells_per_side) h.push_back(1.0 / n);
  parallel_for(cells_per_side.size(), 0, [&](std::size_t i) {
    auto mesh = std::make_shared<Mesh>(Mesh::unit_square(cells_per_side[i]));
    const FeSpace space(mesh);
    SpaceTimeField u = solve_heat_dirichlet(space, grid, data, {scheme});
    for (int j = 0; j <= steps; ++j) {
      u.snapshots[j] -= space.interpolate([&](const Vec& x) { return manufactured_square_solution(grid.t(j), x); });
    }
    err[i] = compute_norm(space, u, NormKind::L2L2);
  });
  RateStudy s = make_study("mms_spatial_l2l2", "L2L2 error against the exact solution", h, err, 2.0, 1.8, 2.2);
  s.parameter = "h";
  return s;
}

RateStudy mms_temporal_study(int cells_per_side, const std::vector<int>& steps, int reference_steps,
                             TimeScheme scheme) {
  const SourceData data = manufactured_square_data();
  auto mesh = std::make_shared<Mesh>(Mesh::unit_square(cells_per_side));
  const FeSpace space(mesh);
  const DiscreteNorms norms(space);
  const SpaceTimeField ref = solve_heat_dirichlet(space, TimeGrid(1.0, reference_steps), data, {scheme});
  std::vector<double> dt, err(steps.size());
  for (int n : steps) {
    if (reference_steps % n != 0) throw std::invalid_argument("reference steps must be a multiple of every step count");
    dt.push_back(1.0 / n);
  }
  parallel_for(steps.size(), 0, [&](std::size_t i) {
    const int n = steps[i];
    SpaceTimeField u = solve_heat_dirichlet(space, TimeGrid(1.0, n), data, {scheme});
    for (int j = 0; j <= n; ++j) u.snapshots[j] -= ref.snapshots[j * (reference_steps / n)];
    err[i] = compute_norm(norms, u, NormKind::L2L2);
  });
  const double target = scheme == TimeScheme::crank_nicolson ? 2.0 : 1.0;
  RateStudy s = make_study("mms_temporal_l2l2", "L2L2 difference to a fine-step solution on the same mesh", dt, err,
                           target, target - 0.2, target + 0.2);
  s.parameter = "dt";
  return s;
}

namespace {

SparseMatrix restrict_interior(const SparseMatrix& a, const std::vector<int>& interior, std::size_t n) {
  std::vector<int> pos(n, -1);
  for (std::size_t k = 0; k < interior.size(); ++k) pos[interior[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> t;
  for (int c = 0; c < a.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(a, c); it; ++it) {
      const int r = pos[it.row()], cc = pos[it.col()];
      if (r >= 0 && cc >= 0) t.emplace_back(r, cc, it.value());
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(interior.size()), static_cast<Eigen::Index>(interior.size()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

VectorXd gather(const VectorXd& v, const std::vector<int>& idx) {
  VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(k) = v(idx[k]);
  return out;
}

struct RandomSmoothData {
  double a[4], kx[4], ky[4], om[4], ph[4];
  double b[3], gx[3], gy[3];

  explicit RandomSmoothData(std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> wave(0.0, 3.0), phase(0.0, 2.0 * std::numbers::pi);
    for (int k = 0; k < 4; ++k) {
      a[k] = n01(rng);
      kx[k] = wave(rng);
      ky[k] = wave(rng);
      om[k] = wave(rng);
      ph[k] = phase(rng);
    }
    for (int k = 0; k < 3; ++k) {
      b[k] = n01(rng);
      gx[k] = wave(rng);
      gy[k] = wave(rng);
    }
  }
  double f(double t, const Vec& x) const {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += a[k] * std::sin(kx[k] * x(0) + ky[k] * x(1) + om[k] * t + ph[k]);
    return s;
  }
  double g(const Vec& x) const {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += b[k] * std::cos(gx[k] * x(0) + gy[k] * x(1));
    return s;
  }
};

}  // namespace

EnergyEstimateResult energy_estimate_checks(std::shared_ptr<const FeSpace> space_ptr,
                                            const std::vector<double>& final_times, int datasets, double dt,
                                            std::uint64_t seed) {
  const FeSpace& space = *space_ptr;
  const std::vector<int>& in = space.interior_dofs();
  const std::size_t n = space.num_dofs();
  const SparseMatrix m = assemble_mass(space);
  const SparseMatrix k = assemble_stiffness(space);
  const SparseMatrix m_ii = restrict_interior(m, in, n);
  const SparseMatrix k_ii = restrict_interior(k, in, n);
  const SparseMatrix h_ii = SparseMatrix(k_ii + m_ii);
  Eigen::SimplicialLDLT<SparseMatrix> m_solver(m_ii), h_solver(h_ii);
  if (m_solver.info() != Eigen::Success || h_solver.info() != Eigen::Success) {
    throw NumericalError("energy check factorization failed");
  }
  const double lambda = smallest_dirichlet_eigenvalue(space);
  const double cp = 1.0 + 1.0 / lambda;

  EnergyEstimateResult res;
  res.constant_l2 = cp * cp;
  res.constant_h1 = 2.0 * cp;  // sup and integral are bounded separately
  res.final_times = final_times;
  res.datasets = static_cast<std::size_t>(datasets);

  std::mt19937_64 rng(seed);
  std::vector<RandomSmoothData> data;
  for (int i = 0; i < datasets; ++i) data.emplace_back(rng);

  const std::size_t jobs = data.size() * final_times.size();
  std::vector<double> r1(jobs), r2(jobs);
  parallel_for(jobs, 0, [&](std::size_t job) {
    const RandomSmoothData& rd = data[job / final_times.size()];
    const double T = final_times[job % final_times.size()];
    const int steps = std::max(1, static_cast<int>(std::lround(T / dt)));
    const TimeGrid grid(T, steps);
    ThetaStepper stepper(space, grid, m, k, TimeScheme::crank_nicolson);
    const auto load = source_interval_load(space, grid, [&](double t, const Vec& x) { return rd.f(t, x); },
                                           TimeScheme::crank_nicolson);
    VectorXd g = space.interpolate([&](const Vec& x) { return rd.g(x); });
    const SpaceTimeField u = stepper.march(g, load, {});
    const VectorXd g0 = gather(u.snapshots[0], in);
    const double g_l2 = g0.dot(m_ii * g0);
    const double g_h1 = g0.dot(h_ii * g0);

    double lhs1 = 0.0, rhs1 = 0.0, lhs2 = 0.0, rhs2 = 0.0, worst1 = 0.0, worst2 = 0.0;
    double int_u = 0.0, int_f1 = 0.0, int_ut = 0.0, int_f2 = 0.0, sup_h1 = g_h1;
    for (int j = 0; j < steps; ++j) {
      const VectorXd a = gather(u.snapshots[j], in), b = gather(u.snapshots[j + 1], in);
      const VectorXd mid = 0.5 * (a + b), inc = (b - a) / grid.dt();
      const VectorXd bj = gather(load(j), in);
      int_u += grid.dt() * mid.dot(h_ii * mid);
      int_ut += grid.dt() * inc.dot(m_ii * inc);
      int_f1 += grid.dt() * bj.dot(h_solver.solve(bj));
      int_f2 += grid.dt() * bj.dot(m_solver.solve(bj));
      sup_h1 = std::max(sup_h1, b.dot(h_ii * b));
      lhs1 = b.dot(m_ii * b) + int_u;
      rhs1 = g_l2 + int_f1;
      lhs2 = sup_h1 + int_ut;
      rhs2 = g_h1 + int_f2;
      if (rhs1 > 0.0) worst1 = std::max(worst1, lhs1 / rhs1);
      if (rhs2 > 0.0) worst2 = std::max(worst2, lhs2 / rhs2);
    }
    r1[job] = worst1;
    r2[job] = worst2;
  });
  for (std::size_t j = 0; j < jobs; ++j) {
    res.max_ratio_l2 = std::max(res.max_ratio_l2, r1[j]);
    res.max_ratio_h1 = std::max(res.max_ratio_h1, r2[j]);
  }
  CheckResult c1{"energy_estimate_l2",
                 "max over data and T of (|u(t)|^2 + int |u|_H1^2) / (|g|^2 + int |f|_H-1^2)",
                 res.max_ratio_l2, res.constant_l2, res.max_ratio_l2 <= res.constant_l2, ""};
  CheckResult c2{"energy_estimate_h1",
                 "max over data and T of (sup |u|_H1^2 + int |u_t|^2) / (|g|_H1^2 + int |f|^2)",
                 res.max_ratio_h1, res.constant_h1, res.max_ratio_h1 <= res.constant_h1, ""};
  res.checks = {c1, c2};
  return res;
}

// ------------------------------------------------------------ derivatives

DerivativeRates derivative_rates(const SensitivityProblem& p, const std::vector<double>& eps_grid,
                                 const DerivativeRateOptions& options) {
  const FeSpace& space = p.space();
  const DiscreteNorms norms(space);
  DerivativeRates out;
  out.z = material_derivative(p);
  out.uprime = shape_derivative(p);

  const std::size_t ne = eps_grid.size();
  std::vector<std::array<double, 5>> e(ne);
  parallel_for(ne, options.workers, [&](std::size_t i) {
    const double eps = eps_grid[i];
    const SpaceTimeField ue = solve_pulled_back(space, p.grid(), p.data(), PerturbationMap{p.velocity(), eps}, p.options());
    const SpaceTimeField diff = ue - p.u0();
    const SpaceTimeField dq = (1.0 / eps) * diff - out.z;
    e[i] = {compute_norm(norms, diff, NormKind::CL2), compute_norm(norms, diff, NormKind::L2H1),
            time_derivative_norm(norms, diff, NormKind::L2Hminus1), compute_norm(norms, dq, NormKind::CL2),
            compute_norm(norms, dq, NormKind::L2H1)};
  });
  auto column = [&](int k) {
    std::vector<double> v;
    for (const auto& row : e) v.push_back(row[k]);
    return v;
  };
  const double inf = std::numeric_limits<double>::infinity();
  out.studies.push_back(make_study("pullback_difference_cl2", "max_t ||u_eps o T - u0||_{L2}", eps_grid, column(0), 1.0, 0.8, inf, true));
  out.studies.push_back(make_study("pullback_difference_l2h1", "||u_eps o T - u0||_{L2H1}", eps_grid, column(1), 1.0, 0.8, inf, true));
  out.studies.push_back(make_study("pullback_difference_dt_hminus1", "||d/dt (u_eps o T - u0)||_{L2H-1}", eps_grid, column(2), 1.0, 0.8, inf, true));
  out.studies.push_back(make_study("material_quotient_cl2", "max_t ||(u_eps o T - u0)/eps - z||_{L2}", eps_grid, column(3), 1.0, 0.8, inf));
  out.studies.push_back(make_study("material_quotient_l2h1", "||(u_eps o T - u0)/eps - z||_{L2H1}", eps_grid, column(4), 1.0, 0.8, inf));
  for (std::size_t k = 0; k < 3; ++k) out.studies[k].conjectured = true;

  if (options.compact) {
    const Mesh& mesh = space.mesh();
    std::vector<char> mask(mesh.num_cells(), 0);
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      bool inside = true;
      for (int v = 0; v <= mesh.dim(); ++v) inside = inside && options.compact(mesh.vertex(mesh.cell(c)[v]));
      mask[c] = inside;
    }
    const DiscreteNorms nk(space, mask);
    out.compact_floor = compute_norm(nk, out.z - out.uprime, NormKind::L2H1);
    const std::vector<double>& grid = options.compact_eps_grid.empty() ? eps_grid : options.compact_eps_grid;
    std::vector<double> ce(grid.size());
    parallel_for(grid.size(), options.workers, [&](std::size_t i) {
      const PerturbationMap map{p.velocity(), grid[i]};
      auto moved = std::make_shared<Mesh>(mesh.mapped([&](const Vec& x) { return apply(map, x); }));
      const FeSpace moved_space(moved);
      SpaceTimeField ue = solve_heat_dirichlet(moved_space, p.grid(), p.data(), p.options());
      ue.mesh = space.mesh_ptr();
      ce[i] = compute_norm(nk, (1.0 / grid[i]) * (ue - p.u0()) - out.uprime, NormKind::L2H1);
    });
    RateStudy s = make_study("compact_shape_quotient_l2h1", "||(u_eps - u0)/eps - u'||_{L2H1(K)}", grid, ce, 1.0,
                             -inf, inf, true);
    out.studies.push_back(s);
    CheckResult c;
    c.name = "compact_floor";
    c.description = "final compact-subset error against 3 x ||z - u'||_{L2H1(K)}";
    c.value = ce.back();
    c.threshold = 3.0 * out.compact_floor;
    c.passed = c.value <= c.threshold;
    out.checks.push_back(c);
  }
  return out;
}

double shape_identity_discrepancy(const SensitivityProblem& p, const SpaceTimeField& z, const SpaceTimeField& uprime) {
  const SpaceTimeField other = shape_from_material(z, p);
  const double base = compute_norm(p.space(), uprime, NormKind::L2L2);
  const double diff = compute_norm(p.space(), uprime - other, NormKind::L2L2);
  return base > 0.0 ? diff / base : diff;
}

// ------------------------------------------------------------ cross-check

double relative_deviation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("deviation needs equally long series");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den > 0.0 ? num / den : num;
}

CrosscheckReport crosscheck_bem_fem(const SensitivityProblem& p, const SpaceTimeField& uprime,
                                    const BoundaryElementMesh& mesh, const CausalOperator& v_op,
                                    const std::vector<Probe>& probes) {
  const TimeGrid& grid = p.grid();
  if (v_op.lags() != grid.N || std::abs(v_op.grid.dt() - grid.dt()) > 1e-12 * grid.dt()) {
    throw std::invalid_argument("operator and finite element time grids differ");
  }
  const FeSpace& space = p.space();
  std::vector<Vec> pts;
  for (int v : space.mesh().boundary_vertices()) pts.push_back(space.mesh().vertex(v));
  const auto trace = vertex_trace(mesh, pts, shape_boundary_datum(p));
  const BoundaryDensity load = load_from_vertex_values(mesh, grid, trace);
  const BoundaryDensity psi = solve_boundary_equation(v_op, mesh, load, EquationKind::first);

  CrosscheckReport r;
  r.probes = probes;
  r.bem = represent_interior(mesh, psi, probes);
  for (const Probe& pr : probes) {
    const double k = pr.t / grid.dt();
    const int j = static_cast<int>(std::lround(k));
    if (std::abs(k - j) > 1e-9 || j < 0 || j > grid.N) throw std::invalid_argument("probe time is not a grid node");
    r.fem.push_back(space.evaluate(uprime.snapshots[j], pr.x));
  }
  r.max_relative_deviation = relative_deviation(r.bem, r.fem);
  return r;
}

// ------------------------------------------------------------ benchmarks

DiskBenchmark disk_benchmark(int rings, int steps, double final_time, int probes) {
  DiskBenchmark b{.boundary = std::make_shared<Circle>(),
                  .space = std::make_shared<FeSpace>(std::make_shared<Mesh>(Mesh::disk(1.0, rings))),
                  .grid = TimeGrid(final_time, steps),
                  .data = {},
                  .kappa = std::make_shared<AnalyticBoundaryFunction>(
                      [](const Vec& q) { return std::cos(q(0)) + 0.5 * std::sin(2.0 * q(0)); },
                      [](const Vec& q) { return make_vec({-std::sin(q(0)) + std::cos(2.0 * q(0))}); }, 1.5, 2.0),
                  .model = nullptr,
                  .domain = Box::cube(2, -2.0, 2.0),
                  .velocity = VelocityField::zero(Box::cube(2, -2.0, 2.0)),
                  .probe_points = {}};
  b.data.name = "disk";
  b.data.f = [](double t, const Vec& x) { return 8.0 * t * (1.0 + 0.5 * x(0)); };
  b.data.g = [](const Vec&) { return 0.0; };
  b.data.grad_g = [](const Vec&) { return Vec(Vec::Zero(2)); };
  b.model = std::make_shared<KappaModel>(
      2, std::vector<KappaMode>{
             {BoundaryMode{BoundaryMode::Kind::cosine, 1}, CoefficientLaw{CoefficientLaw::Kind::uniform, 1.0}},
             {BoundaryMode{BoundaryMode::Kind::sine, 2}, CoefficientLaw{CoefficientLaw::Kind::uniform, 0.5}}});
  b.velocity = velocity_from_kappa(b.boundary, b.kappa, b.domain);
  for (int k = 0; k < probes; ++k) {
    const double a = 2.0 * std::numbers::pi * k / probes + 0.3;
    b.probe_points.push_back(make_vec({0.5 * std::cos(a), 0.5 * std::sin(a)}));
  }
  return b;
}

SensitivityProblem disk_problem(const DiskBenchmark& bench, const SolverOptions& options) {
  SensitivityProblem p(bench.space, bench.grid, bench.data, bench.velocity, options);
  p.flux_method = FluxMethod::variational;
  p.boundary_normal = [](const Vec& x) { return Vec(x / x.norm()); };
  return p;
}

std::vector<Probe> probes_at(const std::vector<Vec>& points, const std::vector<double>& times) {
  std::vector<Probe> out;
  for (double t : times) {
    for (const Vec& x : points) out.push_back({t, x});
  }
  return out;
}

// ------------------------------------------------------------ reports

void write_report(std::ostream& os, const std::string& title, const std::vector<RateStudy>& studies,
                  const std::vector<CheckResult>& checks) {
  os << title << "\n\n";
  os << std::setprecision(6);
  for (const RateStudy& s : studies) {
    os << (s.passed ? "PASS " : "FAIL ") << s.name << "  " << s.description << '\n';
    for (std::size_t i = 0; i < s.params.size(); ++i) {
      os << "    " << s.parameter << " = " << std::setw(12) << s.params[i] << "   error = " << std::setw(12)
         << s.errors[i];
      if (s.floor_start && i >= *s.floor_start) os << "   (floor)";
      os << '\n';
    }
    os << "    slope = " << s.slope << "  band [" << s.slope_min << ", " << s.slope_max << "]";
    if (s.require_monotone) os << (s.monotone ? "  monotone" : "  NOT monotone");
    if (s.conjectured) os << "  (conjectured rate)";
    if (!s.note.empty()) os << "  " << s.note;
    os << "\n\n";
  }
  for (const CheckResult& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.description << "\n    value = " << c.value
       << "  threshold = " << c.threshold;
    if (!c.note.empty()) os << "  " << c.note;
    os << "\n\n";
  }
  os << (all_passed(studies, checks) ? "ALL PASS" : "SOME CHECKS FAILED") << '\n';
}

void write_studies_csv(std::ostream& os, const std::vector<RateStudy>& studies) {
  os << "study,index,parameter,error,on_floor,slope,passed\n";
  os << std::setprecision(12);
  for (const RateStudy& s : studies) {
    for (std::size_t i = 0; i < s.params.size(); ++i) {
      os << s.name << ',' << i << ',' << s.params[i] << ',' << s.errors[i] << ','
         << (s.floor_start && i >= *s.floor_start ? 1 : 0) << ',' << s.slope << ',' << (s.passed ? 1 : 0) << '\n';
    }
  }
}

void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& checks) {
  os << "check,value,threshold,passed\n";
  os << std::setprecision(12);
  for (const CheckResult& c : checks) os << c.name << ',' << c.value << ',' << c.threshold << ',' << (c.passed ? 1 : 0) << '\n';
}

bool all_passed(const std::vector<RateStudy>& studies, const std::vector<CheckResult>& checks) {
  for (const RateStudy& s : studies) {
    if (!s.passed) return false;
  }
  for (const CheckResult& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

}  // namespace shapeuq
