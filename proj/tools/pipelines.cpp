#include "pipelines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace shapeuq::cli {

namespace {

// Seed offsets from monte_carlo.seed for the auxiliary random draws.
constexpr std::uint64_t kSeedFd = 1;
constexpr std::uint64_t kSeedRoundtrip = 2;
constexpr std::uint64_t kSeedEnergy = 3;

class StageTimer {
 public:
  StageTimer(RunContext& ctx, std::string name)
      : ctx_(ctx), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    ctx_.wall_times[name_] = ctx_.wall_times.value(name_, 0.0) + s;
  }

 private:
  RunContext& ctx_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

std::shared_ptr<const BoundaryFunction> kappa_function(const std::vector<KappaTerm>& terms) {
  std::vector<std::pair<BoundaryMode, double>> modes;
  double sup = 0.0, grad_sup = 0.0;
  for (const KappaTerm& t : terms) {
    BoundaryMode m{t.kind, t.frequency};
    sup += std::abs(t.coefficient) * m.sup_norm();
    grad_sup += std::abs(t.coefficient) * m.gradient_sup_bound();
    modes.emplace_back(m, t.coefficient);
  }
  return std::make_shared<AnalyticBoundaryFunction>(
      [modes](const Vec& q) {
        double v = 0.0;
        for (const auto& [m, c] : modes) v += c * m.value(q);
        return v;
      },
      [modes](const Vec& q) {
        Vec g = Vec::Zero(1);
        for (const auto& [m, c] : modes) g += c * m.param_gradient(q);
        return g;
      },
      sup, grad_sup);
}

SourceData disk_data() {
  SourceData d;
  d.name = "disk";
  d.f = [](double t, const Vec& x) { return 8.0 * t * (1.0 + 0.5 * x(0)); };
  d.g = [](const Vec&) { return 0.0; };
  d.grad_g = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
  return d;
}

void add_section(RunContext& ctx, const std::string& title, const std::vector<RateStudy>& studies,
                 const std::vector<CheckResult>& checks) {
  std::ostringstream os;
  write_report(os, title, studies, checks);
  ctx.report += os.str() + "\n";
  ctx.studies.insert(ctx.studies.end(), studies.begin(), studies.end());
  ctx.checks.insert(ctx.checks.end(), checks.begin(), checks.end());
}

void write_tables(RunContext& ctx, const std::string& stem, const std::vector<RateStudy>& studies,
                  const std::vector<CheckResult>& checks) {
  if (!studies.empty()) ctx.out.write_with(stem + "_studies.csv", [&](std::ostream& os) { write_studies_csv(os, studies); });
  if (!checks.empty()) ctx.out.write_with(stem + "_checks.csv", [&](std::ostream& os) { write_checks_csv(os, checks); });
}

CheckResult make_check(std::string name, std::string description, double value, double threshold,
                       bool passed, std::string note = {}) {
  return CheckResult{std::move(name), std::move(description), value, threshold, passed, std::move(note)};
}

const SpaceTimeField& reference(RunContext& ctx, Scenario& sc) {
  if (!sc.u0) {
    StageTimer timer(ctx, "reference_solve");
    sc.u0 = solve_heat_dirichlet(*sc.space, sc.grid, sc.data, sc.solver);
  }
  return *sc.u0;
}

SensitivityProblem make_problem(RunContext& ctx, Scenario& sc) {
  SensitivityProblem p(sc.space, reference(ctx, sc), sc.data, sc.velocity, sc.solver);
  p.flux_method = FluxMethod::variational;
  if (sc.exact_normal) p.boundary_normal = sc.exact_normal;
  return p;
}

const BoundaryElementMesh& boundary_mesh(Scenario& sc) {
  if (!sc.bem_mesh) {
    const BemConfig& b = sc.config->bem;
    if (b.elements == 0) {
      sc.bem_mesh = BoundaryElementMesh::from_mesh(sc.space->mesh());
    } else if (sc.circle) {
      sc.bem_mesh = BoundaryElementMesh::circle(sc.circle->radius(), b.elements, sc.circle->center());
    } else {
      if (b.elements % 4 != 0) throw ConfigError("bem.elements", "square boundary needs a multiple of 4 elements");
      const int per = b.elements / 4;
      const std::array<Vec, 4> corners{make_vec({0.0, 0.0}), make_vec({1.0, 0.0}), make_vec({1.0, 1.0}),
                                       make_vec({0.0, 1.0})};
      std::vector<Vec> v;
      for (int s = 0; s < 4; ++s) {
        for (int k = 0; k < per; ++k) v.push_back(corners[s] + (corners[(s + 1) % 4] - corners[s]) * (double(k) / per));
      }
      sc.bem_mesh = BoundaryElementMesh(std::move(v));
    }
  }
  return *sc.bem_mesh;
}

AssemblyOptions assembly_options(const RunConfig& c) {
  return AssemblyOptions{c.bem.gauss_far, c.bem.gauss_near, c.workers};
}

const CausalOperator& single_layer(RunContext& ctx, Scenario& sc) {
  if (!sc.v_op) {
    StageTimer timer(ctx, "assemble_V");
    sc.v_op = assemble(boundary_mesh(sc), sc.grid, OperatorKind::V, assembly_options(*sc.config));
  }
  return *sc.v_op;
}

const CausalOperator& double_layer(RunContext& ctx, Scenario& sc) {
  if (!sc.k_op) {
    StageTimer timer(ctx, "assemble_K");
    sc.k_op = assemble(boundary_mesh(sc), sc.grid, OperatorKind::K, assembly_options(*sc.config));
  }
  return *sc.k_op;
}

const SpaceTimeField& shape_derivative_field(RunContext& ctx, Scenario& sc) {
  if (!sc.uprime) {
    const SensitivityProblem p = make_problem(ctx, sc);
    StageTimer timer(ctx, "shape_derivative");
    sc.uprime = shape_derivative(p);
  }
  return *sc.uprime;
}

void require_random_model(const Scenario& sc) {
  if (!sc.circle || !sc.model) throw ConfigError("geometry.preset", "moment pipelines need the disk geometry");
}

FirstKindMomentProblem moment_problem(RunContext& ctx, Scenario& sc) {
  const BoundaryElementMesh& mesh = boundary_mesh(sc);
  const CausalOperator& v = single_layer(ctx, sc);
  FluxOptions fo;
  fo.method = FluxMethod::variational;
  fo.normal = sc.exact_normal;
  fo.source = sc.data.f;
  fo.scheme = sc.solver.scheme;
  const BoundaryFlux flux = boundary_flux(*sc.space, reference(ctx, sc), fo);
  std::vector<Vec> points;
  for (int k : flux.vertices) points.push_back(sc.space->mesh().vertex(k));
  BoundaryDensity coeffs = load_from_vertex_values(mesh, sc.grid, vertex_trace(mesh, points, flux.values));
  const VectorXd mass = boundary_mass_diagonal(mesh, sc.grid);
  for (int k = 0; k < coeffs.intervals(); ++k) coeffs.values.col(k).array() /= mass.array();
  return FirstKindMomentProblem{&mesh, &v, std::move(coeffs), sc.probes};
}

void write_probe_csv(RunContext& ctx, const std::string& name, const std::vector<Probe>& probes,
                     const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
  ctx.out.write_with(name, [&](std::ostream& os) {
    os << "probe,t,x,y";
    for (const auto& [label, _] : columns) os << ',' << label;
    os << '\n';
    for (std::size_t i = 0; i < probes.size(); ++i) {
      os << i << ',' << probes[i].t << ',' << probes[i].x(0) << ',' << probes[i].x(1);
      for (const auto& [_, values] : columns) os << ',' << values[i];
      os << '\n';
    }
  });
}

CheckResult psd_check(const std::string& name, const std::string& description, const CorrelationTensor& c,
                      double floor) {
  const double tr = c.trace();
  const double value = tr > 0.0 ? c.min_eigenvalue() / tr : c.min_eigenvalue();
  std::ostringstream note;
  note << "asymmetry " << c.max_asymmetry();
  return make_check(name, description, value, -floor, c.is_symmetric_psd(floor), note.str());
}

}  // namespace

Scenario build_scenario(const RunConfig& c) {
  Scenario sc;
  sc.config = &c;
  std::shared_ptr<Mesh> mesh;
  if (c.geometry.preset == "disk") {
    auto circle = std::make_shared<Circle>(c.geometry.radius);
    sc.circle = circle;
    mesh = std::make_shared<Mesh>(Mesh::disk(c.geometry.radius, c.geometry.rings));
    sc.domain = Box::cube(2, -2.0 * c.geometry.radius, 2.0 * c.geometry.radius);
    sc.exact_normal = [](const Vec& x) { return Vec(x / x.norm()); };
  } else {
    mesh = std::make_shared<Mesh>(Mesh::unit_square(c.geometry.cells));
    sc.domain = Box::cube(2, -1.0, 2.0);
  }
  sc.space = std::make_shared<FeSpace>(mesh);
  sc.grid = TimeGrid(c.time.final_time, c.time.steps);
  sc.solver.scheme = c.time.scheme;

  if (c.data == "disk") sc.data = disk_data();
  else if (c.data == "manufactured") sc.data = manufactured_square_data();
  else sc.data = SourceData::zero();

  if (c.velocity.preset == "kappa") {
    sc.velocity = velocity_from_kappa(sc.circle, kappa_function(c.velocity.kappa), sc.domain,
                                      CollarOptions{c.velocity.collar_width});
  } else if (c.velocity.preset == "affine") {
    sc.velocity = VelocityField::affine(c.velocity.matrix, c.velocity.offset, c.velocity.center,
                                        RadialCutoff{c.velocity.inner, c.velocity.outer}, sc.domain);
  } else {
    sc.velocity = VelocityField::zero(sc.domain);
  }

  if (sc.circle) sc.model = std::make_shared<KappaModel>(2, c.random_modes, c.amplitude_cap);
  sc.probes = probes_at(c.probes.points, c.probes.times);
  return sc;
}

void run_verify_kinematics(RunContext& ctx, Scenario& sc) {
  StageTimer timer(ctx, "verify_kinematics");
  const Tolerances& tol = ctx.config.tolerances;
  std::vector<RateStudy> studies = kinematics_rates(sc.velocity, ctx.config.studies.kinematics_eps);
  for (RateStudy& s : studies) {
    s.slope_min = tol.kinematics_slope_min;
    s.slope_max = tol.kinematics_slope_max;
    evaluate_study(s);
  }
  const std::uint64_t seed = ctx.config.monte_carlo.seed + kSeedFd;
  ctx.seeds["a_prime_fd"] = seed;
  std::vector<CheckResult> checks{a_prime_fd_check(sc.velocity, ctx.config.studies.fd_probes, 1e-6, seed, tol.a_prime_fd)};
  write_tables(ctx, "kinematics", studies, checks);
  add_section(ctx, "Transport kinematics (velocity " + sc.velocity.name() + ")", studies, checks);
}

void run_solve(RunContext& ctx, Scenario& sc) {
  const SpaceTimeField& u0 = reference(ctx, sc);
  ctx.out.write_with("mesh.txt", [&](std::ostream& os) { sc.space->mesh().write(os); });
  ctx.out.write_with("u0.csv", [&](std::ostream& os) { write_field_csv(os, u0); });
  ctx.out.write_with("u0_probes.csv",
                     [&](std::ostream& os) { write_probe_series_csv(os, *sc.space, u0, ctx.config.probes.points); });
  if (ctx.config.write_vtk) {
    ctx.out.write_with("u0_final.vtk", [&](std::ostream& os) { write_vtk(os, sc.space->mesh(), u0.snapshots.back(), "u0"); });
  }
  double peak = 0.0;
  for (const VectorXd& s : u0.snapshots) peak = std::max(peak, s.cwiseAbs().maxCoeff());
  std::ostringstream os;
  os << "Reference solve\n\n"
     << "    vertices = " << sc.space->num_dofs() << "  cells = " << sc.space->num_cells()
     << "  h = " << sc.space->mesh().h() << "\n    T = " << sc.grid.T << "  steps = " << sc.grid.N
     << "  data = " << sc.data.name << "\n    max |u0| = " << peak << "\n\n";
  ctx.report += os.str();
}

void run_sensitivity(RunContext& ctx, Scenario& sc) {
  const Tolerances& tol = ctx.config.tolerances;
  const SensitivityProblem p = make_problem(ctx, sc);
  DerivativeRateOptions opts;
  opts.workers = ctx.config.workers;
  if (sc.circle) {
    const double r = ctx.config.studies.compact_radius * sc.circle->radius();
    const Vec c = sc.circle->center();
    opts.compact = [r, c](const Vec& x) { return (x - c).norm() <= r + 1e-12; };
    opts.compact_eps_grid = ctx.config.studies.compact_eps;
  }
  DerivativeRates dr = [&] {
    StageTimer timer(ctx, "derivative_rates");
    return derivative_rates(p, ctx.config.studies.derivative_eps, opts);
  }();
  for (RateStudy& s : dr.studies) {
    s.slope_min = tol.derivative_order;
    evaluate_study(s);
  }
  for (CheckResult& c : dr.checks) {
    if (c.name == "compact_floor") {
      c.threshold = tol.compact_floor_factor * dr.compact_floor;
      c.passed = c.value <= c.threshold;
    }
  }
  const double disc = shape_identity_discrepancy(p, dr.z, dr.uprime);
  dr.checks.push_back(make_check("shape_identity", "||u' - (z - P(grad u0 . V))||_{L2L2} / ||u'||_{L2L2}", disc,
                                 tol.identity, disc <= tol.identity));
  sc.uprime = dr.uprime;

  ctx.out.write_with("z.csv", [&](std::ostream& os) { write_field_csv(os, dr.z); });
  ctx.out.write_with("uprime.csv", [&](std::ostream& os) { write_field_csv(os, dr.uprime); });
  ctx.out.write_with("uprime_probes.csv",
                     [&](std::ostream& os) { write_probe_series_csv(os, *sc.space, dr.uprime, ctx.config.probes.points); });
  if (ctx.config.write_vtk) {
    ctx.out.write_with("uprime_final.vtk",
                       [&](std::ostream& os) { write_vtk(os, sc.space->mesh(), dr.uprime.snapshots.back(), "uprime"); });
  }
  write_tables(ctx, "sensitivity", dr.studies, dr.checks);
  add_section(ctx, "Material and shape derivatives", dr.studies, dr.checks);
}

void run_bem(RunContext& ctx, Scenario& sc) {
  const BoundaryElementMesh& mesh = boundary_mesh(sc);
  const CausalOperator& v = single_layer(ctx, sc);
  const CausalOperator& k = double_layer(ctx, sc);
  StageTimer timer(ctx, "bem_checks");
  const std::uint64_t seed = ctx.config.monte_carlo.seed + kSeedRoundtrip;
  ctx.seeds["bem_roundtrip"] = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  BoundaryDensity psi(mesh.size(), sc.grid);
  for (Eigen::Index i = 0; i < psi.values.size(); ++i) psi.values.data()[i] = normal(rng);

  std::vector<CheckResult> checks;
  const MarchingSolver solver(v, mesh, EquationKind::first);
  const BoundaryDensity back = solver.solve(apply(v, psi));
  const double rt = (back.values - psi.values).norm() / psi.values.norm();
  std::ostringstream note;
  note << "stepping rcond " << solver.stepping_rcond();
  checks.push_back(make_check("bem_roundtrip", "solve(V, V psi) against a random psi, relative", rt,
                              ctx.config.tolerances.roundtrip, rt <= ctx.config.tolerances.roundtrip, note.str()));

  // Densities switched on at interval k0 must leave earlier moments untouched.
  const int k0 = sc.grid.N / 2;
  BoundaryDensity late = psi;
  late.values.leftCols(k0).setZero();
  double leak = 0.0;
  for (const CausalOperator* op : {&v, &k}) {
    const BoundaryDensity r = apply(*op, late);
    if (k0 > 0) leak = std::max(leak, r.values.leftCols(k0).cwiseAbs().maxCoeff());
  }
  checks.push_back(make_check("bem_causality", "max |(A psi)_k| for k before the support of psi, A = V, K", leak,
                              0.0, leak == 0.0));

  ctx.out.write_with("operator_V.bin", [&](std::ostream& os) { write_operator_binary(os, v); });
  ctx.out.write_with("operator_K.bin", [&](std::ostream& os) { write_operator_binary(os, k); });
  write_tables(ctx, "bem", {}, checks);
  std::ostringstream title;
  title << "Boundary elements (" << mesh.size() << " elements x " << sc.grid.N << " steps)";
  add_section(ctx, title.str(), {}, checks);
}

void run_crosscheck(RunContext& ctx, Scenario& sc) {
  const SpaceTimeField& up = shape_derivative_field(ctx, sc);
  const CausalOperator& v = single_layer(ctx, sc);
  const SensitivityProblem p = make_problem(ctx, sc);
  StageTimer timer(ctx, "crosscheck");
  const CrosscheckReport r = crosscheck_bem_fem(p, up, boundary_mesh(sc), v, sc.probes);
  const double tol = ctx.config.tolerances.crosscheck;
  std::vector<CheckResult> checks{make_check("bem_fem_crosscheck", "max |K0 psi - u'_FEM| / max |u'_FEM| at the probes",
                                             r.max_relative_deviation, tol, r.max_relative_deviation <= tol)};
  write_probe_csv(ctx, "crosscheck.csv", r.probes, {{"fem", r.fem}, {"bem", r.bem}});
  write_tables(ctx, "crosscheck", {}, checks);
  add_section(ctx, "Finite elements against the single-layer representation of u'", {}, checks);
}

void run_moments_bie(RunContext& ctx, Scenario& sc) {
  require_random_model(sc);
  const RunConfig& c = ctx.config;
  const FirstKindMomentProblem problem = moment_problem(ctx, sc);
  const std::vector<Vec> params = element_parameters(*problem.mesh, *sc.circle);
  {
    StageTimer timer(ctx, "correlation_" + c.bem.route);
    sc.correlation = c.bem.route == "dense"
                         ? correlation_first_kind(problem, kappa_covariance_matrix(*sc.model, params), c.workers)
                         : correlation_first_kind_lowrank(problem, kappa_covariance_factor(*sc.model, params), c.workers);
  }
  const CorrelationTensor& cor = sc.correlation->uprime;

  ctx.seeds["linear_mc_base"] = c.monte_carlo.seed;
  SampleEnsemble ens = [&] {
    StageTimer timer(ctx, "linear_mc");
    return mc_linear_uprime(problem, sc.model, params, c.monte_carlo.linear_samples, c.monte_carlo.seed, c.workers);
  }();
  const SampleStatistics st = sample_statistics(ens);

  const double k = c.tolerances.stderr_factor;
  double zmax = 0.0, cmax = 0.0;
  for (Eigen::Index i = 0; i < cor.values.rows(); ++i) {
    const double se = st.covariance.standard_errors(i, i);
    const double d = std::abs(cor.values(i, i) - st.covariance.values(i, i));
    zmax = std::max(zmax, se > 0.0 ? d / se : (d == 0.0 ? 0.0 : INFINITY));
    const double m = std::abs(st.mean(i));
    cmax = std::max(cmax, st.mean_stderr(i) > 0.0 ? m / st.mean_stderr(i) : (m == 0.0 ? 0.0 : INFINITY));
  }
  std::vector<CheckResult> checks;
  std::ostringstream note;
  note << ens.size() << " draws, route " << c.bem.route;
  checks.push_back(make_check("bie_variance_vs_linear_mc",
                              "max_i |Cor[u']_ii - sample variance_i| / stderr_i", zmax, k, zmax <= k, note.str()));
  checks.push_back(make_check("uprime_centering", "max_i |mean u'_i| / stderr_i", cmax, k, cmax <= k));
  checks.push_back(psd_check("bie_correlation_psd", "min eigenvalue / trace of Cor[u']", cor, c.tolerances.psd_floor));
  checks.push_back(psd_check("linear_mc_covariance_psd", "min eigenvalue / trace of the sample covariance of u'",
                             st.covariance, c.tolerances.psd_floor));

  ctx.out.write_with("bie_uprime_correlation.csv", [&](std::ostream& os) { write_correlation_csv(os, cor); });
  ctx.out.write_with("bie_covariance_estimate.csv",
                     [&](std::ostream& os) { write_correlation_csv(os, covariance_estimate(cor, c.epsilon)); });
  ctx.out.write_with("linear_mc_statistics.csv",
                     [&](std::ostream& os) { write_probe_statistics_csv(os, sc.probes, st); });
  ctx.out.write_with("linear_mc_covariance.csv", [&](std::ostream& os) { write_correlation_csv(os, st.covariance); });
  write_tables(ctx, "moments_bie", {}, checks);
  add_section(ctx, "Second moments through the first-kind boundary equation", {}, checks);
}

void run_moments_mc(RunContext& ctx, Scenario& sc) {
  require_random_model(sc);
  const RunConfig& c = ctx.config;
  const SpaceTimeField& u0 = reference(ctx, sc);
  PerturbedSetup setup{sc.space, sc.grid, sc.data, sc.circle, sc.domain, CollarOptions{c.velocity.collar_width},
                       sc.solver, c.monte_carlo.seed, c.workers};
  ctx.seeds["perturbed_mc_base"] = c.monte_carlo.seed;
  PerturbedStatistics mc = [&] {
    StageTimer timer(ctx, "perturbed_mc");
    return mc_perturbed_statistics(sc.model, c.epsilon, c.monte_carlo.samples, sc.probes, setup, &u0);
  }();
  sc.mc_statistics = mc.statistics;
  std::vector<CheckResult> checks{psd_check("perturbed_mc_covariance_psd",
                                            "min eigenvalue / trace of the sample covariance of u_eps o T - u0",
                                            mc.statistics.covariance, c.tolerances.psd_floor)};
  ctx.out.write_with("mc_statistics.csv",
                     [&](std::ostream& os) { write_probe_statistics_csv(os, sc.probes, mc.statistics); });
  ctx.out.write_with("mc_covariance.csv",
                     [&](std::ostream& os) { write_correlation_csv(os, mc.statistics.covariance); });
  ctx.out.write_with("mc_second_moment.csv", [&](std::ostream& os) { write_correlation_csv(os, mc.second_moment); });
  write_tables(ctx, "moments_mc", {}, checks);
  std::ostringstream title;
  title << "Monte Carlo on perturbed domains (" << c.monte_carlo.samples << " samples, eps = " << c.epsilon << ")";
  add_section(ctx, title.str(), {}, checks);
}

void run_full_report(RunContext& ctx, Scenario& sc) {
  const RunConfig& c = ctx.config;
  run_verify_kinematics(ctx, sc);
  run_solve(ctx, sc);

  {
    StageTimer timer(ctx, "solver_studies");
    const StudyConfig& s = c.studies;
    std::vector<RateStudy> studies{mms_spatial_study(s.mms_cells, s.mms_steps, c.time.scheme),
                                   mms_temporal_study(s.mms_temporal_cells, s.mms_temporal_steps,
                                                      s.mms_reference_steps, c.time.scheme)};
    const std::uint64_t seed = c.monte_carlo.seed + kSeedEnergy;
    ctx.seeds["energy_datasets"] = seed;
    auto space = std::make_shared<FeSpace>(std::make_shared<Mesh>(Mesh::disk(1.0, s.energy_rings)));
    const EnergyEstimateResult energy =
        energy_estimate_checks(space, s.energy_times, s.energy_datasets, c.time.final_time / c.time.steps, seed);
    write_tables(ctx, "solver", studies, energy.checks);
    add_section(ctx, "Finite element solver orders and energy estimates", studies, energy.checks);
  }

  run_sensitivity(ctx, sc);
  run_bem(ctx, sc);
  run_crosscheck(ctx, sc);
  if (sc.circle) {
    run_moments_bie(ctx, sc);
    run_moments_mc(ctx, sc);

    const CorrelationTensor est = covariance_estimate(sc.correlation->uprime, c.epsilon);
    const CorrelationTensor& mc = sc.mc_statistics->covariance;
    const double scale = mc.values.cwiseAbs().maxCoeff();
    const double dev = scale > 0.0 ? (est.values - mc.values).cwiseAbs().maxCoeff() / scale
                                   : (est.values - mc.values).cwiseAbs().maxCoeff();
    const double band = scale > 0.0 ? c.tolerances.stderr_factor * mc.standard_errors.maxCoeff() / scale : 0.0;
    const double threshold = std::max(c.tolerances.moments_relative, band);
    std::vector<CheckResult> checks{make_check(
        "covariance_first_order_vs_mc", "max |eps^2 Cor[u'] - Cov_MC| / max |Cov_MC| over probe pairs", dev,
        threshold, dev <= threshold)};
    ctx.out.write_with("covariance_comparison.csv", [&](std::ostream& os) {
      os << "row,col,first_order,monte_carlo,stderr\n";
      for (Eigen::Index i = 0; i < est.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < est.values.cols(); ++j) {
          os << i << ',' << j << ',' << est.values(i, j) << ',' << mc.values(i, j) << ',' << mc.standard_errors(i, j)
             << '\n';
        }
      }
    });
    write_tables(ctx, "covariance_comparison", {}, checks);
    add_section(ctx, "First-order covariance against Monte Carlo", {}, checks);
  }
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"verify-kinematics", "solve",     "sensitivity", "bem",
                                              "moments-mc",        "moments-bie", "crosscheck", "full-report"};
  return names;
}

void run_command(const std::string& command, RunContext& ctx, Scenario& sc) {
  if (command == "verify-kinematics") run_verify_kinematics(ctx, sc);
  else if (command == "solve") run_solve(ctx, sc);
  else if (command == "sensitivity") run_sensitivity(ctx, sc);
  else if (command == "bem") run_bem(ctx, sc);
  else if (command == "moments-mc") run_moments_mc(ctx, sc);
  else if (command == "moments-bie") run_moments_bie(ctx, sc);
  else if (command == "crosscheck") run_crosscheck(ctx, sc);
  else if (command == "full-report") run_full_report(ctx, sc);
  else throw std::invalid_argument("unknown command " + command);
}

}  // namespace shapeuq::cli
