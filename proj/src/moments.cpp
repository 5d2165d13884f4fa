#include "shapeuq/moments.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <exception>
#include <ostream>
#include <unordered_set>

namespace shapeuq {

void SampleEnsemble::add(std::uint64_t seed, VectorXd values) {
  for (std::uint64_t s : seeds_) {
    if (s == seed) throw std::invalid_argument("duplicate seed " + std::to_string(seed) + " in ensemble");
  }
  if (!values_.empty() && values.size() != values_[0].size()) {
    throw std::invalid_argument("ensemble payload shape mismatch");
  }
  seeds_.push_back(seed);
  values_.push_back(std::move(values));
}

MatrixXd SampleEnsemble::matrix() const {
  MatrixXd m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dimension()));
  for (std::size_t i = 0; i < size(); ++i) m.row(static_cast<Eigen::Index>(i)) = values_[i].transpose();
  return m;
}

double MomentTensor::at(const std::vector<std::size_t>& index) const {
  if (index.size() != static_cast<std::size_t>(order)) throw std::invalid_argument("moment index has wrong order");
  std::size_t flat = 0;
  for (std::size_t i : index) {
    if (i >= extent) throw std::out_of_range("moment index out of range");
    flat = flat * extent + i;
  }
  return data[flat];
}

MomentTensor moment_k(const SampleEnsemble& ensemble, int k) {
  if (k < 1) throw std::invalid_argument("moment order must be at least 1");
  if (ensemble.size() == 0) throw std::invalid_argument("empty ensemble");
  if (ensemble.kind() == SampleEnsemble::Payload::field && k > 2) {
    throw std::invalid_argument("field payloads support moments up to order 2");
  }
  const std::size_t n = ensemble.dimension();
  const std::size_t ns = ensemble.size();
  std::size_t total = 1;
  for (int i = 0; i < k; ++i) total *= n;
  MomentTensor out{k, n, std::vector<double>(total)};
  std::vector<double> products(ns);
  std::vector<std::size_t> idx(k);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    for (int i = k - 1; i >= 0; --i) {
      idx[i] = rest % n;
      rest /= n;
    }
    for (std::size_t s = 0; s < ns; ++s) {
      double p = 1.0;
      for (int i = 0; i < k; ++i) p *= ensemble.values()[s](static_cast<Eigen::Index>(idx[i]));
      products[s] = p;
    }
    out.data[flat] = pairwise_sum(products) / static_cast<double>(ns);
  }
  return out;
}

double CorrelationTensor::max_asymmetry() const {
  if (values.rows() != values.cols()) return std::numeric_limits<double>::infinity();
  return (values - values.transpose()).cwiseAbs().maxCoeff();
}

double CorrelationTensor::min_eigenvalue() const {
  if (values.rows() != values.cols()) throw std::invalid_argument("eigenvalues need a square tensor");
  const MatrixXd sym = 0.5 * (values + values.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool CorrelationTensor::is_symmetric_psd(double rel_floor) const {
  if (values.rows() != values.cols()) return false;
  const double scale = std::max(values.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (max_asymmetry() > 1e-12 * scale) return false;
  return min_eigenvalue() >= -rel_floor * std::abs(trace());
}

SampleStatistics sample_statistics(const SampleEnsemble& ensemble, const std::string& axis) {
  const std::size_t ns = ensemble.size();
  if (ns < 2) throw std::invalid_argument("statistics need at least two samples");
  const MatrixXd x = ensemble.matrix();  // column-major: each column is one component across samples
  const Eigen::Index p = x.cols();
  const double n = static_cast<double>(ns);
  SampleStatistics st;
  st.mean.resize(p);
  st.mean_stderr.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    st.mean(i) = pairwise_sum(std::span<const double>(x.col(i).data(), ns)) / n;
  }
  const MatrixXd c = x.rowwise() - st.mean.transpose();
  st.covariance.row_axis = st.covariance.col_axis = axis;
  st.covariance.values.resize(p, p);
  st.covariance.standard_errors.resize(p, p);
  std::vector<double> prod(ns), dev(ns);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      for (std::size_t s = 0; s < ns; ++s) prod[s] = c(s, i) * c(s, j);
      const double mean_prod = pairwise_sum(prod) / n;
      for (std::size_t s = 0; s < ns; ++s) dev[s] = (prod[s] - mean_prod) * (prod[s] - mean_prod);
      const double cov = mean_prod * n / (n - 1.0);
      const double se = std::sqrt(pairwise_sum(dev) / (n - 1.0) / n);
      st.covariance.values(i, j) = st.covariance.values(j, i) = cov;
      st.covariance.standard_errors(i, j) = st.covariance.standard_errors(j, i) = se;
    }
    st.mean_stderr(i) = std::sqrt(st.covariance.values(i, i) / n);
  }
  return st;
}

namespace {

std::vector<int> probe_time_indices(const TimeGrid& grid, const std::vector<Probe>& probes) {
  std::vector<int> out;
  for (const Probe& p : probes) {
    const double k = p.t / grid.dt();
    const int j = static_cast<int>(std::lround(k));
    if (std::abs(k - j) > 1e-9 || j < 0 || j > grid.N) {
      throw std::invalid_argument("probe time is not a node of the time grid");
    }
    out.push_back(j);
  }
  return out;
}

}  // namespace

PerturbedStatistics mc_perturbed_statistics(std::shared_ptr<const KappaModel> model, double epsilon,
                                            std::size_t n_samples, const std::vector<Probe>& probes,
                                            const PerturbedSetup& setup, const SpaceTimeField* u0) {
  if (!setup.space || !setup.boundary) throw std::invalid_argument("perturbed setup is incomplete");
  const FeSpace& space = *setup.space;
  const std::vector<int> tidx = probe_time_indices(setup.grid, probes);
  SpaceTimeField reference;
  if (!u0) {
    reference = solve_heat_dirichlet(space, setup.grid, setup.data, setup.solver);
    u0 = &reference;
  }
  auto probe_values = [&](const SpaceTimeField& f) {
    VectorXd v(static_cast<Eigen::Index>(probes.size()));
    for (std::size_t k = 0; k < probes.size(); ++k) v(k) = space.evaluate(f.snapshots[tidx[k]], probes[k].x);
    return v;
  };
  const VectorXd base = probe_values(*u0);

  std::vector<VectorXd> slots(n_samples);
  parallel_for(n_samples, setup.workers, [&](std::size_t i) {
    const std::uint64_t seed = setup.base_seed + i;
    try {
      auto kappa = std::make_shared<KappaSample>(sample(model, seed));
      if (epsilon * kappa->sup_bound() > model->amplitude_cap()) {
        throw NumericalError("epsilon * |kappa| exceeds the amplitude cap");
      }
      VelocityField v = velocity_from_kappa(setup.boundary, kappa, setup.domain, setup.collar);
      const SpaceTimeField ue =
          solve_pulled_back(space, setup.grid, setup.data, PerturbationMap{std::move(v), epsilon}, setup.solver);
      slots[i] = probe_values(ue) - base;
    } catch (const std::exception& e) {
      throw NumericalError("seed " + std::to_string(seed) + ": " + e.what());
    }
  });

  PerturbedStatistics out;
  for (std::size_t i = 0; i < n_samples; ++i) out.ensemble.add(setup.base_seed + i, std::move(slots[i]));
  out.statistics = sample_statistics(out.ensemble);
  const MomentTensor m2 = moment_k(out.ensemble, 2);
  const auto p = static_cast<Eigen::Index>(probes.size());
  out.second_moment.row_axis = out.second_moment.col_axis = "probe";
  out.second_moment.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      m2.data.data(), p, p);
  return out;
}

std::vector<Vec> element_parameters(const BoundaryElementMesh& mesh, const ReferenceBoundary& boundary) {
  std::vector<Vec> out;
  for (std::size_t e = 0; e < mesh.size(); ++e) out.push_back(boundary.project(mesh.midpoint(e)).param);
  return out;
}

MatrixXd kappa_covariance_matrix(const KappaModel& model, const std::vector<Vec>& params) {
  const auto n = static_cast<Eigen::Index>(params.size());
  MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) c(i, j) = c(j, i) = covariance(model, params[i], params[j]);
  }
  return c;
}

MatrixXd kappa_covariance_factor(const KappaModel& model, const std::vector<Vec>& params) {
  MatrixXd f(static_cast<Eigen::Index>(params.size()), static_cast<Eigen::Index>(model.modes().size()));
  for (std::size_t m = 0; m < model.modes().size(); ++m) {
    const KappaMode& mode = model.modes()[m];
    const double sigma = std::sqrt(mode.law.variance());
    for (std::size_t i = 0; i < params.size(); ++i) f(i, m) = sigma * mode.basis.value(params[i]);
  }
  return f;
}

namespace {

void check_problem(const FirstKindMomentProblem& p) {
  if (!p.mesh || !p.v_op) throw std::invalid_argument("moment problem needs a mesh and the V operator");
  if (p.v_op->kind != OperatorKind::V) throw std::invalid_argument("moment problem needs the single-layer operator");
  if (p.flux.elements() != p.mesh->size() || p.flux.intervals() != p.v_op->lags()) {
    throw std::invalid_argument("flux density does not match the operator");
  }
}

// Galerkin weights -|e| dt flux(k, e), column-stacked.
VectorXd load_weights(const FirstKindMomentProblem& p) {
  const VectorXd m = boundary_mass_diagonal(*p.mesh, p.flux.grid);
  BoundaryDensity w = p.flux;
  for (int k = 0; k < w.intervals(); ++k) w.values.col(k).array() *= -m.array();
  return w.stacked();
}

// Solves column chunks independently; each chunk writes its own columns.
MatrixXd solve_columns(const MarchingSolver& solver, const MatrixXd& rhs, int workers) {
  MatrixXd out(rhs.rows(), rhs.cols());
  constexpr Eigen::Index chunk = 256;
  const auto nchunks = static_cast<std::size_t>((rhs.cols() + chunk - 1) / chunk);
  parallel_for(nchunks, workers, [&](std::size_t c) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(c) * chunk;
    const Eigen::Index nc = std::min(chunk, rhs.cols() - c0);
    out.middleCols(c0, nc) = solver.solve(MatrixXd(rhs.middleCols(c0, nc)));
  });
  return out;
}

FirstKindCorrelation finish(const FirstKindMomentProblem& p, MatrixXd cor_psi) {
  FirstKindCorrelation out;
  const MatrixXd s = single_layer_matrix(*p.mesh, p.flux.grid, p.probes);
  out.uprime.row_axis = out.uprime.col_axis = "probe";
  out.uprime.values = s * cor_psi * s.transpose();
  out.uprime.values = 0.5 * (out.uprime.values + out.uprime.values.transpose()).eval();
  out.psi.row_axis = out.psi.col_axis = "interval*elements+element";
  out.psi.values = std::move(cor_psi);
  return out;
}

}  // namespace

MatrixXd first_kind_load(const FirstKindMomentProblem& problem, const MatrixXd& kappa_columns) {
  check_problem(problem);
  const auto ne = static_cast<Eigen::Index>(problem.mesh->size());
  if (kappa_columns.rows() != ne) throw std::invalid_argument("kappa values must be given per element");
  const VectorXd w = load_weights(problem);
  const int nt = problem.flux.intervals();
  MatrixXd b(ne * nt, kappa_columns.cols());
  for (int k = 0; k < nt; ++k) {
    b.middleRows(k * ne, ne) = w.segment(k * ne, ne).asDiagonal() * kappa_columns;
  }
  return b;
}

FirstKindCorrelation correlation_first_kind(const FirstKindMomentProblem& problem,
                                            const MatrixXd& kappa_cov, int workers) {
  check_problem(problem);
  const auto ne = static_cast<Eigen::Index>(problem.mesh->size());
  if (kappa_cov.rows() != ne || kappa_cov.cols() != ne) throw std::invalid_argument("Cov[kappa] must be elements x elements");
  const int nt = problem.flux.intervals();
  const VectorXd w = load_weights(problem);
  // R(p, q) = w_p Cov[kappa](e_p, e_q) w_q over all interval pairs.
  MatrixXd r(ne * nt, ne * nt);
  for (int k = 0; k < nt; ++k) {
    for (int l = 0; l < nt; ++l) r.block(k * ne, l * ne, ne, ne) = kappa_cov;
  }
  r = w.asDiagonal() * r * w.asDiagonal();
  const MarchingSolver solver(*problem.v_op, *problem.mesh, EquationKind::first);
  MatrixXd x = solve_columns(solver, r, workers);
  r.resize(0, 0);
  x.transposeInPlace();
  MatrixXd y = solve_columns(solver, x, workers);
  return finish(problem, std::move(y));
}

FirstKindCorrelation correlation_first_kind_lowrank(const FirstKindMomentProblem& problem,
                                                    const MatrixXd& kappa_factor, int workers) {
  const MarchingSolver solver(*problem.v_op, *problem.mesh, EquationKind::first);
  const MatrixXd psi = solve_columns(solver, first_kind_load(problem, kappa_factor), workers);
  return finish(problem, psi * psi.transpose());
}

SampleEnsemble mc_linear_uprime(const FirstKindMomentProblem& problem,
                                std::shared_ptr<const KappaModel> model,
                                const std::vector<Vec>& element_params, std::size_t n_samples,
                                std::uint64_t base_seed, int workers) {
  check_problem(problem);
  if (element_params.size() != problem.mesh->size()) throw std::invalid_argument("one parameter per element expected");
  MatrixXd kappa(static_cast<Eigen::Index>(element_params.size()), static_cast<Eigen::Index>(n_samples));
  for (std::size_t i = 0; i < n_samples; ++i) {
    const KappaSample ks = sample(model, base_seed + i);
    for (std::size_t e = 0; e < element_params.size(); ++e) kappa(e, i) = ks.value(element_params[e]);
  }
  const MarchingSolver solver(*problem.v_op, *problem.mesh, EquationKind::first);
  const MatrixXd psi = solve_columns(solver, first_kind_load(problem, kappa), workers);
  const MatrixXd u = single_layer_matrix(*problem.mesh, problem.flux.grid, problem.probes) * psi;
  SampleEnsemble out(SampleEnsemble::Payload::probe_values);
  for (std::size_t i = 0; i < n_samples; ++i) out.add(base_seed + i, u.col(static_cast<Eigen::Index>(i)));
  return out;
}

CorrelationTensor covariance_estimate(const CorrelationTensor& correlation_of_uprime, double epsilon) {
  CorrelationTensor out = correlation_of_uprime;
  out.values *= epsilon * epsilon;
  if (out.standard_errors.size() > 0) out.standard_errors *= epsilon * epsilon;
  return out;
}

void write_probe_statistics_csv(std::ostream& os, const std::vector<Probe>& probes,
                                const SampleStatistics& stats) {
  os << "probe,t,x,y,mean,mean_stderr,variance,variance_stderr\n";
  os.precision(12);
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    os << k << ',' << probes[k].t << ',' << probes[k].x(0) << ',' << probes[k].x(1) << ',' << stats.mean(i)
       << ',' << stats.mean_stderr(i) << ',' << stats.covariance.values(i, i) << ','
       << stats.covariance.standard_errors(i, i) << '\n';
  }
}

void write_correlation_csv(std::ostream& os, const CorrelationTensor& tensor) {
  os << "row,col,value,stderr\n";
  os.precision(12);
  const bool has_se = tensor.standard_errors.size() == tensor.values.size() && tensor.values.size() > 0;
  for (Eigen::Index i = 0; i < tensor.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < tensor.values.cols(); ++j) {
      os << i << ',' << j << ',' << tensor.values(i, j) << ',';
      if (has_se) os << tensor.standard_errors(i, j);
      os << '\n';
    }
  }
}

}  // namespace shapeuq
