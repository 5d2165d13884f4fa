// Statistical moments of sampled fields, Monte Carlo over perturbed domains,
// and the deterministic second-moment route through the tensorized
// first-kind boundary equation.
#pragma once

#include "shapeuq/fem.hpp"
#include "shapeuq/heat_bem.hpp"
#include "shapeuq/random_boundary.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace shapeuq {

/// Realizations keyed by seed; every payload has the same length.
class SampleEnsemble {
 public:
  enum class Payload { boundary_density, probe_values, field };

  explicit SampleEnsemble(Payload kind = Payload::probe_values) : kind_(kind) {}

  /// Throws std::invalid_argument on a repeated seed or a shape mismatch.
  void add(std::uint64_t seed, VectorXd values);

  Payload kind() const { return kind_; }
  std::size_t size() const { return seeds_.size(); }
  std::size_t dimension() const { return values_.empty() ? 0 : static_cast<std::size_t>(values_[0].size()); }
  const std::vector<std::uint64_t>& seeds() const { return seeds_; }
  const std::vector<VectorXd>& values() const { return values_; }
  /// Samples as rows.
  MatrixXd matrix() const;

 private:
  Payload kind_;
  std::vector<std::uint64_t> seeds_;
  std::vector<VectorXd> values_;
};

/// Dense order-k tensor over an n-point axis, row-major.
struct MomentTensor {
  int order = 0;
  std::size_t extent = 0;
  std::vector<double> data;

  double at(const std::vector<std::size_t>& index) const;
};

/// Sample average of k-fold outer products (k = 1 mean, k = 2 correlation).
/// Field payloads are limited to k <= 2.
MomentTensor moment_k(const SampleEnsemble& ensemble, int k);

/// Two-point matrix on a pair of sample axes with optional standard errors.
struct CorrelationTensor {
  std::string row_axis;
  std::string col_axis;
  MatrixXd values;
  MatrixXd standard_errors;  // empty when not estimated

  double trace() const { return values.trace(); }
  double max_asymmetry() const;
  /// Smallest eigenvalue of the symmetric part.
  double min_eigenvalue() const;
  /// Symmetric to round-off and eigenvalues >= -rel_floor * trace.
  bool is_symmetric_psd(double rel_floor = 1e-10) const;
};

/// Mean and covariance with standard errors; sums run in sample order with
/// pairwise summation, so results do not depend on how samples were computed.
struct SampleStatistics {
  VectorXd mean;
  VectorXd mean_stderr;
  CorrelationTensor covariance;  // unbiased, with entrywise standard errors
};
SampleStatistics sample_statistics(const SampleEnsemble& ensemble, const std::string& axis = "probe");

/// Setup shared by the Monte Carlo runs on perturbed domains.
struct PerturbedSetup {
  std::shared_ptr<const FeSpace> space;
  TimeGrid grid;
  SourceData data;
  std::shared_ptr<const ReferenceBoundary> boundary;
  Box domain;
  CollarOptions collar;
  SolverOptions solver;
  std::uint64_t base_seed = 0;
  int workers = 0;
};

struct PerturbedStatistics {
  SampleEnsemble ensemble{SampleEnsemble::Payload::probe_values};
  SampleStatistics statistics;  // of u_eps o T_eps - u0 at the probes
  CorrelationTensor second_moment;
};

/// Probe times must be nodes of the time grid. Sample i uses seed
/// base_seed + i; solver failures are rethrown with the seed attached.
PerturbedStatistics mc_perturbed_statistics(std::shared_ptr<const KappaModel> model, double epsilon,
                                            std::size_t n_samples, const std::vector<Probe>& probes,
                                            const PerturbedSetup& setup, const SpaceTimeField* u0 = nullptr);

/// Linear map kappa -> u' through the first-kind equation V psi = -d_n u0 kappa
/// on P0 boundary elements, with kappa sampled at element midpoints.
struct FirstKindMomentProblem {
  const BoundaryElementMesh* mesh = nullptr;
  const CausalOperator* v_op = nullptr;
  BoundaryDensity flux;  // P0 coefficients of d_n u0
  std::vector<Probe> probes;
};

/// Kappa parameters of the element midpoints (projected onto the boundary).
std::vector<Vec> element_parameters(const BoundaryElementMesh& mesh, const ReferenceBoundary& boundary);
/// Cov[kappa] between element midpoints.
MatrixXd kappa_covariance_matrix(const KappaModel& model, const std::vector<Vec>& params);
/// Factor F with Cov[kappa] = F F^T (column m = sigma_m phi_m at the midpoints).
MatrixXd kappa_covariance_factor(const KappaModel& model, const std::vector<Vec>& params);

/// Galerkin loads (one column per kappa column): -|e| dt flux(k, e) kappa(e).
MatrixXd first_kind_load(const FirstKindMomentProblem& problem, const MatrixXd& kappa_columns);

struct FirstKindCorrelation {
  CorrelationTensor psi;     // over (interval, element) pairs
  CorrelationTensor uprime;  // over probe pairs
};

/// Dense route: R = D Cov[kappa] D expanded over interval pairs, two
/// marching sweeps for (V x V) Cor[psi] = R, then Cor[u'] = S Cor[psi] S^T.
FirstKindCorrelation correlation_first_kind(const FirstKindMomentProblem& problem,
                                            const MatrixXd& kappa_cov, int workers = 0);
/// Low-rank route for Cov[kappa] = F F^T: one solve per column of F.
FirstKindCorrelation correlation_first_kind_lowrank(const FirstKindMomentProblem& problem,
                                                    const MatrixXd& kappa_factor, int workers = 0);

/// u' at the probes for n kappa draws (seeds base_seed + i), batched linear solves.
SampleEnsemble mc_linear_uprime(const FirstKindMomentProblem& problem,
                                std::shared_ptr<const KappaModel> model,
                                const std::vector<Vec>& element_params, std::size_t n_samples,
                                std::uint64_t base_seed, int workers = 0);

/// First-order model eps^2 Cor[u'] of Covar[u_eps].
CorrelationTensor covariance_estimate(const CorrelationTensor& correlation_of_uprime, double epsilon);

/// CSV rows "probe,t,x,y,mean,mean_stderr,variance,variance_stderr".
void write_probe_statistics_csv(std::ostream& os, const std::vector<Probe>& probes,
                                const SampleStatistics& stats);
/// CSV rows "row,col,value,stderr" (stderr empty when not estimated).
void write_correlation_csv(std::ostream& os, const CorrelationTensor& tensor);

}  // namespace shapeuq
