// Shared vocabulary for the shapeuq library: small fixed-capacity vectors,
// error types, the warning sink and a few numerical helpers used by every
// module (cutoff functions, Gauss-Legendre rules, deterministic reductions).
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace shapeuq {

// Points and small matrices live in R^2 or R^3; the fixed maximum size keeps
// them on the stack.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

using SpatialFunction = std::function<double(const Vec&)>;
using SpaceTimeFunction = std::function<double(double, const Vec&)>;

Vec make_vec(std::initializer_list<double> values);

/// Point outside the region where an operation is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Singular systems, inadmissible perturbations, failed factorizations.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration; carries the offending key path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::invalid_argument(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Non-fatal diagnostics (compatibility, near-boundary probes, floors).
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

struct Box {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x, double tol = 0.0) const;
  static Box cube(int dim, double lo, double hi);
};

/// C^1 cutoff: 1 on [0, inner], 0 on [outer, inf), cubic smoothstep between.
struct RadialCutoff {
  double inner = 0.0;
  double outer = 1.0;

  double value(double rho) const;
  double derivative(double rho) const;
  double max_slope() const { return 1.5 / (outer - inner); }
};

struct QuadratureRule1D {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

/// Gauss-Legendre rule with n points mapped to [0, 1].
const QuadratureRule1D& gauss_legendre(int n);

/// Pairwise summation; result independent of how work was scheduled.
double pairwise_sum(std::span<const double> values);

/// Runs body(i) for i in [0, n) on up to `workers` threads (0 = hardware).
/// Each index is processed exactly once; callers write into per-index slots.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

/// Least-squares slope of log(errors) against log(params).
double loglog_slope(std::span<const double> params, std::span<const double> errors);

}  // namespace shapeuq
