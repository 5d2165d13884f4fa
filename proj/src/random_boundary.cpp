#include "shapeuq/random_boundary.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace shapeuq {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

}  // namespace

// ---------------------------------------------------------------- Circle

Circle::Circle(double radius, Vec center) : radius_(radius), center_(std::move(center)) {
  if (radius <= 0.0) throw std::invalid_argument("circle radius must be positive");
}

Vec Circle::point(const Vec& p) const {
  return center_ + radius_ * make_vec({std::cos(p(0)), std::sin(p(0))});
}

Vec Circle::normal(const Vec& p) const { return make_vec({std::cos(p(0)), std::sin(p(0))}); }

Mat Circle::tangents(const Vec& p) const {
  Mat t(2, 1);
  t << -radius_ * std::sin(p(0)), radius_ * std::cos(p(0));
  return t;
}

double Circle::measure() const { return kTwoPi * radius_; }

BoundaryFrame Circle::project(const Vec& x) const {
  const Vec d = x - center_;
  const double r = d.norm();
  if (r == 0.0) throw DomainError("projection onto circle undefined at its center");
  BoundaryFrame f;
  const double theta = wrap_angle(std::atan2(d(1), d(0)));
  f.param = make_vec({theta});
  f.signed_distance = r - radius_;
  f.normal = d / r;
  f.param_gradient = Mat(1, 2);
  f.param_gradient << -d(1) / (r * r), d(0) / (r * r);
  f.normal_gradient = (Mat::Identity(2, 2) - f.normal * f.normal.transpose()) / r;
  return f;
}

BoundaryQuadrature Circle::quadrature(int n) const {
  BoundaryQuadrature q;
  std::vector<double> curv;
  for (int i = 0; i < n; ++i) {
    const Vec p = make_vec({kTwoPi * i / n});
    q.params.push_back(p);
    q.points.push_back(point(p));
    q.normals.push_back(normal(p));
    q.weights.push_back(measure() / n);
    curv.push_back(curvature(p));
  }
  q.curvature = std::move(curv);
  return q;
}

// ---------------------------------------------------------------- Sphere

Sphere::Sphere(double radius, Vec center) : radius_(radius), center_(std::move(center)) {
  if (radius <= 0.0) throw std::invalid_argument("sphere radius must be positive");
}

Vec Sphere::normal(const Vec& p) const {
  const double th = p(0), ph = p(1);
  return make_vec({std::sin(ph) * std::cos(th), std::sin(ph) * std::sin(th), std::cos(ph)});
}

Vec Sphere::point(const Vec& p) const { return center_ + radius_ * normal(p); }

Mat Sphere::tangents(const Vec& p) const {
  const double th = p(0), ph = p(1);
  Mat t(3, 2);
  t.col(0) << -std::sin(ph) * std::sin(th), std::sin(ph) * std::cos(th), 0.0;
  t.col(1) << std::cos(ph) * std::cos(th), std::cos(ph) * std::sin(th), -std::sin(ph);
  return radius_ * t;
}

double Sphere::measure() const { return 2.0 * kTwoPi * radius_ * radius_; }

BoundaryFrame Sphere::project(const Vec& x) const {
  const Vec d = x - center_;
  const double r = d.norm();
  if (r == 0.0) throw DomainError("projection onto sphere undefined at its center");
  const double th = wrap_angle(std::atan2(d(1), d(0)));
  const double ph = std::acos(std::clamp(d(2) / r, -1.0, 1.0));
  BoundaryFrame f;
  f.param = make_vec({th, ph});
  f.signed_distance = r - radius_;
  f.normal = d / r;
  f.param_gradient = Mat::Zero(2, 3);
  const double s = std::sin(ph);
  if (s > 1e-12) {
    f.param_gradient.row(0) << -std::sin(th) / (r * s), std::cos(th) / (r * s), 0.0;
  }
  f.param_gradient.row(1) << std::cos(ph) * std::cos(th) / r, std::cos(ph) * std::sin(th) / r,
      -s / r;
  f.normal_gradient = (Mat::Identity(3, 3) - f.normal * f.normal.transpose()) / r;
  return f;
}

BoundaryQuadrature Sphere::quadrature(int n) const {
  BoundaryQuadrature q;
  std::vector<double> curv;
  const auto& gl = gauss_legendre(n);
  const int na = 2 * n;
  for (int i = 0; i < n; ++i) {
    const double u = 2.0 * gl.nodes[i] - 1.0;  // cos(phi)
    const double ph = std::acos(u);
    for (int j = 0; j < na; ++j) {
      const Vec p = make_vec({kTwoPi * j / na, ph});
      q.params.push_back(p);
      q.points.push_back(point(p));
      q.normals.push_back(normal(p));
      q.weights.push_back(radius_ * radius_ * 2.0 * gl.weights[i] * kTwoPi / na);
      curv.push_back(curvature(p));
    }
  }
  q.curvature = std::move(curv);
  return q;
}

// ---------------------------------------------------------------- modes

double BoundaryMode::value(const Vec& p) const {
  const double th = p(0);
  const double trig = kind == Kind::sine ? std::sin(frequency * th)
                      : kind == Kind::cosine ? std::cos(frequency * th)
                                             : 1.0;
  if (dim == 2) return trig;
  const double ph = p(1);
  const int m = kind == Kind::constant ? 0 : frequency;
  return trig * ipow(std::sin(ph), m) * ipow(std::cos(ph), polar_power);
}

Vec BoundaryMode::param_gradient(const Vec& p) const {
  const double th = p(0);
  double trig = 1.0, dtrig = 0.0;
  if (kind == Kind::cosine) {
    trig = std::cos(frequency * th);
    dtrig = -frequency * std::sin(frequency * th);
  } else if (kind == Kind::sine) {
    trig = std::sin(frequency * th);
    dtrig = frequency * std::cos(frequency * th);
  }
  if (dim == 2) return make_vec({dtrig});
  const double ph = p(1);
  const int m = kind == Kind::constant ? 0 : frequency;
  const int l = polar_power;
  const double s = std::sin(ph), c = std::cos(ph);
  const double base = ipow(s, m) * ipow(c, l);
  double dbase = 0.0;
  if (m > 0) dbase += m * ipow(s, m - 1) * ipow(c, l + 1);
  if (l > 0) dbase -= l * ipow(s, m + 1) * ipow(c, l - 1);
  return make_vec({dtrig * base, trig * dbase});
}

double BoundaryMode::gradient_sup_bound() const {
  const int m = kind == Kind::constant ? 0 : frequency;
  return dim == 2 ? static_cast<double>(m) : static_cast<double>(m + polar_power);
}

std::string BoundaryMode::label() const {
  std::ostringstream os;
  os << (kind == Kind::cosine ? "cos" : kind == Kind::sine ? "sin" : "const");
  if (kind != Kind::constant) os << frequency;
  if (dim == 3 && polar_power > 0) os << "_l" << polar_power;
  return os.str();
}

double CoefficientLaw::variance() const {
  if (kind == Kind::uniform) return scale * scale / 3.0;
  // Normal law conditioned on |c| <= 5 sigma.
  const double a = 5.0;
  const double pdf = std::exp(-0.5 * a * a) / std::sqrt(kTwoPi);
  const double mass = std::erf(a / std::numbers::sqrt2);
  return scale * scale * (1.0 - 2.0 * a * pdf / mass);
}

double CoefficientLaw::bound() const { return kind == Kind::uniform ? scale : 5.0 * scale; }

KappaModel::KappaModel(int dim, std::vector<KappaMode> modes, std::optional<double> amplitude_cap)
    : dim_(dim), modes_(std::move(modes)) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("kappa model dimension must be 2 or 3");
  double total = 0.0;
  for (auto& m : modes_) {
    if (m.law.scale < 0.0) throw std::invalid_argument("coefficient scale must be non-negative");
    m.basis.dim = dim;
    total += m.law.bound() * m.basis.sup_norm();
  }
  cap_ = amplitude_cap.value_or(total);
  if (total > cap_ * (1.0 + 1e-12)) {
    throw std::invalid_argument("sum of mode bounds exceeds the amplitude cap");
  }
}

KappaSample::KappaSample(std::shared_ptr<const KappaModel> model, std::vector<double> coefficients,
                         std::uint64_t seed)
    : model_(std::move(model)), coefficients_(std::move(coefficients)), seed_(seed) {
  if (coefficients_.size() != model_->truncation()) {
    throw std::invalid_argument("coefficient count does not match the model truncation");
  }
}

double KappaSample::value(const Vec& p) const {
  double v = 0.0;
  const auto& modes = model_->modes();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    if (coefficients_[m] != 0.0) v += coefficients_[m] * modes[m].basis.value(p);
  }
  return v;
}

std::optional<Vec> KappaSample::param_gradient(const Vec& p) const {
  Vec g = Vec::Zero(model_->dim() - 1);
  const auto& modes = model_->modes();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    if (coefficients_[m] != 0.0) g += coefficients_[m] * modes[m].basis.param_gradient(p);
  }
  return g;
}

double KappaSample::sup_bound() const {
  double s = 0.0;
  for (std::size_t m = 0; m < coefficients_.size(); ++m) {
    s += std::abs(coefficients_[m]) * model_->modes()[m].basis.sup_norm();
  }
  return s;
}

double KappaSample::gradient_sup_bound() const {
  double s = 0.0;
  for (std::size_t m = 0; m < coefficients_.size(); ++m) {
    s += std::abs(coefficients_[m]) * model_->modes()[m].basis.gradient_sup_bound();
  }
  return s;
}

AnalyticBoundaryFunction::AnalyticBoundaryFunction(ValueFn value, GradientFn gradient, double sup,
                                                   double grad_sup)
    : value_(std::move(value)), gradient_(std::move(gradient)), sup_(sup), grad_sup_(grad_sup) {}

std::optional<Vec> AnalyticBoundaryFunction::param_gradient(const Vec& p) const {
  if (!gradient_) return std::nullopt;
  return gradient_(p);
}

KappaSample sample(std::shared_ptr<const KappaModel> model, std::uint64_t seed) {
  std::vector<double> coefficients(model->truncation(), 0.0);
  for (std::size_t m = 0; m < coefficients.size(); ++m) {
    const auto& law = model->modes()[m].law;
    if (law.scale == 0.0) continue;
    std::seed_seq keys{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(m), 0x6b617070u};
    std::mt19937_64 stream(keys);
    if (law.kind == CoefficientLaw::Kind::uniform) {
      coefficients[m] = std::uniform_real_distribution<double>(-law.scale, law.scale)(stream);
    } else {
      std::normal_distribution<double> normal(0.0, law.scale);
      double c;
      do {
        c = normal(stream);
      } while (std::abs(c) > 5.0 * law.scale);
      coefficients[m] = c;
    }
  }
  return KappaSample(std::move(model), std::move(coefficients), seed);
}

double covariance(const KappaModel& model, const Vec& px, const Vec& py) {
  double c = 0.0;
  for (const auto& m : model.modes()) {
    c += m.law.variance() * m.basis.value(px) * m.basis.value(py);
  }
  return c;
}

// ---------------------------------------------------------------- velocity

namespace {

Vec kappa_param_gradient(const BoundaryFunction& kappa, const Vec& p) {
  if (auto g = kappa.param_gradient(p)) return *g;
  const double h = 1e-6;
  Vec g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Vec a = p, b = p;
    a(i) += h;
    b(i) -= h;
    g(i) = (kappa.value(a) - kappa.value(b)) / (2.0 * h);
  }
  return g;
}

}  // namespace

VelocityField velocity_from_kappa(std::shared_ptr<const ReferenceBoundary> boundary,
                                  std::shared_ptr<const BoundaryFunction> kappa, const Box& domain,
                                  const CollarOptions& options) {
  const int d = boundary->dim();
  const double w = options.width_fraction * boundary->inradius();
  if (w <= 0.0 || 2.0 * w >= boundary->inradius()) {
    throw std::invalid_argument("collar width must lie in (0, inradius / 2)");
  }
  const RadialCutoff cutoff{w, 2.0 * w};
  // Points this close to the center lie inside the inner collar edge.
  const double core = boundary->inradius() - 2.0 * w;
  const Vec center = boundary->center();

  auto eval = [boundary, kappa, cutoff, core, center](const Vec& x) -> Vec {
    if ((x - center).norm() <= core) return Vec::Zero(x.size());
    const BoundaryFrame f = boundary->project(x);
    const double chi = cutoff.value(std::abs(f.signed_distance));
    if (chi == 0.0) return Vec::Zero(x.size());
    return kappa->value(f.param) * chi * f.normal;
  };
  auto jac = [boundary, kappa, cutoff, core, center](const Vec& x) -> Mat {
    if ((x - center).norm() <= core) return Mat::Zero(x.size(), x.size());
    const BoundaryFrame f = boundary->project(x);
    const double dist = std::abs(f.signed_distance);
    const double chi = cutoff.value(dist);
    const double dchi = cutoff.derivative(dist) * (f.signed_distance < 0.0 ? -1.0 : 1.0);
    const Eigen::Index dd = x.size();
    if (chi == 0.0 && dchi == 0.0) return Mat::Zero(dd, dd);
    const double k = kappa->value(f.param);
    const Vec dk = kappa_param_gradient(*kappa, f.param);
    // grad(kappa~ chi) = chi * dk^T dp/dx + kappa chi' n^T
    const Vec grad_scalar = chi * (f.param_gradient.transpose() * dk) + k * dchi * f.normal;
    return f.normal * grad_scalar.transpose() + (k * chi) * f.normal_gradient;
  };

  const double lip = kappa->gradient_sup_bound() * (d - 1) / core +
                     kappa->sup_bound() * (cutoff.max_slope() + 1.0 / core);
  VelocityField::Properties props{domain, boundary->center(), boundary->circumradius() + 2.0 * w,
                                  lip, "normal-collar"};
  return VelocityField(d, eval, jac, std::move(props));
}

BoundaryVectorField tangential_gradient_fd(std::shared_ptr<const ReferenceBoundary> boundary,
                                           std::shared_ptr<const BoundaryFunction> kappa,
                                           double fd_step) {
  return [boundary, kappa, fd_step](const Vec& p) -> Vec {
    Vec dk(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      Vec a = p, b = p;
      a(i) += fd_step;
      b(i) -= fd_step;
      dk(i) = (kappa->value(a) - kappa->value(b)) / (2.0 * fd_step);
    }
    const Mat t = boundary->tangents(p);
    const Mat metric = t.transpose() * t;
    return t * metric.partialPivLu().solve(dk);
  };
}

BoundaryVectorField tangential_gradient(std::shared_ptr<const ReferenceBoundary> boundary,
                                        std::shared_ptr<const BoundaryFunction> kappa,
                                        double fd_step) {
  if (!kappa->param_gradient(Vec::Zero(boundary->param_dim()))) {
    return tangential_gradient_fd(std::move(boundary), std::move(kappa), fd_step);
  }
  return [boundary, kappa](const Vec& p) -> Vec {
    const Vec dk = *kappa->param_gradient(p);
    const Mat t = boundary->tangents(p);
    const Mat metric = t.transpose() * t;
    return t * metric.partialPivLu().solve(dk);
  };
}

void write_kappa_csv(std::ostream& os, const ReferenceBoundary& boundary,
                     const BoundaryFunction& kappa, int n) {
  const BoundaryQuadrature q = boundary.quadrature(n);
  os << (boundary.dim() == 2 ? "theta,kappa\n" : "theta,phi,kappa\n");
  os.precision(17);
  for (const auto& p : q.params) {
    for (Eigen::Index i = 0; i < p.size(); ++i) os << p(i) << ',';
    os << kappa.value(p) << '\n';
  }
}

}  // namespace shapeuq
