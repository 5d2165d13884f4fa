#include "shapeuq/kinematics.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <sstream>

namespace shapeuq {

VelocityField::VelocityField(int dim, EvalFn eval, JacobianFn jac, Properties props)
    : dim_(dim), eval_(std::move(eval)), jac_(std::move(jac)), props_(std::move(props)) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("velocity field dimension must be 2 or 3");
  if (props_.support_center.size() == 0) props_.support_center = Vec::Zero(dim);
}

Vec VelocityField::eval(const Vec& x) const {
  if ((x - props_.support_center).norm() >= props_.support_radius) return Vec::Zero(dim_);
  return eval_(x);
}

Mat VelocityField::jac(const Vec& x) const {
  if ((x - props_.support_center).norm() >= props_.support_radius) return Mat::Zero(dim_, dim_);
  return jac_(x);
}

Box VelocityField::support_box() const {
  Box b;
  b.lower = (props_.support_center.array() - props_.support_radius)
                .max(props_.domain.lower.array())
                .matrix();
  b.upper = (props_.support_center.array() + props_.support_radius)
                .min(props_.domain.upper.array())
                .matrix();
  return b;
}

VelocityField VelocityField::zero(const Box& domain) {
  const int d = domain.dim();
  Properties p{domain, Vec::Zero(d), 0.0, 0.0, "zero"};
  return VelocityField(
      d, [d](const Vec&) { return Vec(Vec::Zero(d)); },
      [d](const Vec&) { return Mat(Mat::Zero(d, d)); }, std::move(p));
}

VelocityField VelocityField::affine(const Mat& m, const Vec& b, const Vec& center,
                                    RadialCutoff cutoff, const Box& domain) {
  const int d = static_cast<int>(center.size());
  auto eval = [=](const Vec& x) -> Vec {
    const Vec r = x - center;
    return (m * r + b) * cutoff.value(r.norm());
  };
  auto jac = [=](const Vec& x) -> Mat {
    const Vec r = x - center;
    const double rho = r.norm();
    Mat j = m * cutoff.value(rho);
    if (rho > 0.0) {
      const double dchi = cutoff.derivative(rho);
      if (dchi != 0.0) j += (m * r + b) * (r.transpose() * (dchi / rho));
    }
    return j;
  };
  const double lip = m.cwiseAbs().maxCoeff() +
                     (m.norm() * cutoff.outer + b.norm()) * cutoff.max_slope();
  Properties p{domain, center, cutoff.outer, lip, "affine"};
  return VelocityField(d, eval, jac, std::move(p));
}

VelocityField VelocityField::scaled(double s) const {
  auto eval = [f = eval_, s](const Vec& x) -> Vec { return s * f(x); };
  auto jac = [f = jac_, s](const Vec& x) -> Mat { return s * f(x); };
  Properties p = props_;
  p.lipschitz_bound *= std::abs(s);
  p.name = props_.name + "*scaled";
  return VelocityField(dim_, eval, jac, std::move(p));
}

Vec apply(const PerturbationMap& map, const Vec& x) {
  if (!map.velocity.domain().contains(x, 1e-12)) {
    std::ostringstream os;
    os << "point (" << x.transpose() << ") outside the hold-all box";
    throw DomainError(os.str());
  }
  if (map.epsilon == 0.0) return x;
  return x + map.epsilon * map.velocity.eval(x);
}

namespace {

std::array<double, 3> determinant_expansion(const Mat& jv) {
  const double tr = jv.trace();
  const double second = 0.5 * (tr * tr - (jv * jv).trace());
  const double third = jv.rows() == 3 ? jv.determinant() : 0.0;
  return {tr, second, third};
}

}  // namespace

TransportedCoefficients transported_coefficients_from_jacobian(const Mat& velocity_jacobian,
                                                               double epsilon) {
  const Eigen::Index d = velocity_jacobian.rows();
  TransportedCoefficients c;
  c.gamma_poly = determinant_expansion(velocity_jacobian);
  const auto& g = c.gamma_poly;
  const double det = 1.0 + epsilon * (g[0] + epsilon * (g[1] + epsilon * g[2]));
  c.gamma = std::abs(det);
  if (c.gamma < 1e3 * std::numeric_limits<double>::epsilon()) {
    throw NumericalError("singular transport Jacobian (inadmissible epsilon)");
  }

  const Mat id = Mat::Identity(d, d);
  c.a_prime0 = g[0] * id - velocity_jacobian - velocity_jacobian.transpose();
  if (epsilon == 0.0) {
    c.a_matrix = id;
    return c;
  }
  // Adjugate formula keeps gamma J^{-1} J^{-T} consistent with the expansion.
  const Mat j = id + epsilon * velocity_jacobian;
  Mat adj(d, d);
  if (d == 2) {
    adj << j(1, 1), -j(0, 1), -j(1, 0), j(0, 0);
  } else {
    for (int r = 0; r < 3; ++r) {
      for (int s = 0; s < 3; ++s) {
        const int r1 = (s + 1) % 3, r2 = (s + 2) % 3;
        const int c1 = (r + 1) % 3, c2 = (r + 2) % 3;
        adj(r, s) = j(r1, c1) * j(r2, c2) - j(r1, c2) * j(r2, c1);
      }
    }
  }
  // J^{-1} = adj / det, so gamma J^{-1} J^{-T} = adj adj^T / |det|.
  c.a_matrix = adj * adj.transpose() / c.gamma;
  return c;
}

TransportedCoefficients transported_coefficients(const PerturbationMap& map, const Vec& x) {
  return transported_coefficients_from_jacobian(map.velocity.jac(x), map.epsilon);
}

Mat diffusion_matrix_by_inversion(const Mat& velocity_jacobian, double epsilon) {
  const Eigen::Index d = velocity_jacobian.rows();
  const Mat j = Mat::Identity(d, d) + epsilon * velocity_jacobian;
  Eigen::PartialPivLU<Mat> lu(j);
  const Mat inv = lu.inverse();
  return std::abs(lu.determinant()) * inv * inv.transpose();
}

namespace {

// Minimum of 1 + g0 s + g1 s^2 + g2 s^3 over s in [0, eps]: endpoints plus
// the stationary points inside.
double min_gamma_on_path(const std::array<double, 3>& g, double eps) {
  auto p = [&](double s) { return 1.0 + s * (g[0] + s * (g[1] + s * g[2])); };
  double m = std::min(1.0, p(eps));
  const double a = 3.0 * g[2], b = 2.0 * g[1], c = g[0];
  auto consider = [&](double s) {
    if (s > 0.0 && s < eps) m = std::min(m, p(s));
  };
  if (std::abs(a) < 1e-300) {
    if (b != 0.0) consider(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double r = std::sqrt(disc);
      consider((-b + r) / (2.0 * a));
      consider((-b - r) / (2.0 * a));
    }
  }
  return m;
}

}  // namespace

double epsilon_admissible(const VelocityField& velocity, double floor,
                          const AdmissibilityOptions& options) {
  if (!(floor > 0.0 && floor < 1.0)) throw std::invalid_argument("floor must lie in (0, 1)");
  const int d = velocity.dim();
  const Box box = velocity.support_box();
  const int n = options.lattice;

  std::vector<std::array<double, 3>> polys;
  const long total = d == 2 ? long(n) * n : long(n) * n * n;
  polys.reserve(static_cast<std::size_t>(total));
  Vec x(d);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int k = 0; k < d; ++k) {
      const long i = rem % n;
      rem /= n;
      const double s = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
      x(k) = box.lower(k) + s * (box.upper(k) - box.lower(k));
    }
    polys.push_back(determinant_expansion(velocity.jac(x)));
  }

  for (int k = 0; k <= options.max_halvings; ++k) {
    const double eps = std::ldexp(1.0, -k);
    bool ok = true;
    for (const auto& g : polys) {
      if (min_gamma_on_path(g, eps) < floor) {
        ok = false;
        break;
      }
    }
    if (ok) return eps;
  }
  throw NumericalError("no admissible epsilon on the dyadic grid; velocity too rough");
}

SpaceTimeFunction pullback(SpaceTimeFunction field, const PerturbationMap& map) {
  return [field = std::move(field), map](double t, const Vec& x) { return field(t, apply(map, x)); };
}

SpatialFunction pullback(SpatialFunction field, const PerturbationMap& map) {
  return [field = std::move(field), map](const Vec& x) { return field(apply(map, x)); };
}

}  // namespace shapeuq
