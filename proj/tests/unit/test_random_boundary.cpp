#include "shapeuq/random_boundary.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace shapeuq;

namespace {

constexpr double kPi = std::numbers::pi;
const Box kDomain = Box::cube(2, -2.0, 2.0);

std::shared_ptr<const KappaModel> uniform_model(std::vector<std::pair<BoundaryMode, double>> modes) {
  std::vector<KappaMode> m;
  for (const auto& [basis, a] : modes) m.push_back({basis, CoefficientLaw{CoefficientLaw::Kind::uniform, a}});
  return std::make_shared<KappaModel>(2, std::move(m));
}

std::shared_ptr<const BoundaryFunction> constant_kappa(double c) {
  return std::make_shared<AnalyticBoundaryFunction>([c](const Vec&) { return c; },
                                                    [](const Vec&) { return make_vec({0.0}); }, std::abs(c), 0.0);
}

std::shared_ptr<const BoundaryFunction> cosine_kappa() {
  return std::make_shared<AnalyticBoundaryFunction>([](const Vec& q) { return std::cos(q(0)); },
                                                    [](const Vec& q) { return make_vec({-std::sin(q(0))}); }, 1.0, 1.0);
}

const BoundaryMode kCos1{BoundaryMode::Kind::cosine, 1};
const BoundaryMode kSin2{BoundaryMode::Kind::sine, 2};

}  // namespace

TEST(Circle, GeometryAndQuadrature) {
  const Circle c(2.0);
  EXPECT_NEAR(c.measure(), 4.0 * kPi, 1e-14);
  EXPECT_EQ(c.curvature(make_vec({0.3})), 0.5);
  const BoundaryQuadrature q = c.quadrature(16);
  double len = 0.0, moment = 0.0;
  for (std::size_t i = 0; i < q.weights.size(); ++i) {
    len += q.weights[i];
    moment += q.weights[i] * std::pow(std::cos(q.params[i](0)), 2);
    EXPECT_NEAR(q.points[i].norm(), 2.0, 1e-14);
    EXPECT_NEAR((q.normals[i] - q.points[i] / 2.0).norm(), 0.0, 1e-14);
  }
  EXPECT_NEAR(len, 4.0 * kPi, 1e-12);
  EXPECT_NEAR(moment, 2.0 * kPi, 1e-12);
}

TEST(Circle, ProjectionGivesSignedDistance) {
  const Circle c;
  const BoundaryFrame f = c.project(make_vec({0.0, 1.3}));
  EXPECT_NEAR(f.signed_distance, 0.3, 1e-14);
  EXPECT_NEAR(f.param(0), kPi / 2, 1e-14);
  EXPECT_NEAR((f.normal - make_vec({0.0, 1.0})).norm(), 0.0, 1e-14);
}

TEST(Sphere, MeasureAndQuadrature) {
  const Sphere s(1.0);
  EXPECT_NEAR(s.measure(), 4.0 * kPi, 1e-14);
  const BoundaryQuadrature q = s.quadrature(8);
  double area = 0.0;
  for (double w : q.weights) area += w;
  EXPECT_NEAR(area, 4.0 * kPi, 1e-12);
}

TEST(CoefficientLaw, MomentsAndBounds) {
  const CoefficientLaw u{CoefficientLaw::Kind::uniform, 0.6};
  EXPECT_NEAR(u.variance(), 0.36 / 3.0, 1e-15);
  EXPECT_EQ(u.bound(), 0.6);
  const CoefficientLaw g{CoefficientLaw::Kind::truncated_gaussian, 0.5};
  EXPECT_GT(g.bound(), 0.0);
  EXPECT_LT(g.variance(), 0.25);
}

TEST(KappaSample, DegenerateModelIsZero) {
  const auto model = uniform_model({{kCos1, 0.0}, {kSin2, 0.0}});
  const KappaSample s = sample(model, 42);
  for (double t : {0.0, 1.0, 2.5}) EXPECT_EQ(s.value(make_vec({t})), 0.0);
  EXPECT_EQ(covariance(*model, make_vec({0.3}), make_vec({1.2})), 0.0);
}

TEST(KappaSample, SameSeedSameDraw) {
  const auto model = uniform_model({{kCos1, 1.0}, {kSin2, 0.5}});
  EXPECT_EQ(sample(model, 7).coefficients(), sample(model, 7).coefficients());
  EXPECT_NE(sample(model, 7).coefficients(), sample(model, 8).coefficients());
  EXPECT_EQ(sample(model, 7).seed(), 7u);
}

TEST(KappaSample, EmpiricalMeanIsCentered) {
  const auto model = uniform_model({{kCos1, 1.0}, {kSin2, 0.5}});
  const Vec x0 = make_vec({0.4});
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample(model, i).value(x0);
  const double sd = std::sqrt(covariance(*model, x0, x0));
  EXPECT_LE(std::abs(sum / n), 3.0 * sd / std::sqrt(double(n)));
}

TEST(KappaSample, UniformModeVarianceAtZero) {
  const double a = 0.8;
  const auto model = uniform_model({{kCos1, a}});
  const int n = 100000;
  std::vector<double> sq(n);
  for (int i = 0; i < n; ++i) {
    const double v = sample(model, i).value(make_vec({0.0}));
    sq[i] = v * v;
  }
  double m = 0.0, m2 = 0.0;
  for (double s : sq) {
    m += s;
    m2 += s * s;
  }
  m /= n;
  const double se = std::sqrt((m2 / n - m * m) / n);
  EXPECT_LE(std::abs(m - a * a / 3.0), 3.0 * se);
}

TEST(Covariance, SingleCosineModeFactorizes) {
  const auto model = uniform_model({{kCos1, std::sqrt(3.0)}});  // unit variance
  for (double x : {0.0, 0.7, 2.0}) {
    for (double y : {0.1, 1.5, 3.0}) {
      EXPECT_NEAR(covariance(*model, make_vec({x}), make_vec({y})), std::cos(x) * std::cos(y), 1e-14);
    }
  }
}

TEST(Covariance, TwoModeVarianceMatchesMonteCarlo) {
  const auto model = uniform_model({{kCos1, 1.0}, {kSin2, 0.5}});
  const Vec x = make_vec({0.9});
  const double exact = std::pow(std::cos(0.9), 2) / 3.0 + 0.25 * std::pow(std::sin(1.8), 2) / 3.0;
  EXPECT_NEAR(covariance(*model, x, x), exact, 1e-15);
  const int n = 100000;
  double m = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = sample(model, 1000 + i).value(x);
    m += v * v;
    m2 += v * v * v * v;
  }
  m /= n;
  const double se = std::sqrt((m2 / n - m * m) / n);
  EXPECT_LE(std::abs(m - exact), 3.0 * se);
}

TEST(VelocityFromKappa, ZeroKappaGivesZeroField) {
  const VelocityField v = velocity_from_kappa(std::make_shared<Circle>(), constant_kappa(0.0), kDomain);
  for (const Vec& x : {make_vec({0.95, 0.1}), make_vec({0.0, -1.05}), make_vec({0.3, 0.2})}) {
    EXPECT_EQ(v.eval(x).norm(), 0.0);
  }
}

TEST(VelocityFromKappa, UnitKappaIsRadialInCollar) {
  const VelocityField v = velocity_from_kappa(std::make_shared<Circle>(), constant_kappa(1.0), kDomain);
  for (double r : {0.85, 1.0, 1.15}) {
    for (double t : {0.0, 1.0, 4.0}) {
      const Vec x = r * make_vec({std::cos(t), std::sin(t)});
      EXPECT_NEAR((v.eval(x) - x / r).norm(), 0.0, 1e-14);
    }
  }
  // Away from the collar the field vanishes.
  EXPECT_EQ(v.eval(make_vec({0.3, 0.0})).norm(), 0.0);
  // The offset boundary is the circle of radius 1 + eps.
  const Vec y = apply({v, 0.05}, make_vec({std::cos(2.0), std::sin(2.0)}));
  EXPECT_NEAR(y.norm(), 1.05, 1e-14);
}

TEST(VelocityFromKappa, CosineKappaMapsBoundaryPoints) {
  const VelocityField v = velocity_from_kappa(std::make_shared<Circle>(), cosine_kappa(), kDomain);
  const double eps = 0.07;
  for (double t : {0.0, 0.8, 2.4, 5.0}) {
    const Vec x = make_vec({std::cos(t), std::sin(t)});
    EXPECT_NEAR((apply({v, eps}, x) - (1.0 + eps * std::cos(t)) * x).norm(), 0.0, 1e-14);
  }
}

TEST(VelocityFromKappa, JacobianMatchesFiniteDifferences) {
  const VelocityField v = velocity_from_kappa(std::make_shared<Circle>(), cosine_kappa(), kDomain);
  const double h = 1e-6;
  for (const Vec& x : {make_vec({0.9, 0.2}), make_vec({-0.7, 0.65}), make_vec({0.1, -1.25})}) {
    const Mat j = v.jac(x);
    for (int l = 0; l < 2; ++l) {
      Vec e = Vec::Zero(2);
      e(l) = h;
      const Vec col = (v.eval(x + e) - v.eval(x - e)) / (2 * h);
      for (int k = 0; k < 2; ++k) EXPECT_NEAR(j(k, l), col(k), 1e-6);
    }
  }
}

TEST(TangentialGradient, ConstantKappaHasNone) {
  const auto g = tangential_gradient(std::make_shared<Circle>(), constant_kappa(2.0));
  EXPECT_EQ(g(make_vec({1.1})).norm(), 0.0);
}

TEST(TangentialGradient, CosineOnUnitCircle) {
  const auto g = tangential_gradient(std::make_shared<Circle>(), cosine_kappa());
  for (double t : {0.2, 1.7, 4.4}) {
    const Vec tangent = make_vec({-std::sin(t), std::cos(t)});
    EXPECT_NEAR((g(make_vec({t})) + std::sin(t) * tangent).norm(), 0.0, 1e-14);
  }
}

TEST(TangentialGradient, FiniteDifferenceRouteIsSecondOrder) {
  const auto circle = std::make_shared<Circle>(1.5);
  const auto kappa = cosine_kappa();
  const auto exact = tangential_gradient(circle, kappa);
  const Vec q = make_vec({0.9});
  const double e1 = (tangential_gradient_fd(circle, kappa, 0.1)(q) - exact(q)).norm();
  const double e2 = (tangential_gradient_fd(circle, kappa, 0.05)(q) - exact(q)).norm();
  EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.1);
}

TEST(KappaCsv, HeaderAndRows) {
  std::ostringstream os;
  write_kappa_csv(os, Circle(), *cosine_kappa(), 4);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "theta,kappa");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
