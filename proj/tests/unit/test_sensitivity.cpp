#include "shapeuq/sensitivity.hpp"
#include "shapeuq/verification.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace shapeuq;

namespace {

constexpr double kPi = std::numbers::pi;
const Box kDomain = Box::cube(2, -2.0, 2.0);

std::shared_ptr<const FeSpace> disk_space(int rings) {
  return std::make_shared<FeSpace>(std::make_shared<Mesh>(Mesh::disk(1.0, rings)));
}

SourceData disk_source() {
  SourceData d;
  d.f = [](double t, const Vec& x) { return 8.0 * t * (1.0 + 0.5 * x(0)); };
  d.name = "disk";
  return d;
}

std::shared_ptr<const BoundaryFunction> cosine_kappa() {
  return std::make_shared<AnalyticBoundaryFunction>([](const Vec& q) { return std::cos(q(0)); },
                                                    [](const Vec& q) { return make_vec({-std::sin(q(0))}); }, 1.0, 1.0);
}

std::shared_ptr<const BoundaryFunction> constant_kappa(double c) {
  return std::make_shared<AnalyticBoundaryFunction>([c](const Vec&) { return c; },
                                                    [](const Vec&) { return make_vec({0.0}); }, std::abs(c), 0.0);
}

double max_abs(const SpaceTimeField& f) {
  double m = 0.0;
  for (const VectorXd& s : f.snapshots) m = std::max(m, s.cwiseAbs().maxCoeff());
  return m;
}

SensitivityProblem kappa_problem(int rings, int steps, SourceData data) {
  SensitivityProblem p(disk_space(rings), TimeGrid(1.0, steps), std::move(data),
                       velocity_from_kappa(std::make_shared<Circle>(), cosine_kappa(), kDomain));
  p.flux_method = FluxMethod::variational;
  p.boundary_normal = [](const Vec& x) { Vec n = x / x.norm(); return n; };
  return p;
}

}  // namespace

TEST(Sensitivity, ZeroVelocityGivesZeroDerivatives) {
  const SensitivityProblem p(disk_space(4), TimeGrid(1.0, 8), disk_source(), VelocityField::zero(kDomain));
  const SpaceTimeField z = material_derivative(p);
  const SpaceTimeField up = shape_derivative(p);
  EXPECT_EQ(max_abs(z), 0.0);
  EXPECT_EQ(max_abs(up), 0.0);
  EXPECT_EQ(max_abs(shape_from_material(z, p)), 0.0);
}

TEST(Sensitivity, InitialMaterialDerivativeIsGradientAlongVelocity) {
  SourceData d = disk_source();
  d.g = [](const Vec& x) { return (1.0 - x.squaredNorm()) * (1.0 + x(1)); };
  d.grad_g = [](const Vec& x) {
    return make_vec({-2.0 * x(0) * (1.0 + x(1)), -2.0 * x(1) * (1.0 + x(1)) + (1.0 - x.squaredNorm())});
  };
  const SensitivityProblem p = kappa_problem(6, 8, d);
  const SpaceTimeField z = material_derivative(p);
  const FeSpace& space = p.space();
  const auto& bdofs = space.boundary_dofs();
  for (std::size_t i = 0; i < space.num_dofs(); ++i) {
    if (std::find(bdofs.begin(), bdofs.end(), static_cast<int>(i)) != bdofs.end()) continue;
    const Vec& x = space.mesh().vertex(i);
    EXPECT_NEAR(z.snapshots[0](i), d.grad_g(x).dot(p.velocity().eval(x)), 1e-12);
  }
}

TEST(Sensitivity, DerivativesAreLinearInVelocity) {
  const SensitivityProblem p = kappa_problem(5, 8, disk_source());
  const SensitivityProblem q = p.with_velocity(p.velocity().scaled(2.0));
  const SpaceTimeField z1 = material_derivative(p), z2 = material_derivative(q);
  const SpaceTimeField u1 = shape_derivative(p), u2 = shape_derivative(q);
  for (std::size_t j = 0; j < z1.snapshots.size(); ++j) {
    EXPECT_LE((z2.snapshots[j] - 2.0 * z1.snapshots[j]).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + max_abs(z1)));
    EXPECT_LE((u2.snapshots[j] - 2.0 * u1.snapshots[j]).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + max_abs(u1)));
  }
}

TEST(Sensitivity, TranslationHasZeroMaterialDerivative) {
  // Constant V on a translation-invariant problem moves u0 rigidly, so z = 0
  // and u' = -d_x u0.
  SourceData d;
  d.f = [](double, const Vec&) { return 4.0; };
  const VelocityField v = VelocityField::affine(Mat::Zero(2, 2), make_vec({1.0, 0.0}), Vec::Zero(2),
                                                RadialCutoff{1.5, 1.9}, kDomain);
  SensitivityProblem p(disk_space(12), TimeGrid(0.5, 16), d, v);
  p.flux_method = FluxMethod::variational;
  p.boundary_normal = [](const Vec& x) { Vec n = x / x.norm(); return n; };
  const SpaceTimeField z = material_derivative(p);
  EXPECT_LE(max_abs(z), 1e-12);

  const SpaceTimeField up = shape_derivative(p);
  const SpaceTimeField from_z = shape_from_material(z, p);
  SpaceTimeField diff = up;
  for (std::size_t j = 0; j < diff.snapshots.size(); ++j) diff.snapshots[j] -= from_z.snapshots[j];
  const double rel = compute_norm(p.space(), diff, NormKind::L2L2) / compute_norm(p.space(), up, NormKind::L2L2);
  EXPECT_LE(rel, 0.05);
}

TEST(Sensitivity, ShapeIdentityDiscrepancyShrinksUnderRefinement) {
  std::vector<double> disc;
  for (auto [rings, steps] : {std::pair{8, 16}, std::pair{16, 32}}) {
    const SensitivityProblem p = disk_problem(disk_benchmark(rings, steps));
    disc.push_back(shape_identity_discrepancy(p, material_derivative(p), shape_derivative(p)));
  }
  EXPECT_LE(disc[1], 0.02);
  EXPECT_LE(disc[1], 0.5 * disc[0]);
}

TEST(Sensitivity, BoundaryDatumIsFluxTimesNormalVelocity) {
  const SensitivityProblem p = kappa_problem(6, 4, disk_source());
  const auto datum = shape_boundary_datum(p);
  FluxOptions o;
  o.method = FluxMethod::variational;
  o.normal = p.boundary_normal;
  o.source = p.data().f;
  const BoundaryFlux flux = boundary_flux(p.space(), p.u0(), o);
  ASSERT_EQ(datum.size(), flux.values.size());
  for (std::size_t j = 0; j < datum.size(); ++j) {
    for (std::size_t k = 0; k < flux.vertices.size(); ++k) {
      const Vec& x = p.space().mesh().vertex(flux.vertices[k]);
      const double vn = std::cos(std::atan2(x(1), x(0)));
      EXPECT_NEAR(datum[j](k), -flux.values[j](k) * vn, 1e-12);
    }
  }
}

TEST(FunctionalDerivative, AreaAndPerimeterOfDisk) {
  const auto space = disk_space(6);
  const Circle circle;
  const VelocityField v = velocity_from_kappa(std::make_shared<Circle>(), constant_kappa(1.0), kDomain);
  const VectorXd one = VectorXd::Ones(space->num_dofs());
  const VectorXd zero = VectorXd::Zero(space->num_dofs());
  EXPECT_NEAR(functional_derivative(*space, one, zero, v, circle, FunctionalKind::volume), 2.0 * kPi, 1e-10);
  EXPECT_NEAR(functional_derivative(*space, one, zero, v, circle, FunctionalKind::surface), 2.0 * kPi, 1e-10);
  const VelocityField none = VelocityField::zero(kDomain);
  EXPECT_EQ(functional_derivative(*space, one, zero, none, circle, FunctionalKind::volume), 0.0);
}

TEST(FunctionalDerivative, VolumeTermAddsIntegralOfShapeDerivative) {
  const auto space = disk_space(6);
  const Circle circle;
  const VectorXd one = VectorXd::Ones(space->num_dofs());
  const VectorXd zero = VectorXd::Zero(space->num_dofs());
  const double area = one.dot(assemble_mass(*space) * one);
  EXPECT_NEAR(functional_derivative(*space, zero, one, VelocityField::zero(kDomain), circle, FunctionalKind::volume),
              area, 1e-12);
}

TEST(NormalDerivative, ConstantKappaLeavesNormalFixed) {
  const auto dn = normal_derivative_field(std::make_shared<Circle>(), constant_kappa(0.7));
  for (double t : {0.0, 1.0, 3.0}) EXPECT_EQ(dn(make_vec({t})).norm(), 0.0);
}

TEST(NormalDerivative, CosineKappaOnUnitCircle) {
  const auto dn = normal_derivative_field(std::make_shared<Circle>(), cosine_kappa());
  for (double t : {0.3, 1.2, 2.9, 5.1}) {
    const Vec n = dn(make_vec({t}));
    EXPECT_NEAR(n.norm(), std::abs(std::sin(t)), 1e-14);
    EXPECT_NEAR(n.dot(make_vec({std::cos(t), std::sin(t)})), 0.0, 1e-14);
  }
}

TEST(NormalDerivative, MatchesDifferenceOfPerturbedNormals) {
  // The boundary x(t) = (1 + eps cos t)(cos t, sin t) has normal
  // proportional to (x'(t) rotated clockwise).
  const auto dn = normal_derivative_field(std::make_shared<Circle>(), cosine_kappa());
  auto normal = [](double t, double eps) {
    const double r = 1.0 + eps * std::cos(t), dr = -eps * std::sin(t);
    const Vec tangent = make_vec({dr * std::cos(t) - r * std::sin(t), dr * std::sin(t) + r * std::cos(t)});
    return Vec(make_vec({tangent(1), -tangent(0)}) / tangent.norm());
  };
  const double t = 0.8;
  std::vector<double> eps{1e-2, 5e-3, 2.5e-3}, err;
  for (double e : eps) err.push_back(((normal(t, e) - normal(t, 0.0)) / e - dn(make_vec({t}))).norm());
  EXPECT_NEAR(loglog_slope(eps, err), 1.0, 0.1);
}

TEST(ProbeSeries, CsvLayout) {
  const SensitivityProblem p = kappa_problem(3, 2, disk_source());
  std::ostringstream os;
  write_probe_series_csv(os, p.space(), p.u0(), {make_vec({0.1, 0.2})});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "time,probe,x,y,value");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}
