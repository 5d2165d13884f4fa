#include "shapeuq/verification.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace shapeuq;

namespace {

std::vector<double> halving(double start, int n) {
  std::vector<double> p;
  for (int i = 0; i < n; ++i) p.push_back(start / (1 << i));
  return p;
}

}  // namespace

TEST(EvaluateStudy, RecoversSyntheticSlope) {
  const auto p = halving(0.1, 5);
  std::vector<double> e;
  for (double x : p) e.push_back(2.0 * x);
  RateStudy s = make_study("lin", "linear", p, e, 1.0, 0.9, 1.1);
  EXPECT_NEAR(s.slope, 1.0, 1e-6);
  EXPECT_TRUE(s.passed);
  EXPECT_FALSE(s.floor_start.has_value());
  EXPECT_FALSE(s.degenerate);
}

TEST(EvaluateStudy, QuadraticFailsLinearWindow) {
  const auto p = halving(0.1, 4);
  std::vector<double> e;
  for (double x : p) e.push_back(x * x);
  const RateStudy s = make_study("quad", "", p, e, 1.0, 0.9, 1.1);
  EXPECT_NEAR(s.slope, 2.0, 1e-9);
  EXPECT_FALSE(s.passed);
}

TEST(EvaluateStudy, AllZeroErrorsAreDegeneratePass) {
  const RateStudy s = make_study("zero", "", halving(0.1, 4), {0.0, 0.0, 1e-15, 0.0}, 1.0, 0.9, 1.1);
  EXPECT_TRUE(s.degenerate);
  EXPECT_TRUE(s.passed);
}

TEST(EvaluateStudy, DetectsInjectedFloorAndFitsAboveIt) {
  const auto p = halving(0.1, 7);
  std::vector<double> e;
  for (double x : p) e.push_back(std::max(x, 5e-3));  // flat from 0.003125 on
  const RateStudy s = make_study("floor", "", p, e, 1.0, 0.9, 1.1);
  ASSERT_TRUE(s.floor_start.has_value());
  EXPECT_EQ(*s.floor_start, 5u);
  EXPECT_NEAR(s.slope, 1.0, 1e-9);
  EXPECT_TRUE(s.passed);
}

TEST(EvaluateStudy, TooFewPointsAboveFloorFails) {
  const auto p = halving(0.1, 5);
  const RateStudy s = make_study("flat", "", p, {1e-2, 1e-2, 1e-2, 1e-2, 1e-2}, 1.0, 0.9, 1.1);
  EXPECT_FALSE(s.passed);
}

TEST(EvaluateStudy, MonotoneRequirement) {
  const auto p = halving(0.1, 4);
  const RateStudy s = make_study("bump", "", p, {0.1, 0.05, 0.03, 0.0125}, 1.0, 0.5, 1.5, true);
  EXPECT_TRUE(s.monotone);
  const RateStudy t = make_study("rise", "", p, {0.1, 0.05, 0.06, 0.0125}, 1.0, 0.5, 1.5, true);
  EXPECT_FALSE(t.monotone);
  EXPECT_FALSE(t.passed);
}

TEST(RelativeDeviation, Definition) {
  EXPECT_NEAR(relative_deviation({1.0, 2.1}, {1.0, 2.0}), 0.05, 1e-14);
  EXPECT_NEAR(relative_deviation({0.5, -1.0}, {1.0, -2.0}), 0.5, 1e-14);
  EXPECT_NEAR(relative_deviation({0.1}, {0.0}), 0.1, 1e-15);
}

TEST(Reports, PassFailLinesAndCsv) {
  RateStudy ok = make_study("ok", "", halving(0.1, 4), {0.1, 0.05, 0.025, 0.0125}, 1.0, 0.9, 1.1);
  CheckResult bad{"bad", "", 2.0, 1.0, false, ""};
  std::ostringstream os;
  write_report(os, "title", {ok}, {bad});
  EXPECT_NE(os.str().find("PASS"), std::string::npos);
  EXPECT_NE(os.str().find("FAIL"), std::string::npos);
  EXPECT_FALSE(all_passed({ok}, {bad}));
  bad.passed = true;
  EXPECT_TRUE(all_passed({ok}, {bad}));
  std::ostringstream a, b;
  write_studies_csv(a, {ok});
  write_checks_csv(b, {bad});
  EXPECT_EQ(a.str().rfind("study,index,parameter,error,on_floor,slope,passed\n", 0), 0u);
  EXPECT_EQ(b.str().rfind("check,value,threshold,passed\n", 0), 0u);
}

TEST(Kinematics, ZeroVelocityIsDegenerate) {
  KinematicsOptions o;
  o.sup_lattice = 8;
  o.cells = 4;
  const auto studies = kinematics_rates(VelocityField::zero(Box::cube(2, -1.0, 1.0)), {0.1, 0.01, 0.001, 0.0001},
                                        KinematicsTestFunctions::preset(2), o);
  EXPECT_EQ(studies.size(), 9u);
  for (const RateStudy& s : studies) {
    EXPECT_TRUE(s.degenerate) << s.name;
    EXPECT_TRUE(s.passed) << s.name;
  }
}

TEST(Kinematics, AffineFieldGivesFirstOrderRates) {
  const VelocityField v = VelocityField::affine((Mat(2, 2) << 0.3, -0.2, 0.5, 0.1).finished(), make_vec({0.1, 0.0}),
                                                Vec::Zero(2), RadialCutoff{0.4, 0.8}, Box::cube(2, -1.0, 1.0));
  KinematicsOptions o;
  o.sup_lattice = 16;
  o.cells = 8;
  for (const RateStudy& s : kinematics_rates(v, {0.1, 0.01, 0.001, 0.0001}, KinematicsTestFunctions::preset(2), o)) {
    EXPECT_TRUE(s.passed) << s.name << " slope " << s.slope;
  }
  const CheckResult c = a_prime_fd_check(v, 50, 1e-6, 3);
  EXPECT_TRUE(c.passed);
  EXPECT_LE(c.value, 1e-6);
}

TEST(ManufacturedSolution, SpatialStudyPasses) {
  const RateStudy s = mms_spatial_study({8, 16, 32}, 128);
  EXPECT_TRUE(s.passed) << s.slope;
  EXPECT_EQ(s.parameter, "h");
}

TEST(EnergyEstimate, InequalitiesHoldOnRandomData) {
  auto space = std::make_shared<FeSpace>(std::make_shared<Mesh>(Mesh::disk(1.0, 4)));
  const EnergyEstimateResult r = energy_estimate_checks(space, {0.5, 1.0}, 6, 1.0 / 16, 17);
  EXPECT_EQ(r.datasets, 6u);
  EXPECT_GT(r.max_ratio_l2, 0.0);
  EXPECT_LE(r.max_ratio_l2, r.constant_l2);
  EXPECT_LE(r.max_ratio_h1, r.constant_h1);
  EXPECT_GT(r.constant_l2, 1.0);
  EXPECT_NEAR(r.constant_h1 * r.constant_h1, 4.0 * r.constant_l2, 1e-12);
  for (const CheckResult& c : r.checks) EXPECT_TRUE(c.passed) << c.name;
}

TEST(DerivativeRates, ZeroVelocityIsDegenerate) {
  const DiskBenchmark b = disk_benchmark(4, 4);
  SensitivityProblem p = disk_problem(b).with_velocity(VelocityField::zero(b.domain));
  const DerivativeRates r = derivative_rates(p, {0.1, 0.05, 0.025});
  ASSERT_FALSE(r.studies.empty());
  for (const RateStudy& s : r.studies) EXPECT_TRUE(s.degenerate) << s.name;
}

TEST(Crosscheck, DeviationShrinksUnderRefinement) {
  auto deviation = [](int rings, int elements, int steps) {
    const DiskBenchmark b = disk_benchmark(rings, steps);
    const SensitivityProblem p = disk_problem(b);
    const SpaceTimeField up = shape_derivative(p);
    const BoundaryElementMesh mesh = BoundaryElementMesh::circle(1.0, elements);
    const CausalOperator v = assemble(mesh, b.grid, OperatorKind::V);
    const auto probes = probes_at(b.probe_points, {b.grid.t(steps / 2), b.grid.t(steps)});
    return crosscheck_bem_fem(p, up, mesh, v, probes).max_relative_deviation;
  };
  const double coarse = deviation(8, 16, 8);
  const double fine = deviation(16, 32, 16);
  EXPECT_LT(fine, coarse);
  EXPECT_LT(fine, 0.05);
}

TEST(Benchmarks, DiskBenchmarkLayout) {
  const DiskBenchmark b = disk_benchmark(4, 8, 1.0, 6);
  EXPECT_EQ(b.probe_points.size(), 6u);
  for (const Vec& x : b.probe_points) EXPECT_NEAR(x.norm(), 0.5, 1e-14);
  EXPECT_EQ(b.grid.N, 8);
  const auto probes = probes_at(b.probe_points, {0.5, 1.0});
  EXPECT_EQ(probes.size(), 12u);
}
