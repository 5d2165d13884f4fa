#include "shapeuq/heat_bem.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace shapeuq;
using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = 0.57721566490153286061;

double heat2d(double t, double r2) { return t > 0.0 ? std::exp(-r2 / (4.0 * t)) / (4.0 * kPi * t) : 0.0; }

// Adaptive integral of f over [a, b].
template <class F>
double integrate(F f, double a, double b) {
  return gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14);
}

// Same over [0, tau] split geometrically around the scale r2, where the
// kernels in time have their peak.
template <class F>
double integrate_in_time(F f, double tau, double r2) {
  double total = 0.0, lo = 0.0;
  for (double cut = 0.01 * r2; cut < tau; cut *= 10.0) {
    total += integrate(f, lo, cut);
    lo = cut;
  }
  return total + integrate(f, lo, tau);
}

BoundaryDensity random_density(std::size_t elements, const TimeGrid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  BoundaryDensity d(elements, grid);
  for (int k = 0; k < grid.N; ++k)
    for (std::size_t e = 0; e < elements; ++e) d(k, e) = n(rng);
  return d;
}

// Galerkin entry of a lag-1 block for two elements by nested Gauss rules;
// kernel(tau, x, y) with tau = t - s.
template <class Kernel>
double block_entry(const BoundaryElementMesh& m, std::size_t row, std::size_t col, double dt, Kernel kernel) {
  using Q = gauss<double, 12>;
  auto point = [&](std::size_t e, double s) { return Vec(m.start(e) + s * (m.end(e) - m.start(e))); };
  return m.length(row) * m.length(col) * Q::integrate([&](double a) {
    return Q::integrate([&](double b) {
      const Vec x = point(row, a), y = point(col, b);
      return Q::integrate([&](double t) {
        return Q::integrate([&](double s) { return kernel(t - s, x, y); }, 0.0, dt);
      }, dt, 2.0 * dt);
    }, 0.0, 1.0);
  }, 0.0, 1.0);
}

}  // namespace

TEST(HeatKernel, ValuesAndCausality) {
  EXPECT_EQ(kernel_eval({2}, 0.0, make_vec({0.1, 0.0})), 0.0);
  EXPECT_EQ(kernel_eval({2}, -1.0, make_vec({0.0, 0.0})), 0.0);
  EXPECT_NEAR(kernel_eval({2}, 0.5, make_vec({0.3, 0.4})), heat2d(0.5, 0.25), 1e-15);
  EXPECT_NEAR(kernel_eval({3}, 1.0, make_vec({0.0, 0.0, 0.0})), std::pow(4.0 * kPi, -1.5), 1e-15);
}

TEST(HeatKernel, UnitMassInThePlane) {
  const double t = 0.3;
  const double mass = integrate([&](double r) { return 2.0 * kPi * r * kernel_eval({2}, t, make_vec({r, 0.0})); }, 0.0, 20.0);
  EXPECT_NEAR(mass, 1.0, 1e-6);
}

TEST(ExpIntegral, MatchesBoost) {
  for (double x : {1e-10, 1e-3, 0.1, 0.5, 1.0, 2.0, 7.5, 30.0, 300.0}) {
    const double ref = boost::math::expint(1, x);
    EXPECT_NEAR(exp_integral_e1(x), ref, 1e-13 * std::abs(ref) + 1e-300) << x;
  }
}

TEST(Primitives, SingleLayerByQuadrature) {
  for (double r2 : {1e-4, 0.05, 0.7, 3.0}) {
    for (double tau : {0.01, 0.3, 2.0}) {
      const double g1 = integrate_in_time([&](double s) { return heat2d(s, r2); }, tau, r2);
      EXPECT_NEAR(single_layer_primitive1(tau, r2), g1, 1e-10 * (1.0 + g1));
      const double g2 = integrate_in_time([&](double s) { return single_layer_primitive1(s, r2); }, tau, r2);
      EXPECT_NEAR(single_layer_primitive2(tau, r2), g2, 1e-10 * (1.0 + g2));
      EXPECT_NEAR(single_layer_primitive2_regular(tau, r2), g2 + tau / (4.0 * kPi) * std::log(r2), 1e-10);
    }
    EXPECT_EQ(single_layer_primitive1(0.0, r2), 0.0);
    EXPECT_EQ(single_layer_primitive2(-1.0, r2), 0.0);
  }
}

TEST(Primitives, RegularPartHasFiniteLimitAtZeroDistance) {
  for (double tau : {0.1, 1.0}) {
    const double limit = tau / (4.0 * kPi) * (std::log(4.0 * tau) - kEulerGamma - 1.0);
    EXPECT_NEAR(single_layer_primitive2_regular(tau, 1e-24), limit, 1e-10);
    EXPECT_NEAR(single_layer_primitive2_regular(tau, 0.0), limit, 1e-10);
  }
}

TEST(Primitives, DoubleLayerByQuadrature) {
  // dG/dn_y = G (x - y).n / 2s = [(x - y).n / 2 pi r^2] r^2 exp(-r^2/4s) / 4 s^2.
  for (double r2 : {0.01, 0.5, 2.0}) {
    for (double tau : {0.05, 0.4, 3.0}) {
      const double d1 = integrate([&](double s) { return r2 / (4.0 * s * s) * std::exp(-r2 / (4.0 * s)); }, 0.0, tau);
      EXPECT_NEAR(double_layer_primitive1(tau, r2), d1, 1e-10);
      const double d2 = integrate([&](double s) { return double_layer_primitive1(s, r2); }, 0.0, tau);
      EXPECT_NEAR(double_layer_primitive2(tau, r2), d2, 1e-10);
    }
  }
}

TEST(BoundaryElementMesh, CircleGeometry) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(2.0, 24);
  EXPECT_EQ(m.size(), 24u);
  EXPECT_NEAR(m.perimeter(), 2.0 * 24 * 2.0 * std::sin(kPi / 24), 1e-13);
  for (std::size_t e = 0; e < m.size(); ++e) {
    EXPECT_NEAR(m.normal(e).norm(), 1.0, 1e-15);
    EXPECT_GT(m.normal(e).dot(m.midpoint(e)), 0.0);
  }
  EXPECT_TRUE(m.inside(make_vec({0.3, -1.2})));
  EXPECT_FALSE(m.inside(make_vec({2.1, 0.0})));
  EXPECT_NEAR(m.distance(make_vec({0.0, 0.0})), 2.0 * std::cos(kPi / 24), 1e-13);
}

TEST(BoundaryElementMesh, FromFiniteElementMesh) {
  const Mesh fem = Mesh::unit_square(3);
  const BoundaryElementMesh m = BoundaryElementMesh::from_mesh(fem);
  EXPECT_EQ(m.size(), 12u);
  EXPECT_NEAR(m.perimeter(), 4.0, 1e-14);
  EXPECT_TRUE(m.inside(make_vec({0.5, 0.5})));
}

TEST(LayerPotentials, ZeroDensityAndCausality) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 16);
  const TimeGrid grid(1.0, 8);
  const Vec x = make_vec({0.2, 0.1});
  BoundaryDensity psi(16, grid);
  EXPECT_EQ(eval_single_layer(m, psi, 1.0, x), 0.0);
  EXPECT_EQ(eval_double_layer(m, psi, 1.0, x), 0.0);
  // Density supported on interval 4 = [0.5, 0.625].
  psi.values.col(4).setConstant(1.0);
  EXPECT_EQ(eval_single_layer(m, psi, 0.5, x), 0.0);
  EXPECT_EQ(eval_double_layer(m, psi, 0.4, x), 0.0);
  EXPECT_GT(eval_single_layer(m, psi, 0.7, x), 0.0);
}

TEST(LayerPotentials, SingleElementAgainstQuadrature) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 12);
  const TimeGrid grid(1.0, 4);
  BoundaryDensity psi(12, grid);
  psi(1, 3) = 1.0;  // interval [0.25, 0.5], element 3
  const Vec x0 = make_vec({-0.4, -0.5});
  const double t0 = 0.9;
  const double ref = m.length(3) * integrate([&](double a) {
    const Vec y = m.start(3) + a * (m.end(3) - m.start(3));
    const double r2 = (x0 - y).squaredNorm();
    return single_layer_primitive1(t0 - 0.25, r2) - single_layer_primitive1(t0 - 0.5, r2);
  }, 0.0, 1.0);
  EXPECT_NEAR(eval_single_layer(m, psi, t0, x0), ref, 1e-8 * std::abs(ref));
  // Same probe through the matrix form.
  const MatrixXd s = single_layer_matrix(m, grid, {{t0, x0}});
  EXPECT_NEAR(s(0, 1 * 12 + 3), ref, 1e-8 * std::abs(ref));
}

TEST(LayerPotentials, ConstantDensitiesAtDiskCenter) {
  // On the unit circle: K0 1 (t, 0) = E1(1/4t)/2 and K1 1 (t, 0) = -exp(-1/4t).
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 128);
  const TimeGrid grid(1.0, 8);
  BoundaryDensity one(128, grid);
  one.values.setOnes();
  const Vec origin = Vec::Zero(2);
  for (double t : {0.5, 1.0}) {
    const double k0 = 0.5 * boost::math::expint(1, 1.0 / (4.0 * t));
    const double k1 = -std::exp(-1.0 / (4.0 * t));
    EXPECT_NEAR(eval_single_layer(m, one, t, origin), k0, 5e-3 * std::abs(k0));
    EXPECT_NEAR(eval_double_layer(m, one, t, origin), k1, 5e-3 * std::abs(k1));
  }
}

TEST(Operators, SingleLayerBlocksAreSymmetricAndLagZeroIsPositive) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 16);
  const CausalOperator v = assemble(m, TimeGrid(1.0, 6), OperatorKind::V);
  ASSERT_EQ(v.lags(), 6);
  for (const MatrixXd& b : v.blocks) EXPECT_LE((b - b.transpose()).cwiseAbs().maxCoeff(), 1e-14 * b.cwiseAbs().maxCoeff());
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(v.blocks[0]);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Operators, AdjointAndSecondKindRelations) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 12);
  const TimeGrid grid(1.0, 5);
  const CausalOperator k = assemble(m, grid, OperatorKind::K);
  const CausalOperator n = assemble(m, grid, OperatorKind::N);
  const CausalOperator w = assemble(m, grid, OperatorKind::W);
  const VectorXd mass = boundary_mass_diagonal(m, grid);
  for (int l = 0; l < grid.N; ++l) {
    EXPECT_LE((n.blocks[l] - k.blocks[l].transpose()).cwiseAbs().maxCoeff(), 1e-15);
    MatrixXd expected = -k.blocks[l];
    if (l == 0) expected.diagonal() += 0.5 * mass;
    EXPECT_LE((w.blocks[l] - expected).cwiseAbs().maxCoeff(), 1e-15);
  }
  ASSERT_EQ(mass.size(), 12);
  EXPECT_NEAR(mass.sum(), m.perimeter() * grid.dt(), 1e-13);
}

TEST(Operators, FarBlockEntriesMatchQuadrature) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 8);
  const double dt = 0.25;
  const TimeGrid grid(1.0, 4);
  const CausalOperator v = assemble(m, grid, OperatorKind::V);
  const CausalOperator k = assemble(m, grid, OperatorKind::K);
  const std::size_t row = 0, col = 4;  // opposite elements
  const double vref = block_entry(m, row, col, dt, [](double tau, const Vec& x, const Vec& y) {
    return heat2d(tau, (x - y).squaredNorm());
  });
  EXPECT_NEAR(v.blocks[1](row, col), vref, 1e-8 * std::abs(vref));
  const Vec n = m.normal(col);
  const double kref = block_entry(m, row, col, dt, [&](double tau, const Vec& x, const Vec& y) {
    return tau > 0.0 ? heat2d(tau, (x - y).squaredNorm()) * (x - y).dot(n) / (2.0 * tau) : 0.0;
  });
  EXPECT_NEAR(k.blocks[1](row, col), kref, 1e-8 * std::abs(kref));
}

TEST(MarchingSolver, ZeroRightHandSide) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 12);
  const TimeGrid grid(1.0, 4);
  const CausalOperator v = assemble(m, grid, OperatorKind::V);
  const BoundaryDensity x = solve_boundary_equation(v, m, BoundaryDensity(12, grid), EquationKind::first);
  EXPECT_EQ(x.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MarchingSolver, RoundTripsForEveryEquationKind) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 20);
  const TimeGrid grid(1.0, 8);
  const CausalOperator v = assemble(m, grid, OperatorKind::V);
  const CausalOperator k = assemble(m, grid, OperatorKind::K);
  const VectorXd mass = boundary_mass_diagonal(m, grid);
  const BoundaryDensity x = random_density(20, grid, 9);

  const BoundaryDensity bv = apply(v, x);
  EXPECT_LE((solve_boundary_equation(v, m, bv, EquationKind::first).values - x.values).norm(), 1e-10 * x.values.norm());

  const VectorXd half_mx = 0.5 * mass.replicate(grid.N, 1).cwiseProduct(x.stacked());
  const VectorXd kx = apply(k, x).stacked();
  const auto plus = BoundaryDensity::from_stacked(half_mx + kx, 20, grid);
  const auto minus = BoundaryDensity::from_stacked(half_mx - kx, 20, grid);
  EXPECT_LE((solve_boundary_equation(k, m, plus, EquationKind::second_plus).values - x.values).norm(),
            1e-10 * x.values.norm());
  EXPECT_LE((solve_boundary_equation(k, m, minus, EquationKind::second_minus).values - x.values).norm(),
            1e-10 * x.values.norm());

  // Several right-hand sides at once.
  MatrixXd rhs(bv.stacked().size(), 2);
  rhs.col(0) = bv.stacked();
  rhs.col(1) = 3.0 * bv.stacked();
  const MatrixXd sol = MarchingSolver(v, m, EquationKind::first).solve(rhs);
  EXPECT_LE((sol.col(1) - 3.0 * x.stacked()).norm(), 1e-9 * x.values.norm());
  EXPECT_LE((apply_stacked(v, sol) - rhs).norm(), 1e-10 * rhs.norm());
}

TEST(Representation, LinearAndCausal) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 16);
  const TimeGrid grid(1.0, 4);
  const BoundaryDensity a = random_density(16, grid, 1), b = random_density(16, grid, 2);
  BoundaryDensity sum(16, grid);
  sum.values = 2.0 * a.values - b.values;
  const std::vector<Probe> probes{{0.6, make_vec({0.1, 0.3})}, {1.0, make_vec({-0.4, 0.0})}};
  const auto ra = represent_interior(m, a, probes), rb = represent_interior(m, b, probes);
  const auto rs = represent_interior(m, sum, probes);
  for (std::size_t i = 0; i < probes.size(); ++i) EXPECT_NEAR(rs[i], 2.0 * ra[i] - rb[i], 1e-13);
  // Later intervals do not affect earlier probes.
  BoundaryDensity late = a;
  late.values.col(3).setConstant(100.0);
  EXPECT_EQ(represent_interior(m, late, {{0.6, probes[0].x}})[0], represent_interior(m, a, {{0.6, probes[0].x}})[0]);
}

TEST(Representation, ExteriorPointSourceIsReproduced) {
  // u = G1(t, |x - xs|^2) solves the heat equation in the disk with zero
  // initial value when xs lies outside.
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 48);
  const TimeGrid grid(1.0, 16);
  const Vec xs = make_vec({2.0, 0.0});
  auto exact = [&](double t, const Vec& x) { return single_layer_primitive1(t, (x - xs).squaredNorm()); };
  const BoundaryDensity trace = l2_coefficients(m, grid, exact);
  const CausalOperator v = assemble(m, grid, OperatorKind::V);
  const CausalOperator k = assemble(m, grid, OperatorKind::K);
  std::vector<Probe> probes;
  for (int i = 0; i < 8; ++i) {
    const double a = 2.0 * kPi * i / 8;
    probes.push_back({0.5 + 0.0625 * i, make_vec({0.5 * std::cos(a), 0.5 * std::sin(a)})});
  }
  for (Representation rep : {Representation::c, Representation::a, Representation::d}) {
    const BoundaryDensity d = dirichlet_density(m, trace, rep, v, &k);
    const auto got = represent_interior(m, d, probes, rep, &trace);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const double e = exact(probes[i].t, probes[i].x);
      err = std::max(err, std::abs(got[i] - e));
      scale = std::max(scale, std::abs(e));
    }
    EXPECT_LE(err, 0.02 * scale) << static_cast<int>(rep);
  }
}

TEST(DataProjection, ConstantDataAndVertexLoads) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 10);
  const TimeGrid grid(2.0, 4);
  const BoundaryDensity c = l2_coefficients(m, grid, [](double, const Vec&) { return 3.0; });
  EXPECT_NEAR((c.values.array() - 3.0).abs().maxCoeff(), 0.0, 1e-13);
  // A field linear in time, constant in space, given at the vertices.
  std::vector<VectorXd> nodal;
  for (int j = 0; j <= 4; ++j) nodal.push_back(VectorXd::Constant(10, grid.t(j)));
  const BoundaryDensity load = load_from_vertex_values(m, grid, nodal);
  const BoundaryDensity proj = project_data(m, grid, [](double t, const Vec&) { return t; });
  EXPECT_LE((load.values - proj.values).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(VertexTrace, PicksMatchingPointsAndRejectsMissing) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 6);
  std::vector<Vec> points(m.vertices().rbegin(), m.vertices().rend());
  VectorXd vals(6);
  for (int i = 0; i < 6; ++i) vals(i) = i;
  const auto trace = vertex_trace(m, points, {vals});
  for (int e = 0; e < 6; ++e) EXPECT_EQ(trace[0](e), 5 - e);
  points.pop_back();
  EXPECT_THROW(vertex_trace(m, points, {vals.head(5)}), DomainError);
}

TEST(OperatorIo, BinaryRoundTrip) {
  const BoundaryElementMesh m = BoundaryElementMesh::circle(1.0, 6);
  const CausalOperator k = assemble(m, TimeGrid(0.5, 3), OperatorKind::K);
  std::stringstream ss;
  write_operator_binary(ss, k);
  EXPECT_EQ(ss.str().substr(0, 8), "SHUQOP01");
  const CausalOperator r = read_operator_binary(ss);
  EXPECT_EQ(r.kind, OperatorKind::K);
  EXPECT_DOUBLE_EQ(r.grid.dt(), k.grid.dt());
  ASSERT_EQ(r.lags(), 3);
  for (int l = 0; l < 3; ++l) EXPECT_EQ(r.blocks[l], k.blocks[l]);
  std::stringstream bad("NOTANOP!");
  EXPECT_THROW(read_operator_binary(bad), std::exception);
}
