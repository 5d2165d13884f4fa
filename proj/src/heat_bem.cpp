#include "shapeuq/heat_bem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <boost/math/special_functions/expint.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace shapeuq {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = std::numbers::egamma;

// E1(x) + gamma + log(x) = sum_{k>=1} (-1)^{k+1} x^k / (k k!), for small x.
double e1_series_tail(double x) {
  double term = x, sum = x;
  for (int k = 2; k < 60; ++k) {
    term *= -x / k;
    const double add = term / k;
    sum += add;
    if (std::abs(add) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

}  // namespace

double kernel_eval(const HeatKernel& kernel, double t, const Vec& x) {
  if (t <= 0.0) return 0.0;
  return std::pow(4.0 * kPi * t, -0.5 * kernel.dim) * std::exp(-x.squaredNorm() / (4.0 * t));
}

double exp_integral_e1(double x) {
  if (!(x > 0.0)) throw std::domain_error("E1 requires a positive argument");
  // libstdc++ std::expint loses accuracy for large arguments.
  return boost::math::expint(1, x);
}

double single_layer_primitive1(double tau, double r2) {
  if (tau <= 0.0) return 0.0;
  if (r2 <= 0.0) return std::numeric_limits<double>::infinity();
  return exp_integral_e1(r2 / (4.0 * tau)) / (4.0 * kPi);
}

double single_layer_primitive2(double tau, double r2) {
  if (tau <= 0.0) return 0.0;
  if (r2 <= 0.0) return std::numeric_limits<double>::infinity();
  const double a = 0.25 * r2, x = a / tau;
  return ((tau + a) * exp_integral_e1(x) - tau * std::exp(-x)) / (4.0 * kPi);
}

double single_layer_primitive2_regular(double tau, double r2) {
  if (tau <= 0.0) return 0.0;
  const double a = 0.25 * r2, x = a / tau;
  if (x < 1.0) {
    const double s = e1_series_tail(x);
    const double log_part = a > 0.0 ? a * (-kEulerGamma - std::log(x) + s) : 0.0;
    return (tau * (-kEulerGamma + std::log(4.0 * tau) + s) + log_part - tau * std::exp(-x)) / (4.0 * kPi);
  }
  return single_layer_primitive2(tau, r2) + tau * std::log(r2) / (4.0 * kPi);
}

double double_layer_primitive1(double tau, double r2) {
  if (tau <= 0.0) return 0.0;
  return std::exp(-r2 / (4.0 * tau));
}

double double_layer_primitive2(double tau, double r2) {
  if (tau <= 0.0) return 0.0;
  if (r2 <= 0.0) return tau;
  const double a = 0.25 * r2, x = a / tau;
  return tau * std::exp(-x) - a * exp_integral_e1(x);
}

// ---------------------------------------------------------------- mesh

BoundaryElementMesh::BoundaryElementMesh(std::vector<Vec> vertices) : vertices_(std::move(vertices)) {
  const std::size_t n = vertices_.size();
  if (n < 3) throw std::invalid_argument("boundary polygon needs at least three vertices");
  double area = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    if (vertices_[e].size() != 2) throw std::invalid_argument("boundary elements are 2D only");
    const Vec& a = vertices_[e];
    const Vec& b = vertices_[(e + 1) % n];
    area += a(0) * b(1) - a(1) * b(0);
    const Vec t = b - a;
    const double len = t.norm();
    if (len <= 0.0) throw std::invalid_argument("zero-length boundary element");
    lengths_.push_back(len);
    normals_.push_back(make_vec({t(1) / len, -t(0) / len}));
    h_ = std::max(h_, len);
  }
  if (area <= 0.0) throw std::invalid_argument("boundary polygon must be counterclockwise");
}

BoundaryElementMesh BoundaryElementMesh::circle(double radius, int elements, const Vec& center) {
  std::vector<Vec> v;
  for (int e = 0; e < elements; ++e) {
    const double a = 2.0 * kPi * e / elements;
    v.push_back(center + radius * make_vec({std::cos(a), std::sin(a)}));
  }
  return BoundaryElementMesh(std::move(v));
}

BoundaryElementMesh BoundaryElementMesh::from_mesh(const Mesh& mesh) {
  if (mesh.dim() != 2) throw std::invalid_argument("boundary element mesh needs a 2D mesh");
  std::vector<Vec> v;
  for (int i : mesh.boundary_vertices()) v.push_back(mesh.vertex(i));
  return BoundaryElementMesh(std::move(v));
}

double BoundaryElementMesh::perimeter() const {
  double s = 0.0;
  for (double l : lengths_) s += l;
  return s;
}

bool BoundaryElementMesh::inside(const Vec& x) const {
  bool in = false;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec& a = vertices_[i];
    const Vec& b = vertices_[j];
    if ((a(1) > x(1)) != (b(1) > x(1)) &&
        x(0) < (b(0) - a(0)) * (x(1) - a(1)) / (b(1) - a(1)) + a(0)) {
      in = !in;
    }
  }
  return in;
}

namespace {

double point_segment_distance(const Vec& x, const Vec& a, const Vec& b) {
  const Vec t = b - a;
  const double s = std::clamp((x - a).dot(t) / t.squaredNorm(), 0.0, 1.0);
  return (x - a - s * t).norm();
}

}  // namespace

double BoundaryElementMesh::distance(const Vec& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < size(); ++e) d = std::min(d, point_segment_distance(x, start(e), end(e)));
  return d;
}

// ---------------------------------------------------------------- densities

BoundaryDensity::BoundaryDensity(std::size_t elements, const TimeGrid& g)
    : grid(g), values(MatrixXd::Zero(static_cast<Eigen::Index>(elements), g.N)) {}

VectorXd BoundaryDensity::stacked() const {
  return Eigen::Map<const VectorXd>(values.data(), values.size());
}

BoundaryDensity BoundaryDensity::from_stacked(const VectorXd& v, std::size_t elements,
                                              const TimeGrid& grid) {
  BoundaryDensity d(elements, grid);
  if (v.size() != d.values.size()) throw std::invalid_argument("stacked density has the wrong length");
  d.values = Eigen::Map<const MatrixXd>(v.data(), d.values.rows(), d.values.cols());
  return d;
}

// ---------------------------------------------------------------- assembly

namespace {

enum class PairKind { self, adjacent, near, far };

PairKind classify(const BoundaryElementMesh& mesh, std::size_t i, std::size_t j) {
  const std::size_t n = mesh.size();
  if (i == j) return PairKind::self;
  if ((i + 1) % n == j || (j + 1) % n == i) return PairKind::adjacent;
  const double sep = (mesh.midpoint(i) - mesh.midpoint(j)).norm();
  return sep < 3.0 * std::max(mesh.length(i), mesh.length(j)) ? PairKind::near : PairKind::far;
}

struct PointPair {
  Vec x;
  Vec y;
  double weight;
};

// Tensor Gauss rule on the pair, or a Duffy rule around the shared vertex of
// adjacent elements (removes the 1/r behaviour of the double-layer kernel).
std::vector<PointPair> pair_rule(const BoundaryElementMesh& mesh, std::size_t i, std::size_t j,
                                 PairKind kind, const AssemblyOptions& options) {
  std::vector<PointPair> out;
  const double li = mesh.length(i), lj = mesh.length(j);
  if (kind == PairKind::adjacent) {
    const std::size_t n = mesh.size();
    // Parametrize both elements from the shared vertex.
    const bool i_first = (i + 1) % n == j;  // end(i) == start(j)
    const Vec v = i_first ? mesh.end(i) : mesh.start(i);
    const Vec di = (i_first ? mesh.start(i) : mesh.end(i)) - v;
    const Vec dj = (i_first ? mesh.end(j) : mesh.start(j)) - v;
    const auto& g = gauss_legendre(options.gauss_near);
    for (std::size_t a = 0; a < g.nodes.size(); ++a) {
      for (std::size_t b = 0; b < g.nodes.size(); ++b) {
        const double u = g.nodes[a], w = g.nodes[b];
        const double wt = g.weights[a] * g.weights[b] * u * li * lj;
        out.push_back({v + u * di, v + u * w * dj, wt});
        out.push_back({v + u * w * di, v + u * dj, wt});
      }
    }
    return out;
  }
  const int np = kind == PairKind::far ? options.gauss_far : options.gauss_near;
  const auto& g = gauss_legendre(np);
  const Vec ai = mesh.start(i), ti = mesh.end(i) - ai;
  const Vec aj = mesh.start(j), tj = mesh.end(j) - aj;
  for (std::size_t a = 0; a < g.nodes.size(); ++a) {
    for (std::size_t b = 0; b < g.nodes.size(); ++b) {
      out.push_back({ai + g.nodes[a] * ti, aj + g.nodes[b] * tj, g.weights[a] * g.weights[b] * li * lj});
    }
  }
  return out;
}

// int_0^L log((s - s0)^2 + eta^2) ds through its antiderivative.
double segment_log_integral(const Vec& x, const Vec& a, const Vec& b) {
  const Vec t = b - a;
  const double len = t.norm();
  const Vec u = t / len;
  const double s0 = (x - a).dot(u);
  const double eta = std::abs((x - a)(0) * u(1) - (x - a)(1) * u(0));
  auto f = [eta](double z) {
    double v = -2.0 * z;
    const double q = z * z + eta * eta;
    if (z != 0.0 && q > 0.0) v += z * std::log(q);
    if (eta > 0.0) v += 2.0 * eta * std::atan(z / eta);
    return v;
  };
  return f(len - s0) - f(-s0);
}

// int_{Gamma_i} int_{Gamma_j} log |x - y|^2.
double pair_log_integral(const BoundaryElementMesh& mesh, std::size_t i, std::size_t j, PairKind kind) {
  const double li = mesh.length(i);
  if (kind == PairKind::self) return 2.0 * li * li * (std::log(li) - 1.5);
  const Vec ai = mesh.start(i), ti = mesh.end(i) - ai;
  if (kind != PairKind::adjacent) {
    const auto& g = gauss_legendre(16);
    double s = 0.0;
    for (std::size_t k = 0; k < g.nodes.size(); ++k) {
      s += g.weights[k] * segment_log_integral(ai + g.nodes[k] * ti, mesh.start(j), mesh.end(j));
    }
    return s * li;
  }
  // Geometric grading toward the vertex shared with element j.
  const std::size_t n = mesh.size();
  const bool toward_end = (i + 1) % n == j;
  const auto& g = gauss_legendre(8);
  double s = 0.0, hi = 1.0;
  for (int level = 0; level < 24; ++level) {
    const double lo = level == 23 ? 0.0 : 0.25 * hi;
    for (std::size_t k = 0; k < g.nodes.size(); ++k) {
      const double d = lo + (hi - lo) * g.nodes[k];  // distance fraction from the shared vertex
      const double sigma = toward_end ? 1.0 - d : d;
      s += (hi - lo) * g.weights[k] * segment_log_integral(ai + sigma * ti, mesh.start(j), mesh.end(j));
    }
    hi = lo;
  }
  return s * li;
}

}  // namespace

CausalOperator assemble(const BoundaryElementMesh& mesh, const TimeGrid& grid, OperatorKind which,
                        const AssemblyOptions& options) {
  if (which == OperatorKind::N || which == OperatorKind::W) {
    CausalOperator k = assemble(mesh, grid, OperatorKind::K, options);
    k.kind = which;
    for (auto& b : k.blocks) {
      if (which == OperatorKind::N) {
        b.transposeInPlace();
      } else {
        b = -b;
      }
    }
    if (which == OperatorKind::W) k.blocks[0] += 0.5 * boundary_mass_diagonal(mesh, TimeGrid(grid.dt(), 1)).asDiagonal();
    return k;
  }

  const std::size_t ne = mesh.size();
  const int nt = grid.N;
  const double dt = grid.dt();
  CausalOperator op;
  op.kind = which;
  op.grid = grid;
  op.blocks.assign(nt, MatrixXd::Zero(static_cast<Eigen::Index>(ne), static_cast<Eigen::Index>(ne)));
  const bool single = which == OperatorKind::V;

  parallel_for(ne, options.workers, [&](std::size_t i) {
    std::vector<double> prim(nt + 1);
    std::vector<double> acc(nt);
    for (std::size_t j = single ? i : 0; j < ne; ++j) {
      const PairKind kind = classify(mesh, i, j);
      if (!single && kind == PairKind::self) continue;  // (x - y).n_y = 0 on a straight element
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const PointPair& pp : pair_rule(mesh, i, j, kind, options)) {
        const Vec d = pp.x - pp.y;
        const double r2 = d.squaredNorm();
        double factor = pp.weight;
        if (single) {
          for (int k = 0; k <= nt; ++k) prim[k] = single_layer_primitive2_regular(k * dt, r2);
        } else {
          if (r2 == 0.0) continue;
          factor *= d.dot(mesh.normal(j)) / (2.0 * kPi * r2);
          for (int k = 0; k <= nt; ++k) prim[k] = double_layer_primitive2(k * dt, r2);
        }
        // Second differences of the primitive give the lag integrals.
        acc[0] += factor * prim[1];
        for (int l = 1; l < nt; ++l) acc[l] += factor * (prim[l + 1] - 2.0 * prim[l] + prim[l - 1]);
      }
      if (single) acc[0] -= dt / (4.0 * kPi) * pair_log_integral(mesh, i, j, kind);
      for (int l = 0; l < nt; ++l) {
        op.blocks[l](i, j) = acc[l];
        if (single) op.blocks[l](j, i) = acc[l];
      }
    }
  });
  return op;
}

VectorXd boundary_mass_diagonal(const BoundaryElementMesh& mesh, const TimeGrid& grid) {
  VectorXd m(static_cast<Eigen::Index>(mesh.size()));
  for (std::size_t e = 0; e < mesh.size(); ++e) m(e) = mesh.length(e) * grid.dt();
  return m;
}

MatrixXd apply_stacked(const CausalOperator& op, const MatrixXd& x) {
  const auto ne = static_cast<Eigen::Index>(op.elements());
  const int nt = op.lags();
  if (x.rows() != ne * nt) throw std::invalid_argument("density size does not match the operator");
  MatrixXd y = MatrixXd::Zero(x.rows(), x.cols());
  for (int k = 0; k < nt; ++k) {
    for (int l = 0; l <= k; ++l) {
      y.middleRows(k * ne, ne).noalias() += op.blocks[k - l] * x.middleRows(l * ne, ne);
    }
  }
  return y;
}

BoundaryDensity apply(const CausalOperator& op, const BoundaryDensity& psi) {
  const MatrixXd y = apply_stacked(op, psi.stacked());
  return BoundaryDensity::from_stacked(y.col(0), psi.elements(), psi.grid);
}

// ---------------------------------------------------------------- marching

struct MarchingSolver::Impl {
  Eigen::LLT<MatrixXd> llt;
  Eigen::PartialPivLU<MatrixXd> lu;
  bool use_llt = false;
  double rcond = 0.0;
  double history_sign = 1.0;  // -1 for (1/2 M - A)
};

MarchingSolver::~MarchingSolver() = default;
MarchingSolver::MarchingSolver(MarchingSolver&&) noexcept = default;

MarchingSolver::MarchingSolver(const CausalOperator& op, const BoundaryElementMesh& mesh,
                               EquationKind kind)
    : op_(&op), impl_(std::make_unique<Impl>()) {
  if (op.elements() != mesh.size()) throw std::invalid_argument("operator and mesh sizes differ");
  MatrixXd s = op.blocks.at(0);
  if (kind != EquationKind::first) {
    const VectorXd m = boundary_mass_diagonal(mesh, op.grid);
    const double sign = kind == EquationKind::second_plus ? 1.0 : -1.0;
    s = sign * s;
    s.diagonal() += 0.5 * m;
    impl_->history_sign = sign;
  }
  if (kind == EquationKind::first && op.kind == OperatorKind::V) {
    impl_->llt.compute(s);
    if (impl_->llt.info() != Eigen::Success) {
      throw NumericalError("lag-0 single-layer block is not positive definite (time step too coarse?)");
    }
    impl_->use_llt = true;
    impl_->rcond = impl_->llt.rcond();
  } else {
    impl_->lu.compute(s);
    impl_->rcond = impl_->lu.rcond();
  }
  if (!(impl_->rcond > 1e-14)) throw NumericalError("singular stepping block");
}

double MarchingSolver::stepping_rcond() const { return impl_->rcond; }

MatrixXd MarchingSolver::solve(const MatrixXd& rhs) const {
  const auto ne = static_cast<Eigen::Index>(op_->elements());
  const int nt = op_->lags();
  if (rhs.rows() != ne * nt) throw std::invalid_argument("right-hand side size does not match");
  MatrixXd x(rhs.rows(), rhs.cols());
  MatrixXd b(ne, rhs.cols());
  for (int k = 0; k < nt; ++k) {
    b = rhs.middleRows(k * ne, ne);
    for (int l = 1; l <= k; ++l) {
      b.noalias() -= impl_->history_sign * (op_->blocks[l] * x.middleRows((k - l) * ne, ne));
    }
    x.middleRows(k * ne, ne) = impl_->use_llt ? MatrixXd(impl_->llt.solve(b)) : MatrixXd(impl_->lu.solve(b));
  }
  return x;
}

BoundaryDensity MarchingSolver::solve(const BoundaryDensity& rhs) const {
  const MatrixXd x = solve(MatrixXd(rhs.stacked()));
  return BoundaryDensity::from_stacked(x.col(0), rhs.elements(), rhs.grid);
}

BoundaryDensity solve_boundary_equation(const CausalOperator& op, const BoundaryElementMesh& mesh,
                                        const BoundaryDensity& rhs, EquationKind kind) {
  return MarchingSolver(op, mesh, kind).solve(rhs);
}

// ---------------------------------------------------------------- data

BoundaryDensity project_data(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                             const SpaceTimeFunction& g, int points) {
  BoundaryDensity out(mesh.size(), grid);
  const auto& q = gauss_legendre(points);
  for (int k = 0; k < grid.N; ++k) {
    for (std::size_t e = 0; e < mesh.size(); ++e) {
      const Vec a = mesh.start(e), t = mesh.end(e) - a;
      double s = 0.0;
      for (std::size_t it = 0; it < q.nodes.size(); ++it) {
        const double time = grid.t(k) + q.nodes[it] * grid.dt();
        for (std::size_t is = 0; is < q.nodes.size(); ++is) {
          s += q.weights[it] * q.weights[is] * g(time, a + q.nodes[is] * t);
        }
      }
      out(k, e) = s * mesh.length(e) * grid.dt();
    }
  }
  return out;
}

BoundaryDensity l2_coefficients(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                                const SpaceTimeFunction& g, int points) {
  BoundaryDensity out = project_data(mesh, grid, g, points);
  const VectorXd m = boundary_mass_diagonal(mesh, grid);
  for (int k = 0; k < grid.N; ++k) out.values.col(k).array() /= m.array();
  return out;
}

BoundaryDensity load_from_vertex_values(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                                        const std::vector<VectorXd>& nodal) {
  if (nodal.size() != static_cast<std::size_t>(grid.N + 1)) {
    throw std::invalid_argument("vertex series must hold one vector per time node");
  }
  const std::size_t n = mesh.size();
  BoundaryDensity out(n, grid);
  for (int k = 0; k < grid.N; ++k) {
    if (nodal[k].size() != static_cast<Eigen::Index>(n)) {
      throw std::invalid_argument("vertex series does not match the boundary mesh");
    }
    for (std::size_t e = 0; e < n; ++e) {
      const std::size_t f = (e + 1) % n;
      out(k, e) = 0.25 * (nodal[k](e) + nodal[k](f) + nodal[k + 1](e) + nodal[k + 1](f)) *
                  mesh.length(e) * grid.dt();
    }
  }
  return out;
}

std::vector<VectorXd> vertex_trace(const BoundaryElementMesh& mesh, const std::vector<Vec>& points,
                                   const std::vector<VectorXd>& values, double tol) {
  std::vector<Eigen::Index> match(mesh.size());
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < points.size(); ++k) {
      const double d = (points[k] - mesh.start(e)).norm();
      if (d < best) {
        best = d;
        match[e] = static_cast<Eigen::Index>(k);
      }
    }
    if (best > tol) throw DomainError("boundary element vertex not found among the trace points");
  }
  std::vector<VectorXd> out;
  for (const VectorXd& v : values) {
    if (v.size() != static_cast<Eigen::Index>(points.size())) {
      throw std::invalid_argument("trace values do not match the point set");
    }
    VectorXd w(static_cast<Eigen::Index>(mesh.size()));
    for (std::size_t e = 0; e < mesh.size(); ++e) w(e) = v(match[e]);
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------- potentials

namespace {

struct Piece {
  double s0, s1;
};

// Splits [0, 1] on element e until every piece is shorter than half its
// distance to x0.
void refine_pieces(const BoundaryElementMesh& mesh, std::size_t e, const Vec& x0, double s0, double s1,
                   int depth, std::vector<Piece>& out) {
  const Vec a = mesh.start(e), t = mesh.end(e) - a;
  const double len = (s1 - s0) * mesh.length(e);
  const double dist = point_segment_distance(x0, a + s0 * t, a + s1 * t);
  if (depth < 30 && len > 0.5 * dist) {
    const double m = 0.5 * (s0 + s1);
    refine_pieces(mesh, e, x0, s0, m, depth + 1, out);
    refine_pieces(mesh, e, x0, m, s1, depth + 1, out);
    return;
  }
  out.push_back({s0, s1});
}

MatrixXd potential_matrix(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                          const std::vector<Probe>& probes, const PotentialOptions& options,
                          bool single) {
  const std::size_t ne = mesh.size();
  const int nt = grid.N;
  MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(probes.size()),
                                static_cast<Eigen::Index>(ne) * nt);
  const auto& g = gauss_legendre(options.gauss);
  bool warned = false;
  std::vector<double> prim(nt + 1);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const Vec& x0 = probes[p].x;
    const double t0 = probes[p].t;
    const double dist = mesh.distance(x0);
    if (dist == 0.0) throw DomainError("potential evaluated on the boundary");
    if (dist < options.near_factor * mesh.h() && !warned) {
      std::ostringstream os;
      os << "probe (" << x0.transpose() << ") within " << dist << " of the boundary";
      warn(os.str());
      warned = true;
    }
    for (std::size_t e = 0; e < ne; ++e) {
      std::vector<Piece> pieces;
      refine_pieces(mesh, e, x0, 0.0, 1.0, 0, pieces);
      const Vec a = mesh.start(e), t = mesh.end(e) - a;
      for (const Piece& pc : pieces) {
        for (std::size_t q = 0; q < g.nodes.size(); ++q) {
          const double s = pc.s0 + (pc.s1 - pc.s0) * g.nodes[q];
          const Vec d = x0 - (a + s * t);
          const double r2 = d.squaredNorm();
          double w = g.weights[q] * (pc.s1 - pc.s0) * mesh.length(e);
          if (!single) w *= d.dot(mesh.normal(e)) / (2.0 * kPi * r2);
          // prim[k] = primitive at t0 - t_k; the interval integral is the
          // difference of consecutive entries (causal: zero when t0 <= t_k).
          for (int k = 0; k <= nt; ++k) {
            const double tau = t0 - grid.t(k);
            prim[k] = single ? single_layer_primitive1(tau, r2) : double_layer_primitive1(tau, r2);
          }
          for (int k = 0; k < nt; ++k) {
            out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k * ne + e)) +=
                w * (prim[k] - prim[k + 1]);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

MatrixXd single_layer_matrix(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                             const std::vector<Probe>& probes, const PotentialOptions& options) {
  return potential_matrix(mesh, grid, probes, options, true);
}

MatrixXd double_layer_matrix(const BoundaryElementMesh& mesh, const TimeGrid& grid,
                             const std::vector<Probe>& probes, const PotentialOptions& options) {
  return potential_matrix(mesh, grid, probes, options, false);
}

double eval_single_layer(const BoundaryElementMesh& mesh, const BoundaryDensity& psi, double t0,
                         const Vec& x0, const PotentialOptions& options) {
  const MatrixXd row = single_layer_matrix(mesh, psi.grid, {Probe{t0, x0}}, options);
  return row.row(0).dot(psi.stacked());
}

double eval_double_layer(const BoundaryElementMesh& mesh, const BoundaryDensity& w, double t0,
                         const Vec& x0, const PotentialOptions& options) {
  const MatrixXd row = double_layer_matrix(mesh, w.grid, {Probe{t0, x0}}, options);
  return row.row(0).dot(w.stacked());
}

std::vector<double> represent_interior(const BoundaryElementMesh& mesh, const BoundaryDensity& density,
                                       const std::vector<Probe>& probes, Representation rep,
                                       const BoundaryDensity* trace, const PotentialOptions& options) {
  VectorXd v;
  switch (rep) {
    case Representation::c:
      v = single_layer_matrix(mesh, density.grid, probes, options) * density.stacked();
      break;
    case Representation::d:
      v = double_layer_matrix(mesh, density.grid, probes, options) * density.stacked();
      break;
    case Representation::a:
      if (!trace) throw std::invalid_argument("representation (a) needs the Dirichlet trace");
      v = single_layer_matrix(mesh, density.grid, probes, options) * density.stacked() -
          double_layer_matrix(mesh, density.grid, probes, options) * trace->stacked();
      break;
  }
  return std::vector<double>(v.data(), v.data() + v.size());
}

BoundaryDensity dirichlet_density(const BoundaryElementMesh& mesh, const BoundaryDensity& trace,
                                  Representation rep, const CausalOperator& v_op,
                                  const CausalOperator* k_op) {
  const VectorXd m = boundary_mass_diagonal(mesh, trace.grid);
  BoundaryDensity mg = trace;
  for (int k = 0; k < trace.intervals(); ++k) mg.values.col(k).array() *= m.array();
  switch (rep) {
    case Representation::c:
      return solve_boundary_equation(v_op, mesh, mg, EquationKind::first);
    case Representation::a: {
      if (!k_op) throw std::invalid_argument("representation (a) needs the double-layer operator");
      BoundaryDensity rhs = apply(*k_op, trace);
      rhs.values += 0.5 * mg.values;
      return solve_boundary_equation(v_op, mesh, rhs, EquationKind::first);
    }
    case Representation::d: {
      if (!k_op) throw std::invalid_argument("representation (d) needs the double-layer operator");
      mg.values = -mg.values;
      return solve_boundary_equation(*k_op, mesh, mg, EquationKind::second_minus);
    }
  }
  return mg;
}

// ---------------------------------------------------------------- export

void write_operator_binary(std::ostream& os, const CausalOperator& op) {
  os.write("SHUQOP01", 8);
  const std::int32_t header[3] = {static_cast<std::int32_t>(op.kind),
                                  static_cast<std::int32_t>(op.elements()),
                                  static_cast<std::int32_t>(op.lags())};
  os.write(reinterpret_cast<const char*>(header), sizeof(header));
  const double dt = op.grid.dt();
  os.write(reinterpret_cast<const char*>(&dt), sizeof(dt));
  for (const MatrixXd& b : op.blocks) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = b;
    os.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(sizeof(double) * r.size()));
  }
}

CausalOperator read_operator_binary(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "SHUQOP01", 8) != 0) throw std::invalid_argument("not an operator file");
  std::int32_t header[3];
  double dt = 0.0;
  is.read(reinterpret_cast<char*>(header), sizeof(header));
  is.read(reinterpret_cast<char*>(&dt), sizeof(dt));
  if (!is || header[0] < 0 || header[0] > 3 || header[1] <= 0 || header[2] <= 0) {
    throw std::invalid_argument("corrupt operator header");
  }
  CausalOperator op;
  op.kind = static_cast<OperatorKind>(header[0]);
  op.grid = TimeGrid(dt * header[2], header[2]);
  for (int l = 0; l < header[2]; ++l) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r(header[1], header[1]);
    is.read(reinterpret_cast<char*>(r.data()), static_cast<std::streamsize>(sizeof(double) * r.size()));
    op.blocks.emplace_back(r);
  }
  if (!is) throw std::invalid_argument("truncated operator file");
  return op;
}

void write_density_csv(std::ostream& os, const BoundaryDensity& density) {
  os << "interval,element,value\n";
  os.precision(15);
  for (int k = 0; k < density.intervals(); ++k) {
    for (std::size_t e = 0; e < density.elements(); ++e) os << k << ',' << e << ',' << density(k, e) << '\n';
  }
}

}  // namespace shapeuq
