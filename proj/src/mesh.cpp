#include "shapeuq/mesh.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace shapeuq {

namespace {

Mat edge_matrix(const Mesh& mesh, const std::array<int, 4>& c) {
  const int d = mesh.dim();
  Mat e(d, d);
  for (int k = 0; k < d; ++k) e.col(k) = mesh.vertex(c[k + 1]) - mesh.vertex(c[0]);
  return e;
}

double factorial(int d) { return d == 2 ? 2.0 : 6.0; }

}  // namespace

Mesh::Mesh(int dim, std::vector<Vec> vertices, std::vector<std::array<int, 4>> cells)
    : dim_(dim), vertices_(std::move(vertices)), cells_(std::move(cells)) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("mesh dimension must be 2 or 3");
  if (cells_.empty()) throw std::invalid_argument("mesh has no cells");
  const int nv = static_cast<int>(vertices_.size());
  for (const Vec& v : vertices_) {
    if (v.size() != dim) throw std::invalid_argument("vertex dimension mismatch");
  }
  measures_.resize(cells_.size());
  diameters_.resize(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    auto& cell = cells_[c];
    for (int k = 0; k <= dim; ++k) {
      if (cell[k] < 0 || cell[k] >= nv) throw std::invalid_argument("cell index out of range");
    }
    double det = edge_matrix(*this, cell).determinant();
    if (det < 0.0) {
      std::swap(cell[1], cell[2]);
      det = -det;
    }
    const double vol = det / factorial(dim);
    double diam = 0.0;
    for (int a = 0; a <= dim; ++a) {
      for (int b = a + 1; b <= dim; ++b) {
        diam = std::max(diam, (vertices_[cell[a]] - vertices_[cell[b]]).norm());
      }
    }
    if (!(vol > 1e-14 * std::pow(diam, dim))) {
      throw std::invalid_argument("degenerate cell " + std::to_string(c));
    }
    measures_[c] = vol;
    diameters_[c] = diam;
    h_ = std::max(h_, diam);
  }
  build_topology();
}

void Mesh::build_topology() {
  // Facets seen once are on the boundary. Keys are sorted vertex triples.
  std::map<std::array<int, 3>, std::pair<int, std::pair<std::size_t, std::array<int, 3>>>> seen;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto& cell = cells_[c];
    for (int skip = 0; skip <= dim_; ++skip) {
      std::array<int, 3> f{-1, -1, -1};
      int n = 0;
      // Keep the cyclic order of the remaining vertices so that 2D boundary
      // edges inherit the counterclockwise orientation of the cell.
      for (int k = 1; k <= dim_; ++k) f[n++] = cell[(skip + k) % (dim_ + 1)];
      std::array<int, 3> key = f;
      std::sort(key.begin(), key.begin() + dim_);
      auto [it, inserted] = seen.try_emplace(key, 0, std::make_pair(c, f));
      ++it->second.first;
    }
  }
  on_boundary_.assign(vertices_.size(), 0);
  vertex_facets_.assign(vertices_.size(), {});
  for (const auto& [key, entry] : seen) {
    if (entry.first > 2) throw std::invalid_argument("non-manifold mesh facet");
    if (entry.first != 1) continue;
    const std::size_t c = entry.second.first;
    const std::array<int, 3> f = entry.second.second;
    Vec normal;
    double measure = 0.0;
    const auto& cell = cells_[c];
    int opposite = -1;
    for (int k = 0; k <= dim_; ++k) {
      if (std::find(f.begin(), f.begin() + dim_, cell[k]) == f.begin() + dim_) opposite = cell[k];
    }
    if (dim_ == 2) {
      const Vec t = vertices_[f[1]] - vertices_[f[0]];
      measure = t.norm();
      normal = make_vec({t(1), -t(0)}) / measure;
    } else {
      const Eigen::Vector3d a = vertices_[f[1]] - vertices_[f[0]];
      const Eigen::Vector3d b = vertices_[f[2]] - vertices_[f[0]];
      const Eigen::Vector3d n = a.cross(b);
      measure = 0.5 * n.norm();
      normal = n.normalized();
    }
    if (normal.dot(vertices_[f[0]] - vertices_[opposite]) < 0.0) normal = -normal;
    const std::size_t id = facets_.size();
    facets_.push_back(f);
    facet_normals_.push_back(normal);
    facet_measures_.push_back(measure);
    facet_cells_.push_back(c);
    for (int k = 0; k < dim_; ++k) {
      on_boundary_[f[k]] = 1;
      vertex_facets_[f[k]].push_back(id);
    }
  }
  if (facets_.empty()) throw std::invalid_argument("mesh has no boundary");

  if (dim_ == 2) {
    // Walk the boundary edges; all must form one closed curve.
    std::map<int, int> next;
    for (const auto& f : facets_) {
      if (!next.emplace(f[0], f[1]).second) {
        throw std::invalid_argument("boundary is not a single closed curve");
      }
    }
    const int start = facets_.front()[0];
    int v = start;
    do {
      boundary_vertices_.push_back(v);
      auto it = next.find(v);
      if (it == next.end()) throw std::invalid_argument("boundary curve is open");
      v = it->second;
    } while (v != start && boundary_vertices_.size() <= facets_.size());
    if (boundary_vertices_.size() != facets_.size()) {
      throw std::invalid_argument("boundary is not a single closed curve");
    }
  } else {
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      if (on_boundary_[v]) boundary_vertices_.push_back(static_cast<int>(v));
    }
  }
}

Vec Mesh::vertex_normal(std::size_t v) const {
  Vec n = Vec::Zero(dim_);
  for (std::size_t f : vertex_facets_[v]) n += facet_measures_[f] * facet_normals_[f];
  const double len = n.norm();
  return len > 0.0 ? Vec(n / len) : n;
}

Mesh Mesh::mapped(const std::function<Vec(const Vec&)>& map) const {
  std::vector<Vec> moved;
  moved.reserve(vertices_.size());
  for (const Vec& v : vertices_) moved.push_back(map(v));
  return Mesh(dim_, std::move(moved), cells_);
}

Mesh Mesh::rectangle(const Vec& lower, const Vec& upper, int nx, int ny) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("rectangle needs at least one cell per axis");
  std::vector<Vec> v;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      v.push_back(make_vec({lower(0) + (upper(0) - lower(0)) * i / nx,
                            lower(1) + (upper(1) - lower(1)) * j / ny}));
    }
  }
  std::vector<std::array<int, 4>> cells;
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), 0});
      cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1), 0});
    }
  }
  return Mesh(2, std::move(v), std::move(cells));
}

Mesh Mesh::unit_square(int n) { return rectangle(make_vec({0.0, 0.0}), make_vec({1.0, 1.0}), n, n); }

Mesh Mesh::disk(double radius, int rings, const Vec& center) {
  if (rings < 1 || radius <= 0.0) throw std::invalid_argument("disk needs rings >= 1 and radius > 0");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<Vec> v{center};
  std::vector<int> first{0};
  for (int i = 1; i <= rings; ++i) {
    first.push_back(static_cast<int>(v.size()));
    const int n = 6 * i;
    const double r = radius * i / rings;
    for (int k = 0; k < n; ++k) {
      const double a = two_pi * k / n;
      v.push_back(center + r * make_vec({std::cos(a), std::sin(a)}));
    }
  }
  std::vector<std::array<int, 4>> cells;
  for (int k = 0; k < 6; ++k) cells.push_back({0, first[1] + k, first[1] + (k + 1) % 6, 0});
  for (int i = 2; i <= rings; ++i) {
    // Merge the two rings by angle.
    const int n0 = 6 * (i - 1), n1 = 6 * i;
    auto in = [&](int a) { return first[i - 1] + a % n0; };
    auto out = [&](int b) { return first[i] + b % n1; };
    int a = 0, b = 0;
    while (a < n0 || b < n1) {
      const double next_a = a < n0 ? double(a + 1) / n0 : 2.0;
      const double next_b = b < n1 ? double(b + 1) / n1 : 2.0;
      if (next_b <= next_a) {
        cells.push_back({in(a), out(b), out(b + 1), 0});
        ++b;
      } else {
        cells.push_back({in(a), out(b), in(a + 1), 0});
        ++a;
      }
    }
  }
  return Mesh(2, std::move(v), std::move(cells));
}

Mesh Mesh::unit_cube(int n) {
  if (n < 1) throw std::invalid_argument("cube needs at least one cell per axis");
  std::vector<Vec> v;
  auto id = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) v.push_back(make_vec({double(i) / n, double(j) / n, double(k) / n}));
    }
  }
  // Kuhn subdivision: one tetrahedron per axis permutation.
  const std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<std::array<int, 4>> cells;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        for (const auto& p : perms) {
          std::array<int, 3> c{i, j, k};
          std::array<int, 4> tet{};
          tet[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[p[s]];
            tet[s + 1] = id(c[0], c[1], c[2]);
          }
          cells.push_back(tet);
        }
      }
    }
  }
  return Mesh(3, std::move(v), std::move(cells));
}

void Mesh::write(std::ostream& os) const {
  os << "shapeuq-mesh 1\n";
  os << "dim " << dim_ << '\n';
  os << "vertices " << vertices_.size() << '\n';
  os.precision(17);
  for (const Vec& v : vertices_) {
    for (int k = 0; k < dim_; ++k) os << (k ? " " : "") << v(k);
    os << '\n';
  }
  os << "cells " << cells_.size() << '\n';
  for (const auto& c : cells_) {
    for (int k = 0; k <= dim_; ++k) os << (k ? " " : "") << c[k];
    os << '\n';
  }
}

Mesh Mesh::read(std::istream& is) {
  auto expect = [&is](const std::string& word) {
    std::string w;
    if (!(is >> w) || w != word) throw std::invalid_argument("mesh file: expected '" + word + "'");
  };
  expect("shapeuq-mesh");
  int version = 0;
  if (!(is >> version) || version != 1) throw std::invalid_argument("mesh file: unsupported version");
  int dim = 0;
  std::size_t nv = 0, nc = 0;
  expect("dim");
  is >> dim;
  if (dim != 2 && dim != 3) throw std::invalid_argument("mesh file: bad dimension");
  expect("vertices");
  is >> nv;
  std::vector<Vec> v(nv, Vec(dim));
  for (auto& p : v) {
    for (int k = 0; k < dim; ++k) is >> p(k);
  }
  expect("cells");
  is >> nc;
  std::vector<std::array<int, 4>> cells(nc, {0, 0, 0, 0});
  for (auto& c : cells) {
    for (int k = 0; k <= dim; ++k) is >> c[k];
  }
  if (!is) throw std::invalid_argument("mesh file: truncated");
  return Mesh(dim, std::move(v), std::move(cells));
}

std::array<double, 4> barycentric(const Mesh& mesh, std::size_t cell, const Vec& x) {
  const auto& c = mesh.cell(cell);
  const int d = mesh.dim();
  const Vec l = edge_matrix(mesh, c).partialPivLu().solve(Vec(x - mesh.vertex(c[0])));
  std::array<double, 4> b{0.0, 0.0, 0.0, 0.0};
  b[0] = 1.0 - l.sum();
  for (int k = 0; k < d; ++k) b[k + 1] = l(k);
  return b;
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
  const int d = mesh.dim();
  lower_ = mesh.vertex(0);
  Vec upper = mesh.vertex(0);
  for (const Vec& v : mesh.vertices()) {
    lower_ = lower_.cwiseMin(v);
    upper = upper.cwiseMax(v);
  }
  const double per_axis = std::pow(static_cast<double>(mesh.num_cells()) / 2.0, 1.0 / d);
  cell_size_ = Vec(d);
  for (int k = 0; k < d; ++k) {
    counts_[k] = std::max(1, static_cast<int>(per_axis));
    cell_size_(k) = std::max((upper(k) - lower_(k)) / counts_[k], 1e-300);
  }
  buckets_.resize(static_cast<std::size_t>(counts_[0]) * counts_[1] * counts_[2]);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& cell = mesh.cell(c);
    Vec lo = mesh.vertex(cell[0]), hi = lo;
    for (int k = 1; k <= d; ++k) {
      lo = lo.cwiseMin(mesh.vertex(cell[k]));
      hi = hi.cwiseMax(mesh.vertex(cell[k]));
    }
    const auto bl = bucket_of(lo), bh = bucket_of(hi);
    for (int k2 = bl[2]; k2 <= bh[2]; ++k2) {
      for (int k1 = bl[1]; k1 <= bh[1]; ++k1) {
        for (int k0 = bl[0]; k0 <= bh[0]; ++k0) buckets_[flat({k0, k1, k2})].push_back(c);
      }
    }
  }
}

std::array<int, 3> PointLocator::bucket_of(const Vec& x) const {
  std::array<int, 3> b{0, 0, 0};
  for (int k = 0; k < mesh_->dim(); ++k) {
    const int i = static_cast<int>(std::floor((x(k) - lower_(k)) / cell_size_(k)));
    b[k] = std::clamp(i, 0, counts_[k] - 1);
  }
  return b;
}

std::size_t PointLocator::flat(const std::array<int, 3>& b) const {
  return (static_cast<std::size_t>(b[2]) * counts_[1] + b[1]) * counts_[0] + b[0];
}

std::optional<Location> PointLocator::locate(const Vec& x) const {
  const int d = mesh_->dim();
  for (std::size_t c : buckets_[flat(bucket_of(x))]) {
    const auto b = barycentric(*mesh_, c, x);
    bool inside = true;
    for (int k = 0; k <= d; ++k) inside = inside && b[k] >= -1e-12;
    if (inside) return Location{c, b, 0.0};
  }
  return std::nullopt;
}

Location PointLocator::locate_or_nearest(const Vec& x) const {
  if (auto loc = locate(x)) return *loc;
  const int d = mesh_->dim();
  Location best;
  best.outside_distance = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < mesh_->num_cells(); ++c) {
    auto b = barycentric(*mesh_, c, x);
    double s = 0.0;
    for (int k = 0; k <= d; ++k) {
      b[k] = std::max(b[k], 0.0);
      s += b[k];
    }
    Vec p = Vec::Zero(d);
    for (int k = 0; k <= d; ++k) {
      b[k] /= s;
      p += b[k] * mesh_->vertex(mesh_->cell(c)[k]);
    }
    const double dist = (p - x).norm();
    if (dist < best.outside_distance) best = Location{c, b, dist};
  }
  if (best.outside_distance > mesh_->cell_diameter(best.cell)) {
    std::ostringstream os;
    os << "point (" << x.transpose() << ") lies outside the mesh by " << best.outside_distance;
    throw DomainError(os.str());
  }
  return best;
}

}  // namespace shapeuq
