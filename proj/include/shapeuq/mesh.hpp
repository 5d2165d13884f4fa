// Simplicial meshes of the reference domain (triangles in 2D, tetrahedra in
// 3D), a few structured generators and a versioned plain-text format.
#pragma once

#include "shapeuq/common.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

namespace shapeuq {

class Mesh {
 public:
  /// Cells use the first dim+1 entries of each array. Cells with negative
  /// orientation are reordered; degenerate cells are rejected.
  Mesh(int dim, std::vector<Vec> vertices, std::vector<std::array<int, 4>> cells);

  int dim() const { return dim_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size(); }
  const std::vector<Vec>& vertices() const { return vertices_; }
  const Vec& vertex(std::size_t i) const { return vertices_[i]; }
  const std::array<int, 4>& cell(std::size_t c) const { return cells_[c]; }
  const std::vector<std::array<int, 4>>& cells() const { return cells_; }
  double cell_measure(std::size_t c) const { return measures_[c]; }
  double cell_diameter(std::size_t c) const { return diameters_[c]; }
  /// Maximum cell diameter.
  double h() const { return h_; }

  /// Boundary facets (edges in 2D, triangles in 3D) with outward unit normals.
  std::size_t num_facets() const { return facets_.size(); }
  const std::array<int, 3>& facet(std::size_t f) const { return facets_[f]; }
  const Vec& facet_normal(std::size_t f) const { return facet_normals_[f]; }
  double facet_measure(std::size_t f) const { return facet_measures_[f]; }
  std::size_t facet_cell(std::size_t f) const { return facet_cells_[f]; }

  bool on_boundary(std::size_t v) const { return on_boundary_[v] != 0; }
  /// Boundary vertices; in 2D ordered along the closed boundary curve
  /// counterclockwise.
  const std::vector<int>& boundary_vertices() const { return boundary_vertices_; }
  /// Area-weighted average of adjacent facet normals.
  Vec vertex_normal(std::size_t v) const;

  /// Same connectivity with every vertex moved by `map`.
  Mesh mapped(const std::function<Vec(const Vec&)>& map) const;

  // Generators.
  static Mesh rectangle(const Vec& lower, const Vec& upper, int nx, int ny);
  static Mesh unit_square(int n);
  /// Disk of the given radius: ring i carries 6 i vertices, `rings` rings.
  static Mesh disk(double radius, int rings, const Vec& center = Vec::Zero(2));
  static Mesh unit_cube(int n);

  /// Format: "shapeuq-mesh 1", "dim D", "vertices N" + N lines,
  /// "cells M" + M lines of D+1 zero-based indices.
  void write(std::ostream& os) const;
  static Mesh read(std::istream& is);

 private:
  void build_topology();

  int dim_;
  std::vector<Vec> vertices_;
  std::vector<std::array<int, 4>> cells_;
  std::vector<double> measures_;
  std::vector<double> diameters_;
  double h_ = 0.0;
  std::vector<std::array<int, 3>> facets_;
  std::vector<Vec> facet_normals_;
  std::vector<double> facet_measures_;
  std::vector<std::size_t> facet_cells_;
  std::vector<char> on_boundary_;
  std::vector<int> boundary_vertices_;
  std::vector<std::vector<std::size_t>> vertex_facets_;
};

/// Cell containing a point together with its barycentric coordinates.
struct Location {
  std::size_t cell = 0;
  std::array<double, 4> bary{};
  /// Distance from the cell when the point lies outside the mesh.
  double outside_distance = 0.0;
};

/// Bucket grid over the mesh bounding box for point location.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);

  /// Containing cell, or nothing when the point is outside every cell.
  std::optional<Location> locate(const Vec& x) const;
  /// Containing cell, or the nearest cell with clamped barycentrics; throws
  /// DomainError when the point is farther than one element diameter away.
  Location locate_or_nearest(const Vec& x) const;

 private:
  std::array<int, 3> bucket_of(const Vec& x) const;
  std::size_t flat(const std::array<int, 3>& b) const;

  const Mesh* mesh_;
  Vec lower_;
  Vec cell_size_;
  std::array<int, 3> counts_{1, 1, 1};
  std::vector<std::vector<std::size_t>> buckets_;
};

std::array<double, 4> barycentric(const Mesh& mesh, std::size_t cell, const Vec& x);

}  // namespace shapeuq
