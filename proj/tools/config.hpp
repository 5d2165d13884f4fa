// Run configuration: a JSON document validated against a fixed key tree.
// Unknown keys and out-of-range values raise ConfigError with the key path.
#pragma once

#include "shapeuq/fem.hpp"
#include "shapeuq/random_boundary.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shapeuq::cli {

struct GeometryConfig {
  std::string preset = "disk";  // disk | square
  double radius = 1.0;          // disk
  int rings = 32;               // disk: 6 k vertices on ring k
  int cells = 32;               // square: cells per side
};

struct TimeConfig {
  double final_time = 1.0;
  int steps = 64;
  TimeScheme scheme = TimeScheme::crank_nicolson;
};

struct KappaTerm {
  BoundaryMode::Kind kind = BoundaryMode::Kind::cosine;
  int frequency = 1;
  double coefficient = 1.0;
};

struct VelocityConfig {
  std::string preset = "kappa";  // kappa | affine | zero
  std::vector<KappaTerm> kappa{{BoundaryMode::Kind::cosine, 1, 1.0}, {BoundaryMode::Kind::sine, 2, 0.5}};
  double collar_width = 0.2;
  // affine: V(x) = (M (x - c) + b) chi(|x - c|)
  Mat matrix = Mat::Identity(2, 2);
  Vec offset = Vec::Zero(2);
  Vec center = make_vec({0.5, 0.5});
  double inner = 0.1;
  double outer = 0.3;
};

struct ProbeConfig {
  std::vector<Vec> points;  // defaults to a ring of 10 at half radius
  std::vector<double> times;  // defaults to {T/2, T}
};

struct BemConfig {
  int elements = 64;  // 0: use the finite element boundary polygon
  int gauss_far = 6;
  int gauss_near = 12;
  std::string route = "lowrank";  // lowrank | dense
};

struct MonteCarloConfig {
  std::uint64_t seed = 1;
  int samples = 200;
  int linear_samples = 10000;
};

struct StudyConfig {
  std::vector<double> kinematics_eps{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> derivative_eps{0.1, 0.05, 0.025, 0.0125};
  double compact_radius = 0.5;
  std::vector<double> compact_eps{0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625};
  std::vector<int> mms_cells{8, 16, 32, 64};
  int mms_steps = 256;
  int mms_temporal_cells = 64;
  std::vector<int> mms_temporal_steps{4, 8, 16, 32};
  int mms_reference_steps = 1024;
  int energy_datasets = 50;
  std::vector<double> energy_times{1.0, 2.0, 4.0};
  int energy_rings = 8;
  int fd_probes = 200;
};

struct Tolerances {
  double kinematics_slope_min = 0.9;
  double kinematics_slope_max = 1.1;
  double a_prime_fd = 1e-4;
  double derivative_order = 0.8;
  double identity = 0.02;
  double compact_floor_factor = 3.0;
  double crosscheck = 0.05;
  double roundtrip = 1e-10;
  double stderr_factor = 3.0;
  double moments_relative = 0.10;
  double psd_floor = 1e-10;
};

struct RunConfig {
  GeometryConfig geometry;
  TimeConfig time;
  std::string data = "disk";  // disk | manufactured | zero
  VelocityConfig velocity;
  std::vector<KappaMode> random_modes;
  std::optional<double> amplitude_cap;
  double epsilon = 0.02;
  ProbeConfig probes;
  BemConfig bem;
  MonteCarloConfig monte_carlo;
  StudyConfig studies;
  Tolerances tolerances;
  std::string output_dir = "shapeuq-output";
  int workers = 0;
  bool write_vtk = false;

  nlohmann::json source;  // normalized echo for the manifest
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);
/// Full default key tree, useful as a template.
nlohmann::json default_config_json();

}  // namespace shapeuq::cli
