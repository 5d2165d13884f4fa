// Scenario assembly from a RunConfig and the pipelines behind each command.
#pragma once

#include "artifacts.hpp"
#include "config.hpp"

#include "shapeuq/heat_bem.hpp"
#include "shapeuq/moments.hpp"
#include "shapeuq/sensitivity.hpp"
#include "shapeuq/verification.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace shapeuq::cli {

/// Everything a pipeline needs, with the expensive pieces computed on first use.
struct Scenario {
  const RunConfig* config = nullptr;
  std::shared_ptr<const Circle> circle;  // disk geometry only
  std::shared_ptr<const FeSpace> space;
  TimeGrid grid;
  SourceData data;
  Box domain;
  VelocityField velocity = VelocityField::zero(Box::cube(2, -1.0, 1.0));
  std::shared_ptr<const KappaModel> model;
  std::vector<Probe> probes;
  VectorFunction exact_normal;
  SolverOptions solver;

  std::optional<SpaceTimeField> u0;
  std::optional<SpaceTimeField> uprime;
  std::optional<BoundaryElementMesh> bem_mesh;
  std::optional<CausalOperator> v_op;
  std::optional<CausalOperator> k_op;
  std::optional<FirstKindCorrelation> correlation;
  std::optional<SampleStatistics> mc_statistics;
};

Scenario build_scenario(const RunConfig& config);

/// Collected results of one run.
struct RunContext {
  const RunConfig& config;
  ArtifactWriter& out;
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json wall_times = nlohmann::json::object();
  std::vector<std::string> warnings{};
  std::vector<RateStudy> studies{};
  std::vector<CheckResult> checks{};
  std::string report{};  // accumulated plain-text sections
};

void run_verify_kinematics(RunContext& ctx, Scenario& sc);
void run_solve(RunContext& ctx, Scenario& sc);
void run_sensitivity(RunContext& ctx, Scenario& sc);
void run_bem(RunContext& ctx, Scenario& sc);
void run_moments_mc(RunContext& ctx, Scenario& sc);
void run_moments_bie(RunContext& ctx, Scenario& sc);
void run_crosscheck(RunContext& ctx, Scenario& sc);
/// Every pipeline above plus the solver order studies, the energy estimates
/// and the Monte Carlo versus boundary-integral covariance comparison.
void run_full_report(RunContext& ctx, Scenario& sc);

const std::vector<std::string>& command_names();
void run_command(const std::string& command, RunContext& ctx, Scenario& sc);

}  // namespace shapeuq::cli
