// shapeuq command-line driver. Exit codes: 0 all checks pass, 1 some check
// failed, 2 configuration error, 3 numerical or domain failure.
#include "artifacts.hpp"
#include "config.hpp"
#include "pipelines.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#ifndef SHAPEUQ_VERSION
#define SHAPEUQ_VERSION "0.0.0"
#endif

namespace {

using nlohmann::json;
using namespace shapeuq;
using namespace shapeuq::cli;

enum ExitCode { kOk = 0, kCheckFailed = 1, kConfigError = 2, kNumericalError = 3 };

void error_record(const std::string& kind, const std::string& message, int code, const std::string& path = {}) {
  json rec{{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}};
  if (!path.empty()) rec["error"]["path"] = path;
  std::cerr << rec.dump() << std::endl;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

json failed_items(const RunContext& ctx) {
  json out = json::array();
  for (const RateStudy& s : ctx.studies) {
    if (!s.passed) out.push_back(s.name);
  }
  for (const CheckResult& c : ctx.checks) {
    if (!c.passed) out.push_back(c.name);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape sensitivity and random-boundary moments for the heat equation"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::string output_dir;
  int workers = -1;
  std::uint64_t seed = 0;
  bool print_default = false;
  app.add_option("-c,--config", config_path, "JSON run configuration");
  app.add_option("-o,--output-dir", output_dir, "Output directory (overrides config and SHAPEUQ_OUTPUT_DIR)");
  auto* workers_opt = app.add_option("-w,--workers", workers, "Worker threads, 0 = all cores (overrides config)");
  auto* seed_opt = app.add_option("-s,--seed", seed, "Base seed (overrides monte_carlo.seed)");
  app.add_flag("--print-default-config", print_default, "Print the full default configuration and exit");

  std::string command;
  for (const std::string& name : command_names()) {
    app.add_subcommand(name, "Run the " + name + " pipeline")->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (print_default) {
    std::cout << default_config_json().dump(2) << '\n';
    return kOk;
  }
  if (command.empty()) {
    error_record("usage", "no command given; expected one of the subcommands listed by --help", kConfigError);
    return kConfigError;
  }

  RunConfig config;
  try {
    config = config_path.empty() ? parse_config(json::object()) : load_config(config_path);
    if (!workers_opt->empty()) {
      if (workers < 0) throw ConfigError("--workers", "must be non-negative");
      config.workers = workers;
      config.source["workers"] = workers;
    }
    if (!seed_opt->empty()) {
      config.monte_carlo.seed = seed;
      config.source["monte_carlo"]["seed"] = seed;
    }
    if (const char* env = std::getenv("SHAPEUQ_OUTPUT_DIR"); env && *env) config.output_dir = env;
    if (!output_dir.empty()) config.output_dir = output_dir;
    config.source["output_dir"] = config.output_dir;
  } catch (const ConfigError& e) {
    error_record("config", e.what(), kConfigError, e.path());
    return kConfigError;
  }

  std::optional<ArtifactWriter> out;
  try {
    out.emplace(config.output_dir);
  } catch (const std::exception& e) {
    error_record("io", e.what(), kConfigError, "output_dir");
    return kConfigError;
  }

  RunContext ctx{config, *out};
  set_warning_sink([&ctx](const std::string& w) {
    ctx.warnings.push_back(w);
    std::cerr << "warning: " << w << '\n';
  });

  json manifest;
  manifest["tool"] = "shapeuq";
  manifest["version"] = SHAPEUQ_VERSION;
  manifest["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                         "." + std::to_string(EIGEN_MINOR_VERSION)},
                           {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR)}};
  manifest["command"] = command;
  manifest["config"] = config.source;
  manifest["started_at"] = utc_timestamp();

  int code = kOk;
  json error;
  const auto start = std::chrono::steady_clock::now();
  try {
    Scenario sc = build_scenario(config);
    ctx.seeds["monte_carlo_base"] = config.monte_carlo.seed;
    run_command(command, ctx, sc);
    ctx.report += all_passed(ctx.studies, ctx.checks) ? "OVERALL: PASS\n" : "OVERALL: FAIL\n";
    code = all_passed(ctx.studies, ctx.checks) ? kOk : kCheckFailed;
  } catch (const ConfigError& e) {
    code = kConfigError;
    error = {{"kind", "config"}, {"message", e.what()}, {"path", e.path()}};
  } catch (const NumericalError& e) {
    code = kNumericalError;
    error = {{"kind", "numerical"}, {"message", e.what()}};
  } catch (const DomainError& e) {
    code = kNumericalError;
    error = {{"kind", "domain"}, {"message", e.what()}};
  } catch (const std::exception& e) {
    code = kNumericalError;
    error = {{"kind", "runtime"}, {"message", e.what()}};
  }
  set_warning_sink({});

  try {
    if (!ctx.report.empty()) {
      out->write(command + "_report.txt", ctx.report);
      std::cout << ctx.report;
    }
    manifest["seeds"] = ctx.seeds;
    manifest["wall_times"] = ctx.wall_times;
    manifest["wall_times"]["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest["warnings"] = ctx.warnings;
    manifest["failed"] = failed_items(ctx);
    manifest["exit_code"] = code;
    if (!error.is_null()) manifest["error"] = error;
    manifest["outputs"] = out->manifest_entries();
    std::ofstream mf(out->dir() / "manifest.json");
    mf << manifest.dump(2) << '\n';
    if (!mf) throw std::runtime_error("cannot write manifest.json");
  } catch (const std::exception& e) {
    error_record("io", e.what(), kNumericalError);
    return kNumericalError;
  }

  if (!error.is_null()) {
    json rec{{"error", error}, {"exit_code", code}};
    std::cerr << rec.dump() << std::endl;
  }
  return code;
}
