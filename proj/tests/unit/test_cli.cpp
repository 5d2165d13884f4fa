#include "artifacts.hpp"
#include "config.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace shapeuq;
using namespace shapeuq::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shapeuq_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SHAPEUQ_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const json& cfg) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << cfg.dump(2);
  return p;
}

json small_disk(const std::string& data_preset) {
  return {{"geometry", {{"preset", "disk"}, {"rings", 4}}},
          {"time", {{"final_time", 1.0}, {"steps", 4}}},
          {"data", {{"preset", data_preset}}},
          {"bem", {{"elements", 12}}}};
}

std::string config_error_path(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsParse) {
  const RunConfig c = parse_config(json::object());
  EXPECT_EQ(c.geometry.rings, 32);
  EXPECT_EQ(c.time.steps, 64);
  EXPECT_EQ(c.epsilon, 0.02);
  EXPECT_EQ(c.probes.points.size(), 10u);
  EXPECT_EQ(c.probes.times.size(), 2u);
  // The printed defaults parse back to the same normalized document.
  EXPECT_EQ(parse_config(default_config_json()).source, c.source);
}

TEST(Config, ErrorsNameTheOffendingKey) {
  EXPECT_EQ(config_error_path({{"geometry", {{"radiuss", 1.0}}}}), "geometry.radiuss");
  EXPECT_EQ(config_error_path({{"time", {{"steps", -4}}}}), "time.steps");
  EXPECT_EQ(config_error_path({{"time", {{"scheme", "leapfrog"}}}}), "time.scheme");
  EXPECT_EQ(config_error_path({{"epsilon", "big"}}), "epsilon");
  EXPECT_EQ(config_error_path({{"probes", {{"times", {0.3}}}}}), "probes.times[0]");
}

TEST(Artifacts, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Artifacts, WriterRecordsHashes) {
  const fs::path dir = scratch_dir("writer");
  ArtifactWriter w(dir / "nested");
  w.write("a.txt", "abc");
  w.write("a.txt", "abc");
  const json entries = w.manifest_entries();
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0]["sha256"], sha256_hex("abc"));
  EXPECT_EQ(entries[0]["bytes"], 3);
  EXPECT_EQ(read_file(dir / "nested" / "a.txt"), "abc");
}

TEST(Executable, ZeroDataSolveWritesZerosAndManifest) {
  const fs::path dir = scratch_dir("zero");
  const fs::path cfg = write_config(dir, small_disk("zero"));
  ASSERT_EQ(run_cli("-c " + cfg.string() + " -o " + (dir / "out").string() + " solve", dir / "log.txt"), 0)
      << read_file(dir / "log.txt");
  std::istringstream csv(read_file(dir / "out" / "u0.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "time,node,value");
  int rows = 0;
  while (std::getline(csv, line)) {
    EXPECT_EQ(std::stod(line.substr(line.rfind(',') + 1)), 0.0);
    ++rows;
  }
  EXPECT_EQ(rows, 5 * 61);  // 5 time nodes, 1 + 3*4*5 vertices

  const json manifest = json::parse(read_file(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "solve");
  EXPECT_EQ(manifest["exit_code"], 0);
  for (const json& e : manifest["outputs"]) {
    EXPECT_EQ(e["sha256"], sha256_hex(read_file(dir / "out" / e["path"].get<std::string>()))) << e["path"];
  }
}

TEST(Executable, MalformedConfigExitsWithConfigError) {
  const fs::path dir = scratch_dir("malformed");
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(run_cli("-c " + (dir / "bad.json").string() + " -o " + (dir / "out").string() + " solve", dir / "log.txt"), 2);
  const fs::path cfg = write_config(dir, {{"time", {{"steps", -1}}}});
  EXPECT_EQ(run_cli("-c " + cfg.string() + " -o " + (dir / "out").string() + " solve", dir / "log2.txt"), 2);
  EXPECT_NE(read_file(dir / "log2.txt").find("time.steps"), std::string::npos);
  EXPECT_EQ(run_cli("", dir / "log3.txt"), 2);
}

TEST(Executable, VerifyKinematicsPasses) {
  const fs::path dir = scratch_dir("kin");
  json cfg = small_disk("disk");
  cfg["studies"] = {{"fd_probes", 50}};
  const fs::path c = write_config(dir, cfg);
  EXPECT_EQ(run_cli("-c " + c.string() + " -o " + (dir / "out").string() + " verify-kinematics", dir / "log.txt"), 0)
      << read_file(dir / "log.txt");
  EXPECT_NE(read_file(dir / "out" / "verify-kinematics_report.txt").find("OVERALL: PASS"), std::string::npos);
}

TEST(Executable, RepeatedRunsProduceIdenticalOutputs) {
  const fs::path dir = scratch_dir("repeat");
  json cfg = small_disk("disk");
  cfg["monte_carlo"] = {{"samples", 6}, {"linear_samples", 50}, {"seed", 4}};
  const fs::path c = write_config(dir, cfg);
  for (const char* run : {"a", "b"}) {
    ASSERT_LE(run_cli("-c " + c.string() + " -o " + (dir / run).string() + " moments-mc", dir / "log.txt"), 1)
        << read_file(dir / "log.txt");
  }
  const json a = json::parse(read_file(dir / "a" / "manifest.json"));
  const json b = json::parse(read_file(dir / "b" / "manifest.json"));
  EXPECT_FALSE(a["outputs"].empty());
  EXPECT_EQ(a["outputs"], b["outputs"]);
  EXPECT_EQ(a["seeds"], b["seeds"]);
}
