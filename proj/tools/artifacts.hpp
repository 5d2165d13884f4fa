// Output directory bookkeeping: every file goes through the writer so the
// manifest can list it with its SHA-256.
#pragma once

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace shapeuq::cli {

std::string sha256_hex(std::string_view bytes);

struct Artifact {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::size_t bytes = 0;
};

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  void write(const std::string& name, const std::string& content);
  void write_with(const std::string& name, const std::function<void(std::ostream&)>& fill);
  const std::vector<Artifact>& artifacts() const { return artifacts_; }
  nlohmann::json manifest_entries() const;

 private:
  std::filesystem::path dir_;
  std::vector<Artifact> artifacts_;
};

}  // namespace shapeuq::cli
