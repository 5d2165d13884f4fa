#include "artifacts.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace shapeuq::cli {

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

ArtifactWriter::ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

void ArtifactWriter::write(const std::string& name, const std::string& content) {
  const std::filesystem::path path = dir_ / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Artifact& a : artifacts_) {
    if (a.path == name) {
      a = {name, sha256_hex(content), content.size()};
      return;
    }
  }
  artifacts_.push_back({name, sha256_hex(content), content.size()});
}

void ArtifactWriter::write_with(const std::string& name, const std::function<void(std::ostream&)>& fill) {
  std::ostringstream os;
  os.precision(17);
  fill(os);
  write(name, os.str());
}

nlohmann::json ArtifactWriter::manifest_entries() const {
  nlohmann::json out = nlohmann::json::array();
  for (const Artifact& a : artifacts_) out.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  return out;
}

}  // namespace shapeuq::cli
