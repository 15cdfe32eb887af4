#include "hammer/manifest.hpp"

#include "hammer/types.hpp"

#include <openssl/evp.h>
#include <sys/utsname.h>
#include <unistd.h>

#include <ctime>
#include <fstream>
#include <memory>

namespace hammer {

namespace {

struct Sha256 {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

  Sha256() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw RuntimeFailure("sha256 init failed");
  }
  void update(const void* p, std::size_t n) {
    if (EVP_DigestUpdate(ctx.get(), p, n) != 1) throw RuntimeFailure("sha256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md, &n) != 1) throw RuntimeFailure("sha256 final failed");
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < n; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot read " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    if (f.gcount() > 0) h.update(buf, std::size_t(f.gcount()));
  }
  return h.hex();
}

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path manifest_path(const std::filesystem::path& artifact) {
  return artifact.string() + ".manifest.json";
}

void RunManifest::add_input(const std::filesystem::path& p) { inputs.emplace_back(p.string(), sha256_file(p)); }
void RunManifest::add_output(const std::filesystem::path& p) { outputs.emplace_back(p.string(), sha256_file(p)); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["toolkit"] = "hammer";
  j["version"] = kToolkitVersion;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  j["seeds"] = seeds;
  auto files = [](const auto& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [p, h] : v) a.push_back({{"path", p}, {"sha256", h}});
    return a;
  };
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  utsname u{};
  char host[256] = "unknown";
  gethostname(host, sizeof host - 1);
  nlohmann::json h;
  h["hostname"] = host;
  if (uname(&u) == 0) {
    h["system"] = u.sysname;
    h["release"] = u.release;
    h["machine"] = u.machine;
  }
  h["compiler"] = __VERSION__;
  j["host"] = h;
  if (!extra.empty()) j["extra"] = extra;
  return j;
}

void write_manifests(RunManifest& m) {
  m.finished_at = utc_timestamp();
  const std::string text = m.to_json().dump(2) + "\n";
  for (const auto& [p, h] : m.outputs) {
    (void)h;
    std::ofstream f(manifest_path(p));
    if (!f) throw RuntimeFailure("cannot write manifest for " + p);
    f << text;
  }
}

}  // namespace hammer
