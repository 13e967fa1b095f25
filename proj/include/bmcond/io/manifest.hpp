#pragma once

// Run manifest: flat key=value text. The input hash is the git blob id (SHA-1 of
// "blob <len>\0" + content) of the canonical input block, so identical inputs
// share a hash regardless of when or where they ran.

#include <openssl/evp.h>

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bmcond::io {

inline std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("git_blob_hash: SHA-1 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

struct RunManifest {
  std::vector<std::pair<std::string, std::string>> inputs;  ///< in flag order
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;

  void set(std::string key, std::string value) { inputs.emplace_back(std::move(key), std::move(value)); }

  [[nodiscard]] std::string canonical_inputs() const {
    std::string s;
    for (const auto& [k, v] : inputs) s += k + '=' + v + '\n';
    return s;
  }

  void write(std::ostream& out) const {
    out << canonical_inputs();
    out << "input_hash=" << git_blob_hash(canonical_inputs()) << '\n';
    out << "wall_seconds=" << format_wall() << '\n';
    for (std::size_t i = 0; i < outputs.size(); ++i) out << "output." << i << '=' << outputs[i] << '\n';
  }

  /// Parses the key=value lines back; later duplicate keys win.
  static std::map<std::string, std::string> parse(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
  }

 private:
  [[nodiscard]] std::string format_wall() const {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, wall_seconds, std::chars_format::fixed, 3);
    return std::string(buf, res.ptr);
  }
};

}  // namespace bmcond::io
