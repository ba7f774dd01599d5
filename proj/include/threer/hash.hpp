#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace threer {

using json = nlohmann::json;

/// SHA-256 of `data`, lowercase hex.
inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string short_hash(std::string_view hash, std::size_t n = 12) {
  return std::string(hash.substr(0, n));
}

/// Canonical JSON bytes: nlohmann::json keeps object keys sorted (std::map)
/// and emits shortest round-trip float forms via to_chars, so the output is
/// stable across platforms for identical values.
inline std::string canonical_dump(const json& j) { return j.dump(); }

inline std::string hash_json(const json& j) { return sha256_hex(canonical_dump(j)); }

/// splitmix64 step; the workhorse behind every deterministic mock.
inline std::uint64_t mix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Collapse arbitrary text into a 64-bit seed through SHA-256.
inline std::uint64_t text_seed(std::string_view data) {
  const std::string h = sha256_hex(data);
  std::uint64_t v = 0;
  for (int i = 0; i < 16; ++i) {
    char c = h[i];
    v = (v << 4) | static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
  }
  return v;
}

/// Uniform double in [0, 1) from a 64-bit word.
inline double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);
}

inline std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace threer
