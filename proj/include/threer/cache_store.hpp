#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "threer/hash.hpp"

namespace threer {

namespace fs = std::filesystem;

/// Disk-backed key/value store used for the stage cache, the per-question
/// VQA cache, the embedding cache, and content-addressed video blobs.
/// Values are canonical JSON files; a corrupt entry is quarantined (renamed
/// aside) and treated as a miss. Writes go through a temp file + rename.
class CacheStore {
 public:
  explicit CacheStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
  }

  const fs::path& root() const { return root_; }

  std::optional<json> get(std::string_view ns, std::string_view key) {
    std::lock_guard<std::mutex> lock(mu_);
    fs::path p = entry_path(ns, key);
    std::error_code ec;
    if (!fs::exists(p, ec)) return std::nullopt;
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j = json::parse(bytes, nullptr, false);
    if (j.is_discarded()) {
      quarantine(p);
      return std::nullopt;
    }
    return j;
  }

  void put(std::string_view ns, std::string_view key, const json& value) {
    std::lock_guard<std::mutex> lock(mu_);
    fs::path p = entry_path(ns, key);
    fs::create_directories(p.parent_path());
    atomic_write(p, canonical_dump(value));
  }

  bool has_blob(const std::string& id) {
    std::lock_guard<std::mutex> lock(mu_);
    return fs::exists(blob_path_unlocked(id));
  }

  fs::path put_blob(const std::string& id, std::string_view bytes) {
    std::lock_guard<std::mutex> lock(mu_);
    fs::path p = blob_path_unlocked(id);
    fs::create_directories(p.parent_path());
    if (!fs::exists(p)) atomic_write(p, bytes);
    return p;
  }

  std::optional<std::string> get_blob(const std::string& id) {
    std::lock_guard<std::mutex> lock(mu_);
    fs::path p = blob_path_unlocked(id);
    if (!fs::exists(p)) return std::nullopt;
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (sha256_hex(bytes) != id) {
      quarantine(p);
      return std::nullopt;
    }
    return bytes;
  }

  fs::path blob_path(const std::string& id) {
    std::lock_guard<std::mutex> lock(mu_);
    return blob_path_unlocked(id);
  }

 private:
  fs::path entry_path(std::string_view ns, std::string_view key) const {
    return root_ / std::string(ns) / (std::string(key) + ".json");
  }

  fs::path blob_path_unlocked(const std::string& id) const {
    return root_ / "blobs" / (id + ".bin");
  }

  static void atomic_write(const fs::path& p, std::string_view bytes) {
    fs::path tmp = p;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    fs::rename(tmp, p);
  }

  static void quarantine(const fs::path& p) {
    std::error_code ec;
    fs::rename(p, fs::path(p.string() + ".corrupt"), ec);
    if (ec) fs::remove(p, ec);
  }

  fs::path root_;
  std::mutex mu_;
};

}  // namespace threer
