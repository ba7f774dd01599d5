#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "threer/cache_store.hpp"
#include "threer/embedding.hpp"
#include "threer/errors.hpp"
#include "threer/hash.hpp"

namespace threer {

struct ChatRequest {
  std::string system_prompt;
  std::string user_message;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  int max_tokens = 1024;

  void validate() const {
    if (user_message.empty()) throw PreconditionViolation("chat request has empty user message");
    if (temperature < 0.0) throw PreconditionViolation("chat temperature must be >= 0");
    if (max_tokens < 1) throw PreconditionViolation("chat max_tokens must be >= 1");
  }

  json to_json() const {
    json j{{"system", system_prompt},
           {"user", user_message},
           {"temperature", temperature},
           {"max_tokens", max_tokens}};
    if (seed) j["seed"] = *seed;
    return j;
  }
};

struct GenParams {
  std::optional<std::int64_t> seed;
  json extra = json::object();

  json to_json() const {
    json j{{"params", extra}};
    if (seed) j["seed"] = *seed;
    return j;
  }
};

/// Raw generation output before it is stored: bytes plus metadata.
struct VideoPayload {
  std::string bytes;
  int frame_count = 0;
  double fps = 0.0;
  std::string origin_url;  // where an HTTP backend served it from, if any
};

/// A stored video. `id` is the SHA-256 of the stored bytes.
struct VideoArtifact {
  std::string id;
  int frame_count = 0;
  double fps = 0.0;
  std::string storage_ref;
  std::string source_prompt;
  std::string origin_url;

  /// Content identity used in stage hashes: excludes storage location,
  /// which varies between in-memory and on-disk stores.
  json fingerprint_json() const {
    return json{{"id", id},
                {"frame_count", frame_count},
                {"fps", fps},
                {"source_prompt", source_prompt}};
  }

  json to_json() const {
    json j = fingerprint_json();
    j["storage_ref"] = storage_ref;
    j["origin_url"] = origin_url;
    return j;
  }

  static VideoArtifact from_json(const json& j) {
    VideoArtifact a;
    a.id = j.at("id").get<std::string>();
    a.frame_count = j.at("frame_count").get<int>();
    a.fps = j.at("fps").get<double>();
    a.source_prompt = j.at("source_prompt").get<std::string>();
    a.storage_ref = j.value("storage_ref", "");
    a.origin_url = j.value("origin_url", "");
    return a;
  }
};

struct VqaAnswer {
  int question_id = 0;
  double score = 0.0;

  json to_json() const { return json{{"question_id", question_id}, {"score", score}}; }

  static VqaAnswer from_json(const json& j) {
    return VqaAnswer{j.at("question_id").get<int>(), j.at("score").get<double>()};
  }
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{500};
  double backoff_multiplier = 2.0;
  std::set<ErrorKind> retryable = {ErrorKind::kTransport, ErrorKind::kRateLimited,
                                   ErrorKind::kTimeout};

  void validate() const {
    if (max_attempts < 1) throw ValidationError("retry max_attempts must be >= 1");
    if (backoff_multiplier < 1.0) throw ValidationError("retry backoff_multiplier must be >= 1");
    if (base_backoff.count() < 0) throw ValidationError("retry base_backoff must be >= 0");
  }

  bool is_retryable(ErrorKind k) const { return retryable.count(k) > 0; }

  std::chrono::milliseconds delay_for(int attempt) const {
    double ms = static_cast<double>(base_backoff.count()) *
                std::pow(backoff_multiplier, attempt - 1);
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
  }

  json to_json() const {
    return json{{"max_attempts", max_attempts},
                {"base_backoff_ms", base_backoff.count()},
                {"backoff_multiplier", backoff_multiplier}};
  }

  static RetryPolicy from_json(const json& j) {
    RetryPolicy p;
    p.max_attempts = j.value("max_attempts", p.max_attempts);
    p.base_backoff = std::chrono::milliseconds(
        j.value("base_backoff_ms", static_cast<std::int64_t>(p.base_backoff.count())));
    p.backoff_multiplier = j.value("backoff_multiplier", p.backoff_multiplier);
    return p;
  }
};

// Backend contracts. Implementations must tolerate concurrent calls and, for
// mocks, respond as a pure function of (seed, request content).

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string id() const = 0;
  virtual std::string complete(const ChatRequest& request) = 0;
};

class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed(const std::string& text) = 0;
};

class TextToVideoClient {
 public:
  virtual ~TextToVideoClient() = default;
  virtual std::string id() const = 0;
  virtual VideoPayload generate(const std::string& prompt, const GenParams& params) = 0;
};

class VqaClient {
 public:
  virtual ~VqaClient() = default;
  virtual std::string id() const = 0;
  virtual double answer(const VideoArtifact& video, const std::string& question) = 0;
};

class EnhanceClient {
 public:
  virtual ~EnhanceClient() = default;
  virtual std::string id() const = 0;
  virtual VideoPayload enhance(const VideoArtifact& video, const std::string& intent,
                               int target_frames) = 0;
};

struct Backends {
  std::shared_ptr<EmbeddingClient> embedder;
  std::shared_ptr<ChatClient> chat;
  std::shared_ptr<TextToVideoClient> t2v;
  std::shared_ptr<VqaClient> vqa;
  std::shared_ptr<EnhanceClient> enhancer;

  json ids() const {
    return json{{"embed", embedder ? embedder->id() : ""},
                {"chat", chat ? chat->id() : ""},
                {"t2v", t2v ? t2v->id() : ""},
                {"vqa", vqa ? vqa->id() : ""},
                {"enhance", enhancer ? enhancer->id() : ""}};
  }
};

/// One backend invocation attempt, as it goes into the run record.
struct CallRecord {
  std::string backend_id;
  std::string op;     // chat | embed | t2v | vqa | enhance
  std::string stage;  // pipeline stage label, "" outside a run
  int attempt = 1;
  json request;
  json response;
  bool ok = false;
  std::string error_kind;
  std::string error_detail;
  double duration_ms = 0.0;

  json to_json() const {
    json j{{"backend_id", backend_id}, {"op", op},         {"stage", stage},
           {"attempt", attempt},       {"request", request}, {"ok", ok},
           {"duration_ms", duration_ms}};
    if (ok) j["response"] = response;
    else {
      j["error_kind"] = error_kind;
      j["error_detail"] = error_detail;
    }
    return j;
  }
};

/// Append-only log of every real backend call (cache hits do not appear).
class Transcript {
 public:
  void append(CallRecord rec) {
    std::lock_guard<std::mutex> lock(mu_);
    records_.push_back(std::move(rec));
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return records_.size();
  }

  std::vector<CallRecord> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return records_;
  }

  std::size_t count_op(const std::string& op) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::size_t n = 0;
    for (const auto& r : records_) n += (r.op == op);
    return n;
  }

  std::size_t count_stage_op(const std::string& stage, const std::string& op) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::size_t n = 0;
    for (const auto& r : records_) n += (r.stage == stage && r.op == op);
    return n;
  }

 private:
  mutable std::mutex mu_;
  std::vector<CallRecord> records_;
};

/// Content-addressed video storage. With a root directory, bytes live at
/// <root>/blobs/<sha256>.bin; without one, in an in-process map.
class ArtifactStore {
 public:
  ArtifactStore() = default;
  explicit ArtifactStore(std::shared_ptr<CacheStore> disk) : disk_(std::move(disk)) {}

  VideoArtifact put(const VideoPayload& payload, const std::string& source_prompt) {
    VideoArtifact a;
    a.id = sha256_hex(payload.bytes);
    a.frame_count = payload.frame_count;
    a.fps = payload.fps;
    a.source_prompt = source_prompt;
    a.origin_url = payload.origin_url;
    if (disk_) {
      a.storage_ref = "file:" + disk_->put_blob(a.id, payload.bytes).string();
    } else {
      std::lock_guard<std::mutex> lock(mu_);
      mem_[a.id] = payload.bytes;
      a.storage_ref = "mem:" + a.id;
    }
    return a;
  }

  /// Registers bytes that already exist elsewhere (run-directory restore).
  /// Throws MissingArtifact when the bytes do not hash to `expected_id`.
  VideoArtifact put_existing(const std::string& bytes, const VideoArtifact& meta,
                             const std::string& expected_id) {
    if (sha256_hex(bytes) != expected_id)
      throw MissingArtifact("stored bytes for " + short_hash(expected_id) +
                            " no longer match their content hash");
    VideoPayload payload{bytes, meta.frame_count, meta.fps, meta.origin_url};
    return put(payload, meta.source_prompt);
  }

  std::string load_bytes(const VideoArtifact& a) const {
    if (disk_) {
      auto bytes = disk_->get_blob(a.id);
      if (!bytes) throw MissingArtifact("no stored bytes for video " + short_hash(a.id));
      return *bytes;
    }
    std::lock_guard<std::mutex> lock(mu_);
    auto it = mem_.find(a.id);
    if (it == mem_.end()) throw MissingArtifact("no stored bytes for video " + short_hash(a.id));
    return it->second;
  }

  bool contains(const std::string& id) const {
    if (disk_) return disk_->has_blob(id);
    std::lock_guard<std::mutex> lock(mu_);
    return mem_.count(id) > 0;
  }

  std::string ref_for(const std::string& id) const {
    if (disk_) return "file:" + disk_->blob_path(id).string();
    return "mem:" + id;
  }

 private:
  std::shared_ptr<CacheStore> disk_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::string> mem_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Routes every backend call through retries, transcript recording, and the
/// persistent caches. This is the only way pipeline stages talk to models.
class ClientSession {
 public:
  explicit ClientSession(Backends backends, RetryPolicy retry = {},
                         std::shared_ptr<CacheStore> cache = nullptr, Sleeper sleeper = {})
      : backends_(std::move(backends)),
        retry_(retry),
        cache_(std::move(cache)),
        store_(cache_ ? ArtifactStore(cache_) : ArtifactStore()),
        sleeper_(sleeper ? std::move(sleeper)
                         : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    retry_.validate();
  }

  const Backends& backends() const { return backends_; }
  Transcript& transcript() { return transcript_; }
  const Transcript& transcript() const { return transcript_; }
  ArtifactStore& artifacts() { return store_; }
  std::shared_ptr<CacheStore> cache() const { return cache_; }
  json backend_ids() const { return backends_.ids(); }

  std::string complete(const ChatRequest& request, const std::string& stage = "") {
    request.validate();
    require(backends_.chat != nullptr, "chat");
    return with_retries<std::string>(
        backends_.chat->id(), "chat", stage, request.to_json(),
        [&] {
          std::string text = backends_.chat->complete(request);
          if (text.empty()) throw ClientError(ErrorKind::kSchemaViolation, "empty completion");
          return text;
        },
        [](const std::string& text) { return json{{"text", text}}; });
  }

  EmbeddingVector embed(const std::string& text, const std::string& stage = "") {
    if (text.empty()) throw PreconditionViolation("cannot embed empty text");
    require(backends_.embedder != nullptr, "embedding");
    const std::string key = sha256_hex(backends_.embedder->id() + "\n" + sha256_hex(text));
    {
      std::lock_guard<std::mutex> lock(embed_mu_);
      auto it = embed_memo_.find(key);
      if (it != embed_memo_.end()) return it->second;
    }
    if (cache_) {
      if (auto hit = cache_->get("embed", key)) {
        EmbeddingVector v = EmbeddingVector::from_json(*hit);
        std::lock_guard<std::mutex> lock(embed_mu_);
        embed_memo_.emplace(key, v);
        return v;
      }
    }
    EmbeddingVector v = with_retries<EmbeddingVector>(
        backends_.embedder->id(), "embed", stage, json{{"text", text}},
        [&] { return backends_.embedder->embed(text); },
        [](const EmbeddingVector& e) { return json{{"dim", e.dim()}}; });
    if (cache_) cache_->put("embed", key, v.to_json());
    std::lock_guard<std::mutex> lock(embed_mu_);
    embed_memo_.emplace(key, v);
    return v;
  }

  VideoArtifact generate_video(const std::string& prompt, const GenParams& params = {},
                               const std::string& stage = "") {
    if (trim_prompt(prompt).empty())
      throw PreconditionViolation("cannot generate video from an empty prompt");
    require(backends_.t2v != nullptr, "text-to-video");
    return with_retries<VideoArtifact>(
        backends_.t2v->id(), "t2v", stage, json{{"prompt", prompt}, {"gen", params.to_json()}},
        [&] {
          VideoPayload payload = backends_.t2v->generate(prompt, params);
          if (payload.frame_count < 1 || !(payload.fps > 0.0))
            throw ContractViolation("text-to-video backend returned invalid metadata");
          return store_.put(payload, prompt);
        },
        [](const VideoArtifact& a) { return a.fingerprint_json(); });
  }

  VqaAnswer answer_question(const VideoArtifact& video, int question_id,
                            const std::string& question, const std::string& stage = "") {
    if (question.empty()) throw PreconditionViolation("cannot ask an empty question");
    if (question.find("[prompt]") != std::string::npos) throw PlaceholderLeak(question);
    require(backends_.vqa != nullptr, "vqa");
    const std::string key = sha256_hex(video.id + "\n" + sha256_hex(question));
    if (cache_) {
      if (auto hit = cache_->get("vqa", key))
        return VqaAnswer{question_id, hit->at("score").get<double>()};
    }
    double score = with_retries<double>(
        backends_.vqa->id(), "vqa", stage,
        json{{"video_id", video.id}, {"question", question}},
        [&] {
          double s = backends_.vqa->answer(video, question);
          if (!std::isfinite(s) || s < 0.0 || s > 1.0)
            throw ContractViolation("vqa backend returned a score outside [0, 1]");
          return s;
        },
        [](double s) { return json{{"score", s}}; });
    if (cache_) cache_->put("vqa", key, json{{"score", score}});
    return VqaAnswer{question_id, score};
  }

  VideoArtifact enhance_video(const VideoArtifact& video, const std::string& intent,
                              int target_frames, const std::string& stage = "") {
    if (target_frames < video.frame_count)
      throw PreconditionViolation("target_frames " + std::to_string(target_frames) +
                                  " is below the video's frame count " +
                                  std::to_string(video.frame_count));
    if (target_frames == video.frame_count) return video;  // identity enhancement
    require(backends_.enhancer != nullptr, "enhancement");
    return with_retries<VideoArtifact>(
        backends_.enhancer->id(), "enhance", stage,
        json{{"video_id", video.id}, {"intent", intent}, {"target_frames", target_frames}},
        [&] {
          VideoPayload payload = backends_.enhancer->enhance(video, intent, target_frames);
          if (payload.frame_count != target_frames)
            throw ContractViolation("enhancer returned " + std::to_string(payload.frame_count) +
                                    " frames, expected " + std::to_string(target_frames));
          if (payload.fps <= 0.0) payload.fps = video.fps;
          return store_.put(payload, video.source_prompt);
        },
        [](const VideoArtifact& a) { return a.fingerprint_json(); });
  }

 private:
  static void require(bool present, const char* what) {
    if (!present) throw PreconditionViolation(std::string("no ") + what + " backend configured");
  }

  static std::string trim_prompt(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    return b == std::string::npos ? "" : s.substr(b);
  }

  template <typename T, typename Fn, typename ToJson>
  T with_retries(const std::string& backend_id, const std::string& op, const std::string& stage,
                 const json& request, Fn&& fn, ToJson&& to_json_fn) {
    for (int attempt = 1;; ++attempt) {
      auto start = std::chrono::steady_clock::now();
      CallRecord rec;
      rec.backend_id = backend_id;
      rec.op = op;
      rec.stage = stage;
      rec.attempt = attempt;
      rec.request = request;
      try {
        T result = fn();
        rec.ok = true;
        rec.response = to_json_fn(result);
        rec.duration_ms = elapsed_ms(start);
        transcript_.append(std::move(rec));
        return result;
      } catch (const ClientError& e) {
        rec.ok = false;
        rec.error_kind = to_string(e.kind());
        rec.error_detail = e.detail();
        rec.duration_ms = elapsed_ms(start);
        transcript_.append(std::move(rec));
        if (!retry_.is_retryable(e.kind()) || attempt >= retry_.max_attempts)
          throw e.with_attempt(attempt);
        auto delay = retry_.delay_for(attempt);
        if (e.kind() == ErrorKind::kRateLimited && e.retry_after() && *e.retry_after() > delay)
          delay = *e.retry_after();
        sleeper_(delay);
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error_kind = "Internal";
        rec.error_detail = e.what();
        rec.duration_ms = elapsed_ms(start);
        transcript_.append(std::move(rec));
        throw;
      }
    }
  }

  static double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }

  Backends backends_;
  RetryPolicy retry_;
  std::shared_ptr<CacheStore> cache_;
  ArtifactStore store_;
  Sleeper sleeper_;
  Transcript transcript_;
  std::mutex embed_mu_;
  std::unordered_map<std::string, EmbeddingVector> embed_memo_;
};

}  // namespace threer
