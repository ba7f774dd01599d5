#pragma once

#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <httplib.h>

#include "threer/clients.hpp"

namespace threer {

/// Wiring for the minimal JSON-over-POST adapter family. Provider-specific
/// translation belongs in the service behind these endpoints, not here.
/// The API key is read from the named environment variable at call time and
/// never appears in transcripts.
struct HttpAdapterConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::string chat_path = "/chat";
  std::string embed_path = "/embed";
  std::string t2v_path = "/t2v";
  std::string vqa_path = "/vqa";
  std::string enhance_path = "/enhance";
  std::string api_key_env;
  std::size_t embed_dim = 384;
  int timeout_ms = 30000;

  static HttpAdapterConfig from_json(const json& j) {
    HttpAdapterConfig cfg;
    cfg.base_url = j.at("base_url").get<std::string>();
    cfg.chat_path = j.value("chat_path", cfg.chat_path);
    cfg.embed_path = j.value("embed_path", cfg.embed_path);
    cfg.t2v_path = j.value("t2v_path", cfg.t2v_path);
    cfg.vqa_path = j.value("vqa_path", cfg.vqa_path);
    cfg.enhance_path = j.value("enhance_path", cfg.enhance_path);
    cfg.api_key_env = j.value("api_key_env", cfg.api_key_env);
    cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
    cfg.timeout_ms = j.value("timeout_ms", cfg.timeout_ms);
    if (cfg.base_url.empty()) throw ValidationError("adapter config needs base_url");
    return cfg;
  }

  static HttpAdapterConfig from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open adapter config: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j = json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw ValidationError("adapter config is not valid JSON: " + path);
    return from_json(j);
  }
};

namespace detail {

inline std::optional<std::string> base64_decode(const std::string& in) {
  static const std::string chars =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  int val = 0, bits = -8;
  for (char c : in) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    std::size_t pos = chars.find(c);
    if (pos == std::string::npos) return std::nullopt;
    val = (val << 6) + static_cast<int>(pos);
    bits += 6;
    if (bits >= 0) {
      out.push_back(static_cast<char>((val >> bits) & 0xff));
      bits -= 8;
    }
  }
  return out;
}

inline ClientError error_from_status(int status, const std::string& body,
                                     const std::string& retry_after_header) {
  const std::string excerpt = body.substr(0, std::min<std::size_t>(body.size(), 160));
  if (status == 429) {
    std::optional<std::chrono::milliseconds> retry_after;
    if (!retry_after_header.empty()) {
      char* end = nullptr;
      long secs = std::strtol(retry_after_header.c_str(), &end, 10);
      if (end != retry_after_header.c_str() && secs >= 0)
        retry_after = std::chrono::milliseconds(secs * 1000);
    }
    return ClientError(ErrorKind::kRateLimited, "HTTP 429: " + excerpt, retry_after);
  }
  if (status == 408) return ClientError(ErrorKind::kTimeout, "HTTP 408: " + excerpt);
  if (status == 403 || status == 451)
    return ClientError(ErrorKind::kContentPolicy, "HTTP " + std::to_string(status) + ": " + excerpt);
  if (status == 400 || status == 404 || status == 422)
    return ClientError(ErrorKind::kSchemaViolation,
                       "HTTP " + std::to_string(status) + ": " + excerpt);
  return ClientError(ErrorKind::kTransport, "HTTP " + std::to_string(status) + ": " + excerpt);
}

/// Shared POST/GET plumbing for the adapter family.
class HttpEndpoint {
 public:
  explicit HttpEndpoint(HttpAdapterConfig cfg) : cfg_(std::move(cfg)) {}

  const HttpAdapterConfig& config() const { return cfg_; }

  json post_json(const std::string& path, const json& body) const {
    httplib::Client cli(cfg_.base_url);
    configure(cli);
    auto res = cli.Post(path, headers(), body.dump(), "application/json");
    if (!res) throw ClientError(ErrorKind::kTransport, httplib::to_string(res.error()));
    if (res->status != 200)
      throw error_from_status(res->status, res->body, res->get_header_value("Retry-After"));
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded())
      throw ClientError(ErrorKind::kSchemaViolation, "response is not valid JSON");
    return parsed;
  }

  /// Fetches artifact bytes from a data URI, a path on the adapter host, or
  /// an absolute URL.
  std::string fetch_bytes(const std::string& url) const {
    static const std::string kDataPrefix = "data:base64,";
    if (url.rfind(kDataPrefix, 0) == 0) {
      auto bytes = base64_decode(url.substr(kDataPrefix.size()));
      if (!bytes) throw ClientError(ErrorKind::kSchemaViolation, "invalid base64 artifact data");
      return *bytes;
    }
    std::string origin = cfg_.base_url;
    std::string path = url;
    if (url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0) {
      std::size_t host_start = url.find("//") + 2;
      std::size_t path_start = url.find('/', host_start);
      origin = path_start == std::string::npos ? url : url.substr(0, path_start);
      path = path_start == std::string::npos ? "/" : url.substr(path_start);
    }
    httplib::Client cli(origin);
    configure(cli);
    auto res = cli.Get(path, headers());
    if (!res) throw ClientError(ErrorKind::kTransport, httplib::to_string(res.error()));
    if (res->status != 200)
      throw error_from_status(res->status, res->body, res->get_header_value("Retry-After"));
    return res->body;
  }

 private:
  void configure(httplib::Client& cli) const {
    cli.set_connection_timeout(0, cfg_.timeout_ms * 1000);
    cli.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    cli.set_write_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
  }

  httplib::Headers headers() const {
    httplib::Headers h;
    if (!cfg_.api_key_env.empty()) {
      if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
        h.emplace("Authorization", std::string("Bearer ") + key);
    }
    return h;
  }

  HttpAdapterConfig cfg_;
};

}  // namespace detail

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpAdapterConfig cfg) : ep_(std::move(cfg)) {}

  std::string id() const override { return "http-chat:" + ep_.config().base_url; }

  std::string complete(const ChatRequest& request) override {
    json body{{"system", request.system_prompt},
              {"user", request.user_message},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    json res = ep_.post_json(ep_.config().chat_path, body);
    if (!res.contains("text") || !res["text"].is_string())
      throw ClientError(ErrorKind::kSchemaViolation, "chat response lacks a text field");
    return res["text"].get<std::string>();
  }

 private:
  detail::HttpEndpoint ep_;
};

class HttpEmbeddingClient : public EmbeddingClient {
 public:
  explicit HttpEmbeddingClient(HttpAdapterConfig cfg) : ep_(std::move(cfg)) {}

  std::string id() const override { return "http-embed:" + ep_.config().base_url; }

  std::size_t dim() const override { return ep_.config().embed_dim; }

  EmbeddingVector embed(const std::string& text) override {
    json res = ep_.post_json(ep_.config().embed_path, json{{"text", text}});
    if (!res.contains("values") || !res["values"].is_array())
      throw ClientError(ErrorKind::kSchemaViolation, "embed response lacks a values array");
    EmbeddingVector v = [&] {
      try {
        return EmbeddingVector::from_json(res["values"]);
      } catch (const ValidationError& e) {
        throw ClientError(ErrorKind::kSchemaViolation, e.what());
      }
    }();
    if (v.dim() != dim())
      throw ClientError(ErrorKind::kSchemaViolation,
                        "embedding dimension " + std::to_string(v.dim()) +
                            " does not match configured " + std::to_string(dim()));
    return v;
  }

 private:
  detail::HttpEndpoint ep_;
};

class HttpT2vClient : public TextToVideoClient {
 public:
  explicit HttpT2vClient(HttpAdapterConfig cfg) : ep_(std::move(cfg)) {}

  std::string id() const override { return "http-t2v:" + ep_.config().base_url; }

  VideoPayload generate(const std::string& prompt, const GenParams& params) override {
    json body{{"prompt", prompt}, {"params", params.extra}};
    if (params.seed) body["seed"] = *params.seed;
    json res = ep_.post_json(ep_.config().t2v_path, body);
    if (!res.contains("artifact_url") || !res.contains("frame_count"))
      throw ClientError(ErrorKind::kSchemaViolation, "t2v response lacks artifact_url/frame_count");
    VideoPayload payload;
    payload.origin_url = res["artifact_url"].get<std::string>();
    payload.frame_count = res["frame_count"].get<int>();
    payload.fps = res.value("fps", 8.0);
    payload.bytes = ep_.fetch_bytes(payload.origin_url);
    return payload;
  }

 private:
  detail::HttpEndpoint ep_;
};

class HttpVqaClient : public VqaClient {
 public:
  explicit HttpVqaClient(HttpAdapterConfig cfg) : ep_(std::move(cfg)) {}

  std::string id() const override { return "http-vqa:" + ep_.config().base_url; }

  double answer(const VideoArtifact& video, const std::string& question) override {
    const std::string url = video.origin_url.empty() ? video.storage_ref : video.origin_url;
    json res = ep_.post_json(ep_.config().vqa_path,
                             json{{"artifact_url", url}, {"question", question}});
    if (!res.contains("score") || !res["score"].is_number())
      throw ClientError(ErrorKind::kSchemaViolation, "vqa response lacks a numeric score");
    return res["score"].get<double>();
  }

 private:
  detail::HttpEndpoint ep_;
};

class HttpEnhanceClient : public EnhanceClient {
 public:
  explicit HttpEnhanceClient(HttpAdapterConfig cfg) : ep_(std::move(cfg)) {}

  std::string id() const override { return "http-enhance:" + ep_.config().base_url; }

  VideoPayload enhance(const VideoArtifact& video, const std::string& intent,
                       int target_frames) override {
    const std::string url = video.origin_url.empty() ? video.storage_ref : video.origin_url;
    json res = ep_.post_json(
        ep_.config().enhance_path,
        json{{"artifact_url", url}, {"intent", intent}, {"target_frames", target_frames}});
    if (!res.contains("artifact_url") || !res.contains("frame_count"))
      throw ClientError(ErrorKind::kSchemaViolation,
                        "enhance response lacks artifact_url/frame_count");
    VideoPayload payload;
    payload.origin_url = res["artifact_url"].get<std::string>();
    payload.frame_count = res["frame_count"].get<int>();
    payload.fps = res.value("fps", video.fps);
    payload.bytes = ep_.fetch_bytes(payload.origin_url);
    return payload;
  }

 private:
  detail::HttpEndpoint ep_;
};

inline Backends make_http_backends(const HttpAdapterConfig& cfg) {
  Backends b;
  b.embedder = std::make_shared<HttpEmbeddingClient>(cfg);
  b.chat = std::make_shared<HttpChatClient>(cfg);
  b.t2v = std::make_shared<HttpT2vClient>(cfg);
  b.vqa = std::make_shared<HttpVqaClient>(cfg);
  b.enhancer = std::make_shared<HttpEnhanceClient>(cfg);
  return b;
}

}  // namespace threer
