#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "threer/clients.hpp"

namespace threer {

// Deterministic mock backends: every response is a pure function of the
// backend seed and the request content, so identical runs produce identical
// transcripts regardless of thread interleaving.

namespace detail {

inline std::string deterministic_blob(std::uint64_t seed, std::size_t n_bytes) {
  std::string out;
  out.reserve(n_bytes);
  std::uint64_t state = seed;
  while (out.size() < n_bytes) {
    std::uint64_t w = mix64(state);
    for (int i = 0; i < 8 && out.size() < n_bytes; ++i) {
      out.push_back(static_cast<char>((w >> (8 * i)) & 0xff));
    }
  }
  return out;
}

/// Substring between two markers; nullopt when either marker is absent.
inline std::optional<std::string> slice_between(const std::string& text, const std::string& after,
                                                const std::string& before) {
  std::size_t a = text.find(after);
  if (a == std::string::npos) return std::nullopt;
  a += after.size();
  std::size_t b = text.find(before, a);
  if (b == std::string::npos) return std::nullopt;
  return text.substr(a, b - a);
}

}  // namespace detail

class MockEmbeddingClient : public EmbeddingClient {
 public:
  explicit MockEmbeddingClient(std::uint64_t seed = 0, std::size_t dim = 16)
      : seed_(seed), dim_(dim) {}

  std::string id() const override {
    return "mock-embed-s" + std::to_string(seed_) + "-d" + std::to_string(dim_);
  }

  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed(const std::string& text) override {
    std::uint64_t state = text_seed("embed\n" + std::to_string(seed_) + "\n" + text);
    std::vector<double> values(dim_);
    for (auto& v : values) v = 2.0 * unit_double(mix64(state)) - 1.0;
    bool all_zero = true;
    for (double v : values) all_zero = all_zero && v == 0.0;
    if (all_zero) values[0] = 1.0;
    return EmbeddingVector(std::move(values));
  }

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Recognizes the shipped prompt templates by their markers and answers in a
/// way that keeps the whole pipeline runnable without any real model:
/// merge prompts get the modifier appended, refinement prompts get a JSON
/// list of four variants, critique prompts get a schema-conformant report.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(std::uint64_t seed = 0) : seed_(seed) {}

  std::string id() const override { return "mock-chat-s" + std::to_string(seed_); }

  std::string complete(const ChatRequest& request) override {
    const std::string& user = request.user_message;
    if (user.find("STRICT JSON OUTPUT SCHEMA") != std::string::npos) return critique(user);
    if (user.find("\nModifier: ") != std::string::npos &&
        user.find("Updated Description:") != std::string::npos) {
      return merge(user);
    }
    if (user.find("4 Refined Descriptions:") != std::string::npos) return refine(user);
    return "mock:" + short_hash(sha256_hex(std::to_string(seed_) + "\n" + request.system_prompt +
                                           "\n" + user));
  }

 private:
  std::string merge(const std::string& user) const {
    auto desc = detail::slice_between(user, "Current Description: ", "\nModifier: ");
    auto mod = detail::slice_between(user, "\nModifier: ", "\n\nUpdated Description:");
    if (!desc || !mod) return "mock-merge";
    return *desc + ", " + *mod;
  }

  std::string refine(const std::string& user) const {
    auto desc =
        detail::slice_between(user, "Original Description: ", "\n\n4 Refined Descriptions:");
    std::string base = desc ? *desc : "a simple scene";
    static const char* kTails[] = {
        "Soft golden light bathes the scene.",
        "The camera pans slowly across the scene.",
        "Fine details stand out in crisp focus.",
        "Gentle motion gives the scene a calm rhythm.",
        "The colors are vivid and natural.",
        "A shallow depth of field frames the subject.",
    };
    std::uint64_t h = text_seed("refine\n" + std::to_string(seed_) + "\n" + base);
    json arr = json::array();
    for (int k = 0; k < 4; ++k)
      arr.push_back(base + " " + kTails[(h + static_cast<std::uint64_t>(k)) % 6]);
    return arr.dump();
  }

  std::string critique(const std::string& user) const {
    auto upi = detail::slice_between(user, "(UPI):**\"", "\"\n2.");
    auto dpo = detail::slice_between(user, "(DPO):**\"", "\"\n\n**PHASE 1");
    std::string upi_s = upi ? *upi : "";
    std::string dpo_s = dpo ? *dpo : "a scene";
    std::uint64_t h = text_seed("critique\n" + std::to_string(seed_) + "\n" + upi_s + "\n" + dpo_s);
    int score = static_cast<int>(h % 11);
    json out{
        {"prompt_analysis",
         {{"user_prompt_intent", upi_s},
          {"bottleneck_flaw_metrics",
           {{"metric", "A_TV"},
            {"score", score},
            {"observation", "Mock assessment of text-video alignment."}}},
          {"diagnosis", {{"root_cause", "Mock diagnosis keyed " + short_hash(sha256_hex(dpo_s), 8)}}}}},
        {"prescription",
         {{"P_new", dpo_s + " The main subject stays centered and clearly visible."},
          {"meta_instruction", "Keep the subject prominent."}}}};
    return out.dump();
  }

  std::uint64_t seed_;
};

/// Plays back a fixed script of responses and/or errors; records requests.
class ScriptedChatClient : public ChatClient {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  explicit ScriptedChatClient(std::vector<std::string> responses = {})
      : id_("scripted-chat") {
    for (auto& r : responses) steps_.push_back(Step{std::move(r), std::nullopt});
  }

  explicit ScriptedChatClient(Responder responder) : id_("scripted-chat"), responder_(std::move(responder)) {}

  std::string id() const override { return id_; }

  ScriptedChatClient& push_response(std::string text) {
    std::lock_guard<std::mutex> lock(mu_);
    steps_.push_back(Step{std::move(text), std::nullopt});
    return *this;
  }

  ScriptedChatClient& push_error(ClientError err) {
    std::lock_guard<std::mutex> lock(mu_);
    steps_.push_back(Step{std::nullopt, std::move(err)});
    return *this;
  }

  std::string complete(const ChatRequest& request) override {
    std::lock_guard<std::mutex> lock(mu_);
    requests_.push_back(request);
    if (!steps_.empty()) {
      Step step = std::move(steps_.front());
      steps_.pop_front();
      if (step.error) throw *step.error;
      return *step.text;
    }
    if (responder_) return responder_(request);
    throw ClientError(ErrorKind::kSchemaViolation, "scripted chat client ran out of responses");
  }

  const std::vector<ChatRequest>& requests() const { return requests_; }
  std::size_t call_count() const { return requests_.size(); }

 private:
  struct Step {
    std::optional<std::string> text;
    std::optional<ClientError> error;
  };

  std::string id_;
  mutable std::mutex mu_;
  std::deque<Step> steps_;
  Responder responder_;
  std::vector<ChatRequest> requests_;
};

class MockT2vClient : public TextToVideoClient {
 public:
  explicit MockT2vClient(std::uint64_t seed = 0, int frame_count = 16, double fps = 8.0,
                         std::size_t blob_bytes = 256)
      : seed_(seed), frame_count_(frame_count), fps_(fps), blob_bytes_(blob_bytes) {}

  std::string id() const override { return "mock-t2v-s" + std::to_string(seed_); }

  VideoPayload generate(const std::string& prompt, const GenParams& params) override {
    std::uint64_t s = text_seed("t2v\n" + std::to_string(seed_) + "\n" +
                                std::to_string(params.seed.value_or(0)) + "\n" + prompt);
    return VideoPayload{detail::deterministic_blob(s, blob_bytes_), frame_count_, fps_, ""};
  }

 private:
  std::uint64_t seed_;
  int frame_count_;
  double fps_;
  std::size_t blob_bytes_;
};

/// Binary yes/no answers keyed on (video id, question text).
class MockVqaClient : public VqaClient {
 public:
  explicit MockVqaClient(std::uint64_t seed = 0) : seed_(seed) {}

  std::string id() const override { return "mock-vqa-s" + std::to_string(seed_); }

  double answer(const VideoArtifact& video, const std::string& question) override {
    std::uint64_t h = text_seed("vqa\n" + std::to_string(seed_) + "\n" + video.id + "\n" + question);
    return unit_double(h) < 0.5 ? 0.0 : 1.0;
  }

 private:
  std::uint64_t seed_;
};

class ScriptedVqaClient : public VqaClient {
 public:
  using Responder = std::function<double(const VideoArtifact&, const std::string&)>;

  explicit ScriptedVqaClient(Responder responder) : responder_(std::move(responder)) {}

  static std::shared_ptr<ScriptedVqaClient> all_yes() {
    return std::make_shared<ScriptedVqaClient>([](const VideoArtifact&, const std::string&) { return 1.0; });
  }

  static std::shared_ptr<ScriptedVqaClient> all_no() {
    return std::make_shared<ScriptedVqaClient>([](const VideoArtifact&, const std::string&) { return 0.0; });
  }

  std::string id() const override { return "scripted-vqa"; }

  double answer(const VideoArtifact& video, const std::string& question) override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++calls_;
    }
    return responder_(video, question);
  }

  std::size_t call_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
  }

 private:
  Responder responder_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

class MockEnhanceClient : public EnhanceClient {
 public:
  explicit MockEnhanceClient(std::uint64_t seed = 0, std::size_t blob_bytes = 384)
      : seed_(seed), blob_bytes_(blob_bytes) {}

  std::string id() const override { return "mock-enhance-s" + std::to_string(seed_); }

  VideoPayload enhance(const VideoArtifact& video, const std::string& intent,
                       int target_frames) override {
    std::uint64_t s = text_seed("enhance\n" + std::to_string(seed_) + "\n" + video.id + "\n" +
                                intent + "\n" + std::to_string(target_frames));
    return VideoPayload{detail::deterministic_blob(s, blob_bytes_), target_frames, video.fps, ""};
  }

 private:
  std::uint64_t seed_;
  std::size_t blob_bytes_;
};

inline Backends make_mock_backends(std::uint64_t seed, std::size_t embed_dim = 16) {
  Backends b;
  b.embedder = std::make_shared<MockEmbeddingClient>(seed, embed_dim);
  b.chat = std::make_shared<MockChatClient>(seed);
  b.t2v = std::make_shared<MockT2vClient>(seed);
  b.vqa = std::make_shared<MockVqaClient>(seed);
  b.enhancer = std::make_shared<MockEnhanceClient>(seed);
  return b;
}

}  // namespace threer
