#include "threer/http_clients.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <atomic>
#include <thread>

#include "threer/mock_clients.hpp"

using namespace threer;
using namespace std::chrono_literals;

namespace {

/// Local stub server speaking the adapter wire shapes.
class StubServer {
 public:
  StubServer() {
    svr_.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth_ = req.get_header_value("Authorization");
      int n = ++chat_calls_;
      if (n <= rate_limit_first_n_) {
        res.status = 429;
        res.set_header("Retry-After", "1");
        res.set_content("slow down", "text/plain");
        return;
      }
      json body = json::parse(req.body);
      res.set_content(json{{"text", "echo:" + body.at("user").get<std::string>()}}.dump(),
                      "application/json");
    });
    svr_.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body);
      const std::string& text = body.at("text").get_ref<const std::string&>();
      std::vector<double> values(4, 0.0);
      for (std::size_t i = 0; i < text.size(); ++i)
        values[i % 4] += static_cast<double>(static_cast<unsigned char>(text[i])) / 255.0;
      if (values == std::vector<double>(4, 0.0)) values[0] = 1.0;
      res.set_content(json{{"values", values}}.dump(), "application/json");
    });
    svr_.Post("/t2v", [](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body);
      res.set_content(json{{"artifact_url", "/artifacts/" + sha256_hex(body.dump()).substr(0, 8)},
                           {"frame_count", 16},
                           {"fps", 8.0}}
                          .dump(),
                      "application/json");
    });
    svr_.Get(R"(/artifacts/(\w+))", [](const httplib::Request& req, httplib::Response& res) {
      res.set_content("video-bytes-" + req.matches[1].str(), "application/octet-stream");
    });
    svr_.Post("/vqa", [](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body);
      double score =
          body.at("question").get<std::string>().find("yes") != std::string::npos ? 1.0 : 0.0;
      res.set_content(json{{"score", score}}.dump(), "application/json");
    });
    svr_.Post("/enhance", [this](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body);
      int frames = body.at("target_frames").get<int>();
      if (break_enhance_contract_) frames -= 1;
      res.set_content(json{{"artifact_url", "data:base64,ZW5oYW5jZWQtYnl0ZXM="},
                           {"frame_count", frames}}
                          .dump(),
                      "application/json");
    });

    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }

  ~StubServer() {
    svr_.stop();
    thread_.join();
  }

  HttpAdapterConfig config() const {
    HttpAdapterConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port_);
    cfg.embed_dim = 4;
    cfg.timeout_ms = 5000;
    return cfg;
  }

  void rate_limit_first(int n) { rate_limit_first_n_ = n; }
  void break_enhance_contract() { break_enhance_contract_ = true; }
  int chat_calls() const { return chat_calls_; }
  std::string last_auth() const { return last_auth_; }

 private:
  httplib::Server svr_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> chat_calls_{0};
  int rate_limit_first_n_ = 0;
  bool break_enhance_contract_ = false;
  std::string last_auth_;
};

ClientSession fast_retry_session(Backends b) {
  RetryPolicy policy;
  policy.max_attempts = 3;
  policy.base_backoff = 1ms;
  return ClientSession(std::move(b), policy);
}

}  // namespace

TEST_CASE("http chat adapter round-trips and sends the bearer token") {
  StubServer server;
  setenv("THREER_TEST_KEY", "sekret", 1);
  HttpAdapterConfig cfg = server.config();
  cfg.api_key_env = "THREER_TEST_KEY";

  ClientSession session = fast_retry_session(make_http_backends(cfg));
  ChatRequest req;
  req.user_message = "ping";
  CHECK(session.complete(req) == "echo:ping");
  CHECK(server.last_auth() == "Bearer sekret");
  unsetenv("THREER_TEST_KEY");
}

TEST_CASE("a 429 then 200 sequence is retried per policy") {
  StubServer server;
  server.rate_limit_first(1);
  ClientSession session = fast_retry_session(make_http_backends(server.config()));
  ChatRequest req;
  req.user_message = "retry me";
  CHECK(session.complete(req) == "echo:retry me");
  CHECK(server.chat_calls() == 2);

  auto records = session.transcript().snapshot();
  REQUIRE(records.size() == 2);
  CHECK(records[0].error_kind == "RateLimited");
  CHECK(records[1].ok);
}

TEST_CASE("http embedding adapter validates the configured dimension") {
  StubServer server;
  ClientSession session = fast_retry_session(make_http_backends(server.config()));
  EmbeddingVector v = session.embed("hello world");
  CHECK(v.dim() == 4);

  HttpAdapterConfig wrong = server.config();
  wrong.embed_dim = 8;
  Backends b = make_http_backends(wrong);
  RetryPolicy policy;
  policy.max_attempts = 1;
  ClientSession strict(std::move(b), policy);
  CHECK_THROWS_AS(strict.embed("hello"), ClientError);
}

TEST_CASE("http t2v adapter fetches artifact bytes and content-addresses them") {
  StubServer server;
  ClientSession session = fast_retry_session(make_http_backends(server.config()));
  VideoArtifact a = session.generate_video("a barn");
  CHECK(a.frame_count == 16);
  CHECK(a.origin_url.rfind("/artifacts/", 0) == 0);
  CHECK(a.id == sha256_hex(session.artifacts().load_bytes(a)));
}

TEST_CASE("http vqa adapter returns the wire score") {
  StubServer server;
  ClientSession session = fast_retry_session(make_http_backends(server.config()));
  VideoArtifact a = session.generate_video("a barn");
  CHECK(session.answer_question(a, 0, "answer yes please").score == 1.0);
  CHECK(session.answer_question(a, 1, "answer no please").score == 0.0);
}

TEST_CASE("http enhance adapter enforces the frame-count contract") {
  StubServer server;
  ClientSession session = fast_retry_session(make_http_backends(server.config()));
  VideoArtifact a = session.generate_video("a barn");
  VideoArtifact enhanced = session.enhance_video(a, "a barn", 61);
  CHECK(enhanced.frame_count == 61);
  CHECK(session.artifacts().load_bytes(enhanced) == "enhanced-bytes");
}

TEST_CASE("an enhancer that misses the target frame count violates the contract") {
  StubServer server;
  server.break_enhance_contract();
  ClientSession session = fast_retry_session(make_http_backends(server.config()));
  VideoArtifact a = session.generate_video("a barn");
  CHECK_THROWS_AS(session.enhance_video(a, "a barn", 61), ContractViolation);
}

TEST_CASE("an unreachable host surfaces as a transport error") {
  HttpAdapterConfig cfg;
  cfg.base_url = "http://127.0.0.1:9";  // discard port, nothing listens
  cfg.timeout_ms = 300;
  RetryPolicy policy;
  policy.max_attempts = 2;
  policy.base_backoff = 1ms;
  ClientSession session(make_http_backends(cfg), policy);
  ChatRequest req;
  req.user_message = "anyone there";
  try {
    session.complete(req);
    FAIL("expected ClientError");
  } catch (const ClientError& e) {
    CHECK(e.kind() == ErrorKind::kTransport);
    CHECK(e.attempt() == 2);
  }
}
