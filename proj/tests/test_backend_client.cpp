#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>

#include <deque>
#include <thread>

#include <httplib.h>

#include "costroute/backend_client.hpp"
#include "costroute/error.hpp"
#include "support.hpp"

using namespace costroute;

namespace {

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Usage;
}

std::string ok_body(const std::string& content, int in = 12, int out = 3) {
  return R"({"model": "m", "choices": [{"message": {"content": ")" + content +
         R"("}}], "usage": {"prompt_tokens": )" + std::to_string(in) +
         R"(, "completion_tokens": )" + std::to_string(out) + "}}";
}

class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(std::deque<HttpResponse> script) : script_(std::move(script)) {}

  HttpResponse post(const std::string& url, const Headers& headers, const std::string& body, double) override {
    urls.push_back(url);
    last_headers = headers;
    bodies.push_back(body);
    if (script_.empty()) fail(Errc::TransportError, "connection refused");
    auto r = script_.front();
    script_.pop_front();
    return r;
  }

  std::vector<std::string> urls;
  std::vector<std::string> bodies;
  Headers last_headers;

 private:
  std::deque<HttpResponse> script_;
};

class EchoClient final : public ChatClient {
 public:
  CompletionResponse complete(const ModelSpec& model, const CompletionRequest& req) const override {
    CompletionResponse r;
    r.content = model.name + ":" + req.messages.back().content;
    r.usage = {static_cast<std::int64_t>(req.messages.back().content.size()), 2};
    r.model = model.name;
    return r;
  }
};

CompletionRequest simple_request(const std::string& text = "hello") {
  CompletionRequest r;
  r.model = "m";
  r.messages.push_back({"user", text});
  r.max_tokens = 32;
  return r;
}

RetryPolicy recorded_waits(std::vector<double>& waits) {
  RetryPolicy p;
  p.max_retries = 3;
  p.initial_backoff_ms = 100;
  p.sleeper = [&waits](double ms) { waits.push_back(ms); };
  return p;
}

}  // namespace

TEST_CASE("successful completion parses content and usage") {
  ScriptedTransport t({{200, ok_body("four", 20, 5)}});
  std::vector<double> waits;
  const auto res = chat_complete(t, Endpoint{"http://host/v1/", "k"}, simple_request(), recorded_waits(waits));
  CHECK(res.content == "four");
  CHECK(res.usage.prompt_tokens == 20);
  CHECK(res.usage.completion_tokens == 5);
  CHECK(t.urls.front() == "http://host/v1/chat/completions");
  bool auth = false;
  for (const auto& [k, v] : t.last_headers) auth = auth || (k == "Authorization" && v == "Bearer k");
  CHECK(auth);
  const auto sent = nlohmann::json::parse(t.bodies.front());
  CHECK(sent["max_tokens"] == 32);
  CHECK(sent["messages"][0]["content"] == "hello");
  CHECK(waits.empty());
}

TEST_CASE("authentication failures are not retried") {
  for (int status : {401, 403}) {
    ScriptedTransport t({{status, "denied"}, {200, ok_body("x")}});
    std::vector<double> waits;
    CHECK(error_of([&] { chat_complete(t, Endpoint{"http://h", ""}, simple_request(), recorded_waits(waits)); }) ==
          Errc::AuthError);
    CHECK(t.urls.size() == 1);
  }
}

TEST_CASE("rate limits back off then succeed") {
  ScriptedTransport t({{429, ""}, {429, ""}, {200, ok_body("done")}});
  std::vector<double> waits;
  const auto res = chat_complete(t, Endpoint{"http://h", ""}, simple_request(), recorded_waits(waits));
  CHECK(res.content == "done");
  CHECK(waits == std::vector<double>{100, 200});
  CHECK(res.latency_ms >= 300.0);
  CHECK(t.urls.size() == 3);
}

TEST_CASE("retries exhaust with the last error kind") {
  ScriptedTransport limited({{429, ""}, {429, ""}, {429, ""}, {429, ""}});
  std::vector<double> waits;
  CHECK(error_of([&] {
          chat_complete(limited, Endpoint{"http://h", ""}, simple_request(), recorded_waits(waits));
        }) == Errc::RateLimited);
  CHECK(limited.urls.size() == 4);

  ScriptedTransport down({{503, ""}, {500, ""}});
  waits.clear();
  CHECK(error_of([&] { chat_complete(down, Endpoint{"http://h", ""}, simple_request(), recorded_waits(waits)); }) ==
        Errc::TimeoutExhausted);
  CHECK(down.urls.size() == 4);

  ScriptedTransport bad({{400, "bad request"}});
  CHECK(error_of([&] { chat_complete(bad, Endpoint{"http://h", ""}, simple_request(), recorded_waits(waits)); }) ==
        Errc::TransportError);
  CHECK(bad.urls.size() == 1);
}

TEST_CASE("backoff grows geometrically up to the cap") {
  RetryPolicy p;
  p.initial_backoff_ms = 250;
  p.multiplier = 2;
  p.max_backoff_ms = 1000;
  CHECK(p.backoff_ms(0) == 250);
  CHECK(p.backoff_ms(1) == 500);
  CHECK(p.backoff_ms(2) == 1000);
  CHECK(p.backoff_ms(5) == 1000);
}

TEST_CASE("malformed responses") {
  CHECK(error_of([] { parse_completion("not json"); }) == Errc::MalformedResponse);
  CHECK(error_of([] { parse_completion(R"({"choices": []})"); }) == Errc::MalformedResponse);
  CHECK(error_of([] {
          parse_completion(
              R"({"choices": [{"message": {"content": "x"}}], "usage": {"prompt_tokens": -1, "completion_tokens": 0}})");
        }) == Errc::MalformedResponse);
  const auto withlp = parse_completion(
      R"({"choices": [{"message": {"content": null}, "logprobs": {"content": [{"logprob": -0.5}, {"logprob": 0}]}}],)"
      R"( "usage": {"prompt_tokens": 1, "completion_tokens": 2}})");
  CHECK(withlp.content.empty());
  CHECK(withlp.token_logprobs == std::vector<double>{-0.5, 0.0});

  ScriptedTransport t({{200, "{}"}});
  std::vector<double> waits;
  CHECK(error_of([&] { chat_complete(t, Endpoint{"http://h", ""}, simple_request(), recorded_waits(waits)); }) ==
        Errc::MalformedResponse);
}

TEST_CASE("request validation") {
  CompletionRequest r;
  r.model = "m";
  CHECK(error_of([&] { r.validate(); }) == Errc::InvalidArgument);
  r.messages.push_back({"user", "x"});
  r.max_tokens = 0;
  CHECK(error_of([&] { r.validate(); }) == Errc::InvalidArgument);
}

TEST_CASE("request digest is stable and sensitive to sampling settings") {
  const auto a = simple_request();
  auto b = simple_request();
  CHECK(request_digest(a) == request_digest(b));
  CHECK(request_digest(a).size() == 64);
  b.temperature = 0.7;
  CHECK(request_digest(a) != request_digest(b));
  auto c = simple_request("other");
  CHECK(request_digest(a) != request_digest(c));
  auto d = simple_request();
  d.seed = 5;
  CHECK(request_digest(a) == request_digest(d));
}

TEST_CASE("cassette round trip and replay") {
  EchoClient echo;
  RecordingClient rec(echo);
  ModelSpec model;
  model.name = "tiny";
  const auto r1 = rec.complete(model, simple_request("one"));
  rec.complete(model, simple_request("two"));
  rec.complete(model, simple_request("one"));
  CHECK(rec.cassette().size() == 2);

  crtest::TempDir dir("cassette");
  rec.save(dir / "c.jsonl");
  const auto loaded = Cassette::load(dir / "c.jsonl");
  CHECK(loaded.size() == 2);
  CHECK(loaded.serialize() == rec.cassette().serialize());

  ReplayClient replay(loaded);
  const auto back = replay.complete(model, simple_request("one"));
  CHECK(back.content == r1.content);
  CHECK(back.usage.prompt_tokens == r1.usage.prompt_tokens);
  CHECK(error_of([&] { replay.complete(model, simple_request("three")); }) == Errc::CassetteMiss);

  CHECK(error_of([] { Cassette::parse("{bad\n", "x"); }) == Errc::CorruptCassette);
  CHECK(error_of([] { Cassette::parse(R"({"digest": "d"})", "x"); }) == Errc::CorruptCassette);
  CHECK(error_of([&] { Cassette::load(dir / "missing.jsonl"); }) == Errc::CorruptCassette);
}

TEST_CASE("live client resolves endpoints and keys") {
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{200, ok_body("hi")}});
  LiveClient::Options opts;
  opts.env = [](const std::string& name) -> std::optional<std::string> {
    if (name == "GOOD_KEY") return std::string("secret");
    return std::nullopt;
  };
  LiveClient live(t, opts);
  ModelSpec model;
  model.name = "remote";
  model.endpoint = "http://api.example/v1";
  model.api_key_env = "MISSING_KEY";
  CHECK(error_of([&] { live.complete(model, simple_request()); }) == Errc::AuthError);
  CHECK(t->urls.empty());
  model.api_key_env = "GOOD_KEY";
  CHECK(live.complete(model, simple_request()).content == "hi");
  CHECK(t->urls.back() == "http://api.example/v1/chat/completions");

  model.endpoint.clear();
  CHECK(error_of([&] { live.complete(model, simple_request()); }) == Errc::InvalidConfig);
  CHECK(error_of([] { LiveClient(nullptr, LiveClient::Options{}); }) == Errc::InvalidArgument);
}

TEST_CASE("plan parsing") {
  CHECK(parse_plan("1. First step\n2) Second step\n\n- third\n* fourth\nnoise\n3.\n") ==
        std::vector<std::string>{"First step", "Second step", "third", "fourth"});
  CHECK(parse_plan("no list here").empty());
}

TEST_CASE("llm adapters map failures to their error kinds") {
  class Failing final : public ChatClient {
   public:
    CompletionResponse complete(const ModelSpec&, const CompletionRequest&) const override {
      fail(Errc::TimeoutExhausted, "down");
    }
  } failing;
  ModelSpec model;
  model.name = "m";
  LlmCoherenceJudge judge(failing, model);
  CHECK(error_of([&] { judge.unrelated("t", "a", "b"); }) == Errc::JudgeUnavailable);
  LlmDecompositionGenerator gen(failing, model);
  TaskRecord task{"t", "task", "gt", ""};
  CHECK(error_of([&] { gen.generate(task, 2); }) == Errc::GeneratorFailure);

  EchoClient echo;
  LlmTokenProbSource probs(echo, model);
  auto d = make_decomposition("t", {"a"});
  CHECK(error_of([&] { probs.token_probs(task, d.subtasks[0]); }) == Errc::EmptyProbSequence);
}

TEST_CASE("http transport talks to a local server") {
  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const std::string content = body["messages"][0]["content"].get<std::string>();
    res.set_content(ok_body("echo " + content, 7, 2), "application/json");
  });
  server.Post("/v1/fail/chat/completions",
              [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpTransport transport;
  RetryPolicy retry;
  retry.max_retries = 0;
  retry.timeout_s = 5;
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  const auto res = chat_complete(transport, Endpoint{base + "/v1", ""}, simple_request("ping"), retry);
  CHECK(res.content == "echo ping");
  CHECK(res.usage.prompt_tokens == 7);
  CHECK(error_of([&] { chat_complete(transport, Endpoint{base + "/v1/fail", ""}, simple_request(), retry); }) ==
        Errc::AuthError);
  server.stop();
  th.join();

  CHECK(error_of([&] { chat_complete(transport, Endpoint{base + "/v1", ""}, simple_request(), retry); }) ==
        Errc::TimeoutExhausted);
  CHECK(error_of([&] { transport.post("no-scheme", {}, "", 1.0); }) == Errc::InvalidArgument);
}
