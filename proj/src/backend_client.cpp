#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "costroute/backend_client.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "costroute/error.hpp"
#include "costroute/log.hpp"

namespace costroute {

void CompletionRequest::validate() const {
  if (messages.empty()) fail(Errc::InvalidArgument, "completion request needs at least one message");
  if (max_tokens <= 0) fail(Errc::InvalidArgument, "max_tokens must be positive");
}

HttpResponse HttpTransport::post(const std::string& url, const Headers& headers, const std::string& body,
                                 double timeout_s) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(Errc::InvalidArgument, "endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) fail(Errc::TransportError, "POST " + url + ": " + httplib::to_string(res.error()));
  return HttpResponse{res->status, res->body};
}

double RetryPolicy::backoff_ms(int retry) const {
  return std::min(max_backoff_ms, initial_backoff_ms * std::pow(multiplier, retry));
}

ordered_json request_to_json(const CompletionRequest& req) {
  ordered_json j;
  j["model"] = req.model;
  ordered_json msgs = ordered_json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  j["messages"] = std::move(msgs);
  j["max_tokens"] = req.max_tokens;
  j["temperature"] = req.temperature;
  if (req.seed) j["seed"] = *req.seed;
  if (req.logprobs) j["logprobs"] = true;
  return j;
}

std::string request_digest(const CompletionRequest& req) {
  ordered_json j;
  j["model"] = req.model;
  ordered_json msgs = ordered_json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  j["messages"] = std::move(msgs);
  j["max_tokens"] = req.max_tokens;
  j["temperature"] = req.temperature;
  const std::string canonical = j.dump();

  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    fail(Errc::InvalidArgument, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

CompletionResponse parse_completion(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  CompletionResponse res;
  try {
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    res.content = content.is_null() ? std::string() : content.get<std::string>();
    const auto& usage = j.at("usage");
    res.usage.prompt_tokens = usage.at("prompt_tokens").get<std::int64_t>();
    res.usage.completion_tokens = usage.at("completion_tokens").get<std::int64_t>();
    if (j.contains("model") && j["model"].is_string()) res.model = j["model"].get<std::string>();
    if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content")) {
      for (const auto& tok : choice["logprobs"]["content"]) res.token_logprobs.push_back(tok.at("logprob").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::MalformedResponse, std::string("unexpected response shape: ") + e.what());
  }
  if (res.usage.prompt_tokens < 0 || res.usage.completion_tokens < 0) {
    fail(Errc::MalformedResponse, "negative token usage in response");
  }
  return res;
}

ordered_json response_to_json(const CompletionResponse& res) {
  ordered_json j;
  j["content"] = res.content;
  j["usage"] = {{"prompt_tokens", res.usage.prompt_tokens}, {"completion_tokens", res.usage.completion_tokens}};
  j["model"] = res.model;
  j["latency_ms"] = res.latency_ms;
  if (!res.token_logprobs.empty()) j["token_logprobs"] = res.token_logprobs;
  return j;
}

CompletionResponse response_from_json(const nlohmann::json& j) {
  CompletionResponse res;
  res.content = j.at("content").get<std::string>();
  res.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<std::int64_t>();
  res.usage.completion_tokens = j.at("usage").at("completion_tokens").get<std::int64_t>();
  res.model = j.value("model", std::string());
  res.latency_ms = j.value("latency_ms", 0.0);
  if (j.contains("token_logprobs")) res.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
  return res;
}

CompletionResponse chat_complete(Transport& transport, const Endpoint& endpoint, const CompletionRequest& req,
                                 const RetryPolicy& retry) {
  req.validate();
  std::string url = endpoint.url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";
  Headers headers{{"Content-Type", "application/json"}};
  if (!endpoint.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + endpoint.api_key);
  const std::string body = request_to_json(req).dump();

  double latency = 0.0;
  Errc last_code = Errc::TimeoutExhausted;
  std::string last_message;
  for (int attempt = 0;; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    std::optional<HttpResponse> res;
    try {
      res = transport.post(url, headers, body, retry.timeout_s);
    } catch (const Error& e) {
      if (e.code() != Errc::TransportError) throw;
      last_code = Errc::TimeoutExhausted;
      last_message = e.what();
    }
    latency += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    if (res) {
      if (res->status == 401 || res->status == 403) {
        fail(Errc::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
      }
      if (res->status >= 200 && res->status < 300) {
        auto out = parse_completion(res->body);
        out.latency_ms = latency;
        if (out.model.empty()) out.model = req.model;
        return out;
      }
      if (res->status == 429) {
        last_code = Errc::RateLimited;
      } else if (res->status >= 500 || res->status == 408) {
        last_code = Errc::TimeoutExhausted;
      } else {
        fail(Errc::TransportError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
      }
      last_message = "HTTP " + std::to_string(res->status);
    }

    if (attempt >= retry.max_retries) {
      fail(last_code, last_message + " after " + std::to_string(attempt + 1) + " attempts");
    }
    const double wait = retry.backoff_ms(attempt);
    log_info("retrying " + req.model + " in " + std::to_string(wait) + " ms (" + last_message + ")");
    if (retry.sleeper) {
      retry.sleeper(wait);
    } else {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(wait));
    }
    latency += wait;
  }
}

std::optional<std::string> getenv_lookup(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

LiveClient::LiveClient(std::shared_ptr<Transport> transport, Options options)
    : transport_(std::move(transport)), options_(std::move(options)) {
  if (!transport_) fail(Errc::InvalidArgument, "live client needs a transport");
}

CompletionResponse LiveClient::complete(const ModelSpec& model, const CompletionRequest& req) const {
  Endpoint ep;
  ep.url = options_.endpoint_override.empty() ? model.endpoint : options_.endpoint_override;
  if (ep.url.empty()) fail(Errc::InvalidConfig, "model " + model.name + " has no endpoint");
  if (!model.api_key_env.empty()) {
    auto key = options_.env ? options_.env(model.api_key_env) : std::nullopt;
    if (!key) fail(Errc::AuthError, "environment variable " + model.api_key_env + " is not set");
    ep.api_key = *key;
  }

  const std::size_t cap = options_.max_concurrent_per_endpoint;
  if (cap > 0) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_[ep.url] < cap; });
    ++in_flight_[ep.url];
  }
  struct Release {
    const LiveClient* self;
    const std::string& url;
    bool active;
    ~Release() {
      if (!active) return;
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_[url];
      }
      self->cv_.notify_all();
    }
  } release{this, ep.url, cap > 0};

  return chat_complete(*transport_, ep, req, options_.retry);
}

Cassette Cassette::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    fail(Errc::CorruptCassette, e.what());
  }
  return parse(text, path.string());
}

Cassette Cassette::parse(std::string_view text, std::string_view source_name) {
  Cassette c;
  std::vector<ordered_json> rows;
  try {
    rows = parse_jsonl_ordered(text, source_name);
  } catch (const Error& e) {
    fail(Errc::CorruptCassette, e.what());
  }
  for (const auto& row : rows) {
    try {
      CassetteEntry entry;
      entry.digest = row.at("digest").get<std::string>();
      entry.request = row.at("request");
      entry.response = response_from_json(nlohmann::json::parse(row.at("response").dump()));
      c.add(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::CorruptCassette, std::string(source_name) + ": " + e.what());
    }
  }
  return c;
}

const CompletionResponse* Cassette::find(const std::string& digest) const {
  auto it = entries_.find(digest);
  return it == entries_.end() ? nullptr : &it->second.response;
}

void Cassette::add(CassetteEntry entry) {
  auto digest = entry.digest;
  entries_.insert_or_assign(std::move(digest), std::move(entry));
}

std::string Cassette::serialize() const {
  std::vector<ordered_json> rows;
  for (const auto& [digest, e] : entries_) {
    ordered_json row;
    row["digest"] = digest;
    row["request"] = e.request;
    row["response"] = response_to_json(e.response);
    rows.push_back(std::move(row));
  }
  return to_jsonl(rows);
}

CompletionResponse ReplayClient::complete(const ModelSpec&, const CompletionRequest& req) const {
  req.validate();
  const auto digest = request_digest(req);
  if (const auto* res = cassette_.find(digest)) return *res;
  fail(Errc::CassetteMiss, "no recorded response for request " + digest.substr(0, 12) + " to " + req.model);
}

CompletionResponse RecordingClient::complete(const ModelSpec& model, const CompletionRequest& req) const {
  auto res = inner_->complete(model, req);
  std::lock_guard lock(mutex_);
  recorded_.add(CassetteEntry{request_digest(req), request_to_json(req), res});
  return res;
}

Cassette RecordingClient::cassette() const {
  std::lock_guard lock(mutex_);
  return recorded_;
}

void RecordingClient::save(const std::filesystem::path& path) const { write_file_atomic(path, cassette().serialize()); }

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

CompletionRequest step_request(const StepRequest& req, const std::string& model_name, int max_tokens) {
  CompletionRequest c;
  c.model = model_name;
  c.max_tokens = max_tokens;
  c.messages.push_back({"system",
                        "You are solving one step of a multi-step task. Use the previous result when one is given. "
                        "Reply with the result of the current step only."});
  c.messages.push_back({"user", "Task: " + req.task->text + "\nPrevious result: " +
                                    (req.upstream.empty() ? std::string("(none)") : req.upstream) +
                                    "\nCurrent step: " + req.subtask->text});
  return c;
}

}  // namespace

StepResult LlmExecutor::execute(const StepRequest& request) const {
  const auto& model = pool_->at(request.model_id);
  const auto res = client_->complete(model, step_request(request, model.name, max_tokens_));
  return StepResult{trim(res.content), res.usage, res.latency_ms};
}

ReviewResult LlmExecutor::review(const StepRequest& request, std::string_view candidate, int strong_model_id) const {
  const auto& strong = pool_->at(strong_model_id);
  CompletionRequest c = step_request(request, strong.name, max_tokens_);
  c.messages[0].content =
      "You review one step of a multi-step task. If the candidate result is correct reply exactly CORRECT. "
      "Otherwise reply with the corrected result only.";
  c.messages[1].content += "\nCandidate result: " + std::string(candidate);
  try {
    const auto res = client_->complete(strong, c);
    const auto verdict = trim(res.content);
    ReviewResult out;
    out.usage = res.usage;
    out.latency_ms = res.latency_ms;
    out.corrected = verdict != "CORRECT" && !verdict.empty();
    out.output = out.corrected ? verdict : std::string(candidate);
    return out;
  } catch (const Error& e) {
    fail(Errc::StrongModelFailure, e.what());
  }
}

std::vector<std::string> parse_plan(std::string_view text) {
  std::vector<std::string> steps;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) {
      steps.push_back(trim(std::string_view(t).substr(i + 1)));
    } else if (t[0] == '-' || t[0] == '*') {
      steps.push_back(trim(std::string_view(t).substr(1)));
    }
  }
  std::erase_if(steps, [](const std::string& s) { return s.empty(); });
  return steps;
}

std::vector<Decomposition> LlmDecompositionGenerator::generate(const TaskRecord& task, std::size_t m) const {
  std::vector<Decomposition> out;
  for (std::size_t i = 0; i < m; ++i) {
    CompletionRequest c;
    c.model = model_.name;
    c.temperature = temperature_;
    c.seed = static_cast<std::int64_t>(i);
    c.messages.push_back({"system",
                          "Break the task into a short ordered list of dependent subtasks. Each subtask may use the "
                          "result of the previous one. Reply with a numbered list only."});
    c.messages.push_back({"user", "Task: " + task.text + "\nPlan variant: " + std::to_string(i + 1)});
    std::vector<std::string> steps;
    try {
      steps = parse_plan(client_->complete(model_, c).content);
    } catch (const Error& e) {
      fail(Errc::GeneratorFailure, e.what());
    }
    if (steps.empty()) fail(Errc::GeneratorFailure, "plan for " + task.task_id + " has no steps");
    auto d = make_decomposition(task.task_id, steps);
    d.generation_order = i;
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<double> LlmTokenProbSource::token_probs(const TaskRecord& task, const Subtask& subtask) const {
  CompletionRequest c;
  c.model = model_.name;
  c.max_tokens = 64;
  c.logprobs = true;
  c.messages.push_back({"user", "Task: " + task.text + "\nSolve this step: " + subtask.text});
  const auto res = client_->complete(model_, c);
  if (res.token_logprobs.empty()) fail(Errc::EmptyProbSequence, "probe model returned no log-probabilities");
  std::vector<double> probs;
  probs.reserve(res.token_logprobs.size());
  for (double lp : res.token_logprobs) probs.push_back(std::clamp(std::exp(lp), 0.0, 1.0));
  return probs;
}

bool LlmCoherenceJudge::unrelated(std::string_view task_text, std::string_view first, std::string_view second) const {
  CompletionRequest c;
  c.model = model_.name;
  c.max_tokens = 4;
  c.messages.push_back({"user", "Task: " + std::string(task_text) + "\nStep A: " + std::string(first) +
                                    "\nStep B: " + std::string(second) +
                                    "\nIs there a logical connection from step A to step B? Answer YES or NO."});
  try {
    const auto verdict = trim(client_->complete(model_, c).content);
    return verdict.rfind("NO", 0) == 0 || verdict.rfind("No", 0) == 0 || verdict.rfind("no", 0) == 0;
  } catch (const Error& e) {
    fail(Errc::JudgeUnavailable, e.what());
  }
}

}  // namespace costroute
