#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "costroute/interfaces.hpp"
#include "costroute/io.hpp"
#include "costroute/model_pool.hpp"

namespace costroute {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct CompletionRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  int max_tokens = 512;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  bool logprobs = false;

  void validate() const;
};

struct CompletionResponse {
  std::string content;
  TokenUsage usage;
  std::string model;
  double latency_ms = 0.0;
  /// Per-token log-probabilities when requested and returned.
  std::vector<double> token_logprobs;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Throws Errc::TransportError when no response arrives (refused, timed out).
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const Headers& headers, const std::string& body,
                            double timeout_s) = 0;
};

/// HTTP(S) transport.
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const Headers& headers, const std::string& body,
                    double timeout_s) override;
};

struct RetryPolicy {
  int max_retries = 3;
  double initial_backoff_ms = 250.0;
  double multiplier = 2.0;
  double max_backoff_ms = 8000.0;
  double timeout_s = 120.0;
  /// Waits the given milliseconds; defaults to sleeping the calling thread.
  std::function<void(double)> sleeper;

  double backoff_ms(int retry) const;
};

struct Endpoint {
  /// Base URL; requests go to <url>/chat/completions.
  std::string url;
  std::string api_key;
};

/// Wire body of the request.
ordered_json request_to_json(const CompletionRequest& req);

/// Hex SHA-256 of the canonical JSON of model, messages, max_tokens and temperature.
std::string request_digest(const CompletionRequest& req);

CompletionResponse parse_completion(std::string_view body);

ordered_json response_to_json(const CompletionResponse& res);
CompletionResponse response_from_json(const nlohmann::json& j);

/// Sends the request, retrying rate limits, server errors and transport
/// failures with exponential backoff. Latency covers every attempt and wait.
CompletionResponse chat_complete(Transport& transport, const Endpoint& endpoint, const CompletionRequest& req,
                                 const RetryPolicy& retry);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual CompletionResponse complete(const ModelSpec& model, const CompletionRequest& req) const = 0;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

std::optional<std::string> getenv_lookup(const std::string& name);

class LiveClient final : public ChatClient {
 public:
  struct Options {
    RetryPolicy retry;
    /// Replaces every model's configured endpoint when non-empty.
    std::string endpoint_override;
    /// Concurrent requests per endpoint; 0 means unlimited.
    std::size_t max_concurrent_per_endpoint = 0;
    EnvLookup env = getenv_lookup;
  };

  LiveClient(std::shared_ptr<Transport> transport, Options options);
  CompletionResponse complete(const ModelSpec& model, const CompletionRequest& req) const override;

 private:
  std::shared_ptr<Transport> transport_;
  Options options_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  mutable std::map<std::string, std::size_t> in_flight_;
};

struct CassetteEntry {
  std::string digest;
  ordered_json request;
  CompletionResponse response;
};

class Cassette {
 public:
  Cassette() = default;
  static Cassette load(const std::filesystem::path& path);
  static Cassette parse(std::string_view text, std::string_view source_name);

  const CompletionResponse* find(const std::string& digest) const;
  void add(CassetteEntry entry);
  std::size_t size() const noexcept { return entries_.size(); }
  /// JSONL ordered by digest.
  std::string serialize() const;

 private:
  std::map<std::string, CassetteEntry> entries_;
};

class ReplayClient final : public ChatClient {
 public:
  explicit ReplayClient(Cassette cassette) : cassette_(std::move(cassette)) {}
  CompletionResponse complete(const ModelSpec& model, const CompletionRequest& req) const override;

 private:
  Cassette cassette_;
};

/// Forwards to `inner` and remembers every exchange.
class RecordingClient final : public ChatClient {
 public:
  explicit RecordingClient(const ChatClient& inner) : inner_(&inner) {}
  CompletionResponse complete(const ModelSpec& model, const CompletionRequest& req) const override;
  Cassette cassette() const;
  void save(const std::filesystem::path& path) const;

 private:
  const ChatClient* inner_;
  mutable std::mutex mutex_;
  mutable Cassette recorded_;
};

/// Executes steps by prompting pool models; review asks the strong model to
/// answer CORRECT or give a corrected result.
class LlmExecutor final : public SubtaskExecutor {
 public:
  LlmExecutor(const ChatClient& client, const ModelPool& pool, int max_tokens = 512)
      : client_(&client), pool_(&pool), max_tokens_(max_tokens) {}
  StepResult execute(const StepRequest& request) const override;
  ReviewResult review(const StepRequest& request, std::string_view candidate, int strong_model_id) const override;

 private:
  const ChatClient* client_;
  const ModelPool* pool_;
  int max_tokens_;
};

/// Samples numbered plans from one model and parses them into subtasks.
class LlmDecompositionGenerator final : public DecompositionGenerator {
 public:
  LlmDecompositionGenerator(const ChatClient& client, const ModelSpec& model, double temperature = 0.7)
      : client_(&client), model_(model), temperature_(temperature) {}
  std::vector<Decomposition> generate(const TaskRecord& task, std::size_t m) const override;

 private:
  const ChatClient* client_;
  ModelSpec model_;
  double temperature_;
};

/// Parses "1. ..." / "- ..." lines of a plan into subtask texts.
std::vector<std::string> parse_plan(std::string_view text);

class LlmTokenProbSource final : public TokenProbSource {
 public:
  LlmTokenProbSource(const ChatClient& client, const ModelSpec& model) : client_(&client), model_(model) {}
  std::vector<double> token_probs(const TaskRecord& task, const Subtask& subtask) const override;

 private:
  const ChatClient* client_;
  ModelSpec model_;
};

class LlmCoherenceJudge final : public CoherenceJudge {
 public:
  LlmCoherenceJudge(const ChatClient& client, const ModelSpec& model) : client_(&client), model_(model) {}
  bool unrelated(std::string_view task_text, std::string_view first, std::string_view second) const override;

 private:
  const ChatClient* client_;
  ModelSpec model_;
};

}  // namespace costroute
