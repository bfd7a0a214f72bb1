#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace recgpt::generation {

enum class DecodingMode { kSampling, kBeam };

// Sampling mode ignores beam_size; beam mode ignores temperature, top_p and
// top_k.
struct DecodingParams {
  DecodingMode mode = DecodingMode::kSampling;
  double temperature = 1.0;
  double top_p = 0.9;
  int top_k = 50;
  int beam_size = 10;
  int max_new_tokens = 16;

  // Throws kInvalidParams.
  void validate() const;
  std::size_t expected_outputs() const {
    return mode == DecodingMode::kBeam ? static_cast<std::size_t>(beam_size) : 1;
  }
};

inline constexpr int kRatingMaxNewTokens = 16;
inline constexpr int kSeqrecMaxNewTokens = 64;

// Temperature 1.0, top-p 0.9, top-k 50.
DecodingParams sampling_params(int max_new_tokens = kRatingMaxNewTokens);
// Beam size 10 unless overridden.
DecodingParams beam_params(int beam_size = 10, int max_new_tokens = kSeqrecMaxNewTokens);

// "beam", "beam:<size>", "sampling" or
// "sampling:temperature=<t>,top_p=<p>,top_k=<k>".
DecodingParams parse_params(const std::string& text, int max_new_tokens);

// Wire request {prompt, decoding: {...}}; only the fields the mode uses are
// serialized.
nlohmann::json request_json(const std::string& prompt, const DecodingParams& params);

struct Output {
  std::string text;
  double score = 0.0;

  bool operator==(const Output&) const = default;
};

struct GenerationResult {
  std::vector<Output> outputs;
  std::string backend_id;
  std::chrono::microseconds latency{0};
  // Beam mode returned fewer outputs than beam_size.
  bool truncated = false;
};

// Minimal completion contract. Implementations must be thread-safe.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual std::vector<Output> complete(const std::string& prompt, const DecodingParams& params) = 0;
};

// Validates inputs, calls the backend, orders outputs by descending score and
// flags truncation. `run_id` tags the debug log lines.
GenerationResult generate(const std::string& prompt, const DecodingParams& params,
                          Backend& backend, const std::string& run_id = "");

// ---------------------------------------------------------------------------
// HTTP

struct HttpResponse {
  int status = 0;
  std::string body;
};

class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, bool timed_out)
      : std::runtime_error(what), timed_out_(timed_out) {}
  bool timed_out() const noexcept { return timed_out_; }

 private:
  bool timed_out_;
};

using Headers = std::map<std::string, std::string>;

// Moves one POST to the service; throws TransportError when no HTTP response
// arrives.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const Headers& headers, std::chrono::milliseconds timeout) = 0;
};

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // defaults to "/"
};

Endpoint parse_endpoint(const std::string& url);

class HttpLibTransport final : public Transport {
 public:
  explicit HttpLibTransport(std::string base_url);
  HttpResponse post(const std::string& path, const std::string& body, const Headers& headers,
                    std::chrono::milliseconds timeout) override;

 private:
  std::string base_url_;
};

struct HttpBackendConfig {
  std::string url;
  // Environment variable holding a bearer token; empty for none.
  std::string auth_token_env;
  std::chrono::milliseconds timeout{30000};
  int retries = 3;
  std::chrono::milliseconds backoff_base{200};
  std::chrono::milliseconds backoff_max{5000};
};

// Posts request_json() and expects {"outputs": [{"text", "score"}]}.
// Transport failures, 429 and 5xx are retried with exponential backoff;
// other non-2xx statuses throw kBackendRejected at once.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config, std::unique_ptr<Transport> transport = nullptr);
  std::string id() const override { return "http:" + config_.url; }
  std::vector<Output> complete(const std::string& prompt, const DecodingParams& params) override;

 private:
  HttpBackendConfig config_;
  Endpoint endpoint_;
  std::unique_ptr<Transport> transport_;
};

// ---------------------------------------------------------------------------
// Mock

struct MockConfig {
  std::uint64_t seed = 0;
  // Probability that a prompt with a known answer gets it among its outputs.
  // 1 and 0 are exact.
  double hit_rate = 1.0;
  // prompt -> ground-truth response text.
  std::unordered_map<std::string, std::string> answers;
  // Pool of wrong responses to draw from.
  std::vector<std::string> distractors;
  // Prompts that always fail with kBackendRejected.
  std::set<std::string> failing_prompts;
  // Upper bound for a per-prompt hashed sleep, to shuffle completion order.
  std::chrono::microseconds max_delay{0};
};

// Pure function of (prompt, seed, params). A hit puts the answer at a hashed
// beam position; remaining slots are distinct distractors. Scores strictly
// decrease.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockConfig config);
  std::string id() const override { return "mock"; }
  std::vector<Output> complete(const std::string& prompt, const DecodingParams& params) override;

  bool is_hit(const std::string& prompt) const;
  std::size_t max_in_flight_observed() const { return max_in_flight_; }
  std::size_t calls() const { return calls_; }

 private:
  MockConfig config_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Batch

struct PromptRequest {
  std::string id;
  std::string prompt;
};

struct BatchRecord {
  std::string prompt_id;
  std::optional<GenerationResult> result;
  std::string error;  // set when result is empty
};

// At most `max_in_flight` concurrent backend calls; records come back in
// input order and a failing prompt yields an error record.
std::vector<BatchRecord> run_batch(std::span<const PromptRequest> prompts,
                                   const DecodingParams& params, Backend& backend,
                                   std::size_t max_in_flight, const std::string& run_id = "");

}  // namespace recgpt::generation
