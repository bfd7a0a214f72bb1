#include "recgpt/generation.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "recgpt/error.hpp"
#include "recgpt/hashing.hpp"
#include "recgpt/log.hpp"

namespace recgpt::generation {

namespace {

std::uint64_t prompt_hash(const std::string& prompt, std::uint64_t seed, std::string_view salt) {
  return stable_hash64(salt, stable_hash64(prompt, seed));
}

}  // namespace

void DecodingParams::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInvalidParams, why); };
  if (max_new_tokens <= 0) fail("max_new_tokens must be positive");
  if (mode == DecodingMode::kBeam) {
    if (beam_size <= 0) fail("beam_size must be positive");
  } else {
    if (!(temperature >= 0.0)) fail("temperature must be non-negative");
    if (!(top_p > 0.0 && top_p <= 1.0)) fail("top_p must lie in (0, 1]");
    if (top_k <= 0) fail("top_k must be positive");
  }
}

DecodingParams sampling_params(int max_new_tokens) {
  DecodingParams p;
  p.mode = DecodingMode::kSampling;
  p.temperature = 1.0;
  p.top_p = 0.9;
  p.top_k = 50;
  p.max_new_tokens = max_new_tokens;
  return p;
}

DecodingParams beam_params(int beam_size, int max_new_tokens) {
  DecodingParams p;
  p.mode = DecodingMode::kBeam;
  p.beam_size = beam_size;
  p.max_new_tokens = max_new_tokens;
  return p;
}

DecodingParams parse_params(const std::string& text, int max_new_tokens) {
  const auto colon = text.find(':');
  const std::string mode = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  DecodingParams p;
  try {
    if (mode == "beam") {
      p = beam_params(10, max_new_tokens);
      if (!rest.empty()) p.beam_size = std::stoi(rest);
    } else if (mode == "sampling") {
      p = sampling_params(max_new_tokens);
      std::stringstream in(rest);
      std::string kv;
      while (std::getline(in, kv, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::kInvalidParams, "expected key=value");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (key == "temperature") {
          p.temperature = std::stod(value);
        } else if (key == "top_p") {
          p.top_p = std::stod(value);
        } else if (key == "top_k") {
          p.top_k = std::stoi(value);
        } else {
          throw Error(ErrorCode::kInvalidParams, "unknown sampling key " + key);
        }
      }
    } else {
      throw Error(ErrorCode::kInvalidParams, "unknown decoding mode '" + mode + "'");
    }
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::kInvalidParams, "cannot parse '" + text + "': " + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json request_json(const std::string& prompt, const DecodingParams& params) {
  nlohmann::json decoding;
  if (params.mode == DecodingMode::kBeam) {
    decoding = {{"mode", "beam"},
                {"beam_size", params.beam_size},
                {"max_new_tokens", params.max_new_tokens}};
  } else {
    decoding = {{"mode", "sampling"},
                {"temperature", params.temperature},
                {"top_p", params.top_p},
                {"top_k", params.top_k},
                {"max_new_tokens", params.max_new_tokens}};
  }
  return {{"prompt", prompt}, {"decoding", decoding}};
}

GenerationResult generate(const std::string& prompt, const DecodingParams& params,
                          Backend& backend, const std::string& run_id) {
  if (prompt.empty()) throw Error(ErrorCode::kInvalidParams, "empty prompt");
  params.validate();
  const auto start = std::chrono::steady_clock::now();
  GenerationResult result;
  result.outputs = backend.complete(prompt, params);
  result.latency = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - start);
  result.backend_id = backend.id();

  std::stable_sort(result.outputs.begin(), result.outputs.end(),
                   [](const Output& a, const Output& b) { return a.score > b.score; });
  const std::size_t expected = params.expected_outputs();
  if (result.outputs.size() > expected) result.outputs.resize(expected);
  result.truncated = params.mode == DecodingMode::kBeam && result.outputs.size() < expected;
  if (params.mode == DecodingMode::kSampling && result.outputs.empty()) {
    throw Error(ErrorCode::kBackendRejected, "backend returned no sample");
  }
  if (log::level() <= log::Level::kDebug) {
    log::debug("run " + run_id + " backend " + result.backend_id + " request " +
               request_json(prompt, params).dump() + " -> " +
               std::to_string(result.outputs.size()) + " outputs");
  }
  return result;
}

// ---------------------------------------------------------------------------

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::kInvalidConfig, "bad endpoint url " + url);
  const auto slash = url.find('/', scheme + 3);
  Endpoint e;
  e.base = url.substr(0, slash);
  e.path = slash == std::string::npos ? "/" : url.substr(slash);
  return e;
}

HttpLibTransport::HttpLibTransport(std::string base_url) : base_url_(std::move(base_url)) {}

HttpResponse HttpLibTransport::post(const std::string& path, const std::string& body,
                                    const Headers& headers, std::chrono::milliseconds timeout) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h(headers.begin(), headers.end());
  auto res = client.Post(path, h, body, "application/json");
  if (!res) {
    const auto err = res.error();
    throw TransportError(httplib::to_string(err),
                         err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout);
  }
  return {res->status, res->body};
}

HttpBackend::HttpBackend(HttpBackendConfig config, std::unique_ptr<Transport> transport)
    : config_(std::move(config)), endpoint_(parse_endpoint(config_.url)),
      transport_(std::move(transport)) {
  if (!transport_) transport_ = std::make_unique<HttpLibTransport>(endpoint_.base);
  if (config_.retries < 0) throw Error(ErrorCode::kInvalidConfig, "retries must be >= 0");
}

std::vector<Output> HttpBackend::complete(const std::string& prompt, const DecodingParams& params) {
  Headers headers;
  if (!config_.auth_token_env.empty()) {
    if (const char* token = std::getenv(config_.auth_token_env.c_str())) {
      headers["Authorization"] = std::string("Bearer ") + token;
    }
  }
  const std::string body = request_json(prompt, params).dump();

  std::string last_error;
  bool last_timed_out = false;
  auto backoff = config_.backoff_base;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, config_.backoff_max);
    }
    HttpResponse response;
    try {
      response = transport_->post(endpoint_.path, body, headers, config_.timeout);
    } catch (const TransportError& e) {
      last_error = e.what();
      last_timed_out = e.timed_out();
      log::warn("generation request failed (attempt " + std::to_string(attempt + 1) + "): " +
                last_error);
      continue;
    }
    if (response.status == 429 || response.status >= 500) {
      last_error = "status " + std::to_string(response.status);
      last_timed_out = false;
      continue;
    }
    if (response.status < 200 || response.status >= 300) {
      throw Error(ErrorCode::kBackendRejected, response.body, response.status);
    }
    std::vector<Output> outputs;
    try {
      const auto parsed = nlohmann::json::parse(response.body);
      for (const auto& o : parsed.at("outputs")) {
        outputs.push_back({o.at("text").get<std::string>(), o.at("score").get<double>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kBackendRejected, std::string("malformed response: ") + e.what(),
                  response.status);
    }
    return outputs;
  }
  const std::string why = config_.url + " after " + std::to_string(config_.retries + 1) +
                          " attempts: " + last_error;
  if (last_timed_out) throw Error(ErrorCode::kTimeout, why);
  throw Error(ErrorCode::kBackendUnreachable, why);
}

// ---------------------------------------------------------------------------

MockBackend::MockBackend(MockConfig config) : config_(std::move(config)) {}

bool MockBackend::is_hit(const std::string& prompt) const {
  if (!config_.answers.contains(prompt)) return false;
  if (config_.hit_rate >= 1.0) return true;
  if (config_.hit_rate <= 0.0) return false;
  return unit_interval(prompt_hash(prompt, config_.seed, "hit")) < config_.hit_rate;
}

std::vector<Output> MockBackend::complete(const std::string& prompt, const DecodingParams& params) {
  ++calls_;
  const std::size_t now = ++in_flight_;
  for (std::size_t seen = max_in_flight_; now > seen && !max_in_flight_.compare_exchange_weak(seen, now);) {
  }
  struct Leave {
    std::atomic<std::size_t>& counter;
    ~Leave() { --counter; }
  } leave{in_flight_};

  if (config_.max_delay.count() > 0) {
    const auto span = static_cast<std::uint64_t>(config_.max_delay.count());
    std::this_thread::sleep_for(
        std::chrono::microseconds(prompt_hash(prompt, config_.seed, "delay") % (span + 1)));
  }
  if (config_.failing_prompts.contains(prompt)) {
    throw Error(ErrorCode::kBackendRejected, "mock configured to fail this prompt", 400);
  }

  const std::size_t want = params.expected_outputs();
  auto answer = config_.answers.find(prompt);
  const std::string* truth = answer == config_.answers.end() ? nullptr : &answer->second;
  const bool hit = is_hit(prompt);

  std::vector<std::string> texts;
  const auto& pool = config_.distractors;
  if (!pool.empty()) {
    const std::size_t start = prompt_hash(prompt, config_.seed, "start") % pool.size();
    for (std::size_t i = 0; i < pool.size() && texts.size() + (hit ? 1 : 0) < want; ++i) {
      const std::string& candidate = pool[(start + i) % pool.size()];
      if (truth != nullptr && candidate == *truth) continue;
      if (std::find(texts.begin(), texts.end(), candidate) != texts.end()) continue;
      texts.push_back(candidate);
    }
  }
  if (hit) {
    const std::size_t slot = prompt_hash(prompt, config_.seed, "rank") % (texts.size() + 1);
    texts.insert(texts.begin() + static_cast<std::ptrdiff_t>(slot), *truth);
  }

  std::vector<Output> outputs;
  double score = 0.0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    score -= 0.1 + 0.4 * unit_interval(prompt_hash(prompt, config_.seed + i, "score"));
    outputs.push_back({texts[i], score});
  }
  return outputs;
}

// ---------------------------------------------------------------------------

std::vector<BatchRecord> run_batch(std::span<const PromptRequest> prompts,
                                   const DecodingParams& params, Backend& backend,
                                   std::size_t max_in_flight, const std::string& run_id) {
  if (max_in_flight == 0) throw Error(ErrorCode::kInvalidParams, "max_in_flight must be >= 1");
  std::vector<BatchRecord> records(prompts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      BatchRecord& record = records[i];
      record.prompt_id = prompts[i].id;
      try {
        record.result = generate(prompts[i].prompt, params, backend, run_id);
      } catch (const std::exception& e) {
        record.error = e.what();
      }
    }
  };
  const std::size_t workers = std::min(max_in_flight, std::max<std::size_t>(prompts.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return records;
}

}  // namespace recgpt::generation
