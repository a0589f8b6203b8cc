#include "httplib.h"

#include <thread>

#include "json.hpp"
#include "uxprobe/common/encoding.hpp"
#include "uxprobe/common/error.hpp"
#include "uxprobe/common/url.hpp"
#include "uxprobe/vlm/backend.hpp"

namespace uxprobe::vlm {
namespace {

using nlohmann::json;

enum class AttemptResult { kSuccess, kRetry, kReject };

std::string extract_content(const json& body) {
  const auto& message = body.at("choices").at(0).at("message");
  const auto& content = message.at("content");
  if (content.is_string()) return content.get<std::string>();
  std::string text;
  if (content.is_array()) {
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.value("text", "");
    }
  }
  return text;
}

}  // namespace

LiveBackend::LiveBackend(LiveBackendConfig config) : config_(std::move(config)) {
  if (!is_well_formed_http_url(config_.base_url)) {
    throw Error(ErrorCode::kConfigError, "backend " + config_.id + ": base_url must be an http(s) URL");
  }
  if (config_.model.empty()) throw Error(ErrorCode::kConfigError, "backend " + config_.id + ": model is required");
  if (config_.max_retries < 0) throw Error(ErrorCode::kConfigError, "max_retries must be >= 0");
}

LiveBackend::~LiveBackend() = default;

std::string LiveBackend::build_request_body(std::span<const ChatTurn> turns, const CompletionParams& params) const {
  json messages = json::array();
  for (const auto& turn : turns) {
    json message;
    message["role"] = to_string(turn.role);
    if (turn.images.empty()) {
      message["content"] = turn.text;
    } else {
      json parts = json::array();
      if (!turn.text.empty()) parts.push_back({{"type", "text"}, {"text", turn.text}});
      for (const auto& image : turn.images) {
        parts.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:image/png;base64," + base64_encode(image.png)}}}});
      }
      message["content"] = std::move(parts);
    }
    messages.push_back(std::move(message));
  }
  json body;
  body["model"] = config_.model;
  body["messages"] = std::move(messages);
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_output_tokens;
  return body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void LiveBackend::acquire_rate_slot() {
  if (config_.requests_per_minute <= 0) return;
  std::unique_lock lock(rate_mutex_);
  const auto window = std::chrono::minutes(1);
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    while (!recent_.empty() && now - recent_.front() >= window) recent_.pop_front();
    if (static_cast<int>(recent_.size()) < config_.requests_per_minute) {
      recent_.push_back(now);
      return;
    }
    // Holding the lock while sleeping queues later callers behind this one.
    std::this_thread::sleep_until(recent_.front() + window);
  }
}

ModelReply LiveBackend::do_complete(std::span<const ChatTurn> turns, const CompletionParams& params) {
  auto url = Url::parse(config_.base_url);
  std::string path = url->path;
  while (!path.empty() && path.back() == '/') path.pop_back();
  path += "/chat/completions";
  const std::string body = build_request_body(turns, params);

  httplib::Client client(url->origin());
  auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.request_timeout).count();
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(seconds, 0);
  client.set_write_timeout(seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error = "no attempt made";
  auto backoff = config_.initial_backoff;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    acquire_rate_slot();
    auto started = std::chrono::steady_clock::now();
    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    int status = result->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorCode::kProviderRejection, "HTTP " + std::to_string(status) + ": " + result->body.substr(0, 300));
    }
    if (status == 429 && result->body.find("insufficient_quota") != std::string::npos) {
      throw Error(ErrorCode::kProviderRejection, "quota exhausted: " + result->body.substr(0, 300));
    }
    if (status == 408 || status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status != 200) {
      throw Error(ErrorCode::kProviderRejection, "HTTP " + std::to_string(status) + ": " + result->body.substr(0, 300));
    }
    json parsed = json::parse(result->body, nullptr, false);
    if (parsed.is_discarded()) {
      last_error = "malformed response body";
      continue;
    }
    ModelReply reply;
    try {
      reply.text = extract_content(parsed);
    } catch (const json::exception&) {
      last_error = "response has no choices[0].message.content";
      continue;
    }
    if (reply.text.empty()) {
      last_error = "empty completion";
      continue;
    }
    reply.model_id = parsed.value("model", config_.model);
    reply.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    if (auto usage = parsed.find("usage"); usage != parsed.end() && usage->is_object()) {
      TokenUsage tokens;
      tokens.input = usage->value("prompt_tokens", std::int64_t{0});
      tokens.output = usage->value("completion_tokens", std::int64_t{0});
      reply.token_usage = tokens;
    }
    return reply;
  }
  throw Error(ErrorCode::kTransportFailure,
              config_.id + ": " + last_error + " after " + std::to_string(config_.max_retries + 1) + " attempts");
}

}  // namespace uxprobe::vlm
