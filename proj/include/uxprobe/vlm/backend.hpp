#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uxprobe/common/image.hpp"

namespace uxprobe::vlm {

enum class Role { kSystem, kUser, kAssistant };
std::string_view to_string(Role role);

struct ChatTurn {
  Role role = Role::kUser;
  std::string text;
  std::vector<ImageBlob> images;

  static ChatTurn system(std::string text) { return {Role::kSystem, std::move(text), {}}; }
  static ChatTurn user(std::string text, std::vector<ImageBlob> images = {}) {
    return {Role::kUser, std::move(text), std::move(images)};
  }
  static ChatTurn assistant(std::string text) { return {Role::kAssistant, std::move(text), {}}; }
};

// Throws Error(kPrecondition) for an assistant turn with images or a turn
// with neither text nor images.
void validate(const ChatTurn& turn);

struct TokenUsage {
  std::int64_t input = 0;
  std::int64_t output = 0;
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct ModelReply {
  std::string text;
  std::string model_id;
  std::chrono::milliseconds latency{0};
  std::optional<TokenUsage> token_usage;
};

struct CompletionParams {
  double temperature = 0.0;
  int max_output_tokens = 2048;
};

// A chat backend. complete() checks the request shape (non-empty, system
// turn first, every turn valid) before delegating. Implementations must be
// safe for concurrent complete() calls.
class Backend {
 public:
  virtual ~Backend() = default;

  ModelReply complete(std::span<const ChatTurn> turns, const CompletionParams& params);

  virtual std::string id() const = 0;
  // Most images a single request may carry; 0 means unlimited.
  virtual int max_images_per_request() const { return 0; }

 protected:
  virtual ModelReply do_complete(std::span<const ChatTurn> turns, const CompletionParams& params) = 0;
};

enum class ExhaustionPolicy { kRepeatLast, kError };

struct ReplyScript {
  std::vector<std::string> replies;
  ExhaustionPolicy exhaustion = ExhaustionPolicy::kError;

  // Plain-text records separated by lines containing only "%%". Leading
  // "#! exhaustion: repeat-last|error" directive lines are honoured.
  static ReplyScript parse(std::string_view text);
  static ReplyScript load(const std::filesystem::path& path);
  std::string serialize() const;
};

// Deterministic backend returning canned replies in order.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(ReplyScript script, std::string id = "scripted");

  std::string id() const override { return id_; }
  std::size_t call_count() const;
  // Every request received so far, in call order.
  std::vector<std::vector<ChatTurn>> requests() const;

 protected:
  ModelReply do_complete(std::span<const ChatTurn> turns, const CompletionParams& params) override;

 private:
  ReplyScript script_;
  std::string id_;
  mutable std::mutex mutex_;
  std::size_t next_ = 0;
  std::vector<std::vector<ChatTurn>> requests_;
};

struct LiveBackendConfig {
  std::string id = "live";
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key;   // resolved from the environment by the caller
  int max_retries = 3;  // attempts = 1 + max_retries; backoff doubles from initial_backoff
  std::chrono::milliseconds initial_backoff{1000};
  int requests_per_minute = 0;  // 0 disables the limiter
  std::chrono::milliseconds request_timeout{120000};
  int max_images = 50;
};

// Chat-completions-style HTTP(S) client with retry and a sliding-window
// rate limiter shared by all callers of one instance.
class LiveBackend final : public Backend {
 public:
  explicit LiveBackend(LiveBackendConfig config);
  ~LiveBackend() override;

  std::string id() const override { return config_.id; }
  int max_images_per_request() const override { return config_.max_images; }

  // Request body for `turns` in the provider's wire format (exposed for tests).
  std::string build_request_body(std::span<const ChatTurn> turns, const CompletionParams& params) const;

 protected:
  ModelReply do_complete(std::span<const ChatTurn> turns, const CompletionParams& params) override;

 private:
  void acquire_rate_slot();

  LiveBackendConfig config_;
  std::mutex rate_mutex_;
  std::deque<std::chrono::steady_clock::time_point> recent_;
};

}  // namespace uxprobe::vlm
