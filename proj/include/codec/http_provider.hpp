#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "codec/provider.hpp"

namespace codec {

struct RetryPolicy {
  int max_attempts = 5;             // total tries, including the first
  int initial_backoff_ms = 250;
  double multiplier = 2.0;
  int max_backoff_ms = 8000;

  // Delay before retry number `retry` (1-based).
  int backoff_ms(int retry) const;
  bool operator==(const RetryPolicy&) const = default;
};

struct ProviderConfig {
  std::string endpoint;             // scheme://host[:port][/base]
  std::string model_id;
  std::size_t max_prompt_chars = 8192;
  std::size_t max_inflight = 4;
  RetryPolicy retry;
  std::string auth_env_var = "CODEC_API_KEY";
  int timeout_s = 120;

  // Lists every problem at once; throws ConfigError.
  void validate() const;
  bool operator==(const ProviderConfig&) const = default;
};

// OpenAI-compatible completions backend. One POST {endpoint}/v1/completions
// per prompt with echo=true, max_tokens=0, logprobs=0; 429, 5xx and transport
// failures are retried with exponential backoff, any other 4xx is fatal.
class HttpProvider : public LogprobProvider {
 public:
  explicit HttpProvider(ProviderConfig config);

  TokenScoreSeq score(const std::string& prompt) const override;
  std::string model_id() const override { return config_.model_id; }
  std::size_t max_prompt_chars() const override { return config_.max_prompt_chars; }

  const ProviderConfig& config() const noexcept { return config_; }

  // Replaces the sleep between retries (tests).
  void set_sleeper(std::function<void(int ms)> sleeper) { sleeper_ = std::move(sleeper); }

 private:
  ProviderConfig config_;
  std::string scheme_host_port_;
  std::string base_path_;
  std::function<void(int)> sleeper_;
};

// Parses a completions response body for `prompt`. Offsets are taken from
// text_offset when present, otherwise reconstructed from the token strings.
// Throws ProtocolError.
TokenScoreSeq parse_completion_logprobs(const std::string& body, const std::string& prompt);

// Request body for `prompt` (canonical JSON).
std::string completion_request_body(const std::string& model, const std::string& prompt);

}  // namespace codec
