#include "codec/http_provider.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "codec/errors.hpp"

namespace codec {

using json = nlohmann::json;

int RetryPolicy::backoff_ms(int retry) const {
  double ms = initial_backoff_ms;
  for (int i = 1; i < retry; ++i) ms *= multiplier;
  return static_cast<int>(std::min<double>(ms, max_backoff_ms));
}

void ProviderConfig::validate() const {
  std::string problems;
  if (endpoint.empty()) problems += " endpoint is required;";
  if (model_id.empty()) problems += " model id is required;";
  if (max_prompt_chars < 1200) problems += " max_prompt_chars must be >= 1200;";
  if (max_inflight < 1) problems += " max_inflight must be >= 1;";
  if (retry.max_attempts < 1) problems += " retry.max_attempts must be >= 1;";
  if (retry.initial_backoff_ms < 0 || retry.max_backoff_ms < 0) problems += " backoff must be non-negative;";
  if (!(retry.multiplier >= 1.0)) problems += " retry.multiplier must be >= 1;";
  if (timeout_s < 1) problems += " timeout must be >= 1 s;";
  if (!endpoint.empty() && endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
    problems += " endpoint must start with http:// or https://;";
  }
  if (!problems.empty()) throw ConfigError("invalid provider configuration:" + problems);
}

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.endpoint.find("://") + 3;
  const auto path_start = config_.endpoint.find('/', scheme_end);
  if (path_start == std::string::npos) {
    scheme_host_port_ = config_.endpoint;
  } else {
    scheme_host_port_ = config_.endpoint.substr(0, path_start);
    base_path_ = config_.endpoint.substr(path_start);
  }
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (config_.endpoint.rfind("https://", 0) == 0) {
    throw ConfigError("https endpoints need a build with OpenSSL support");
  }
#endif
  sleeper_ = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

std::string completion_request_body(const std::string& model, const std::string& prompt) {
  json body = {{"model", model}, {"prompt", prompt}, {"max_tokens", 0}, {"echo", true}, {"logprobs", 0}};
  return body.dump();
}

TokenScoreSeq parse_completion_logprobs(const std::string& body, const std::string& prompt) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
  const json* lp = nullptr;
  try {
    lp = &doc.at("choices").at(0).at("logprobs");
  } catch (const json::exception&) {
    throw ProtocolError("response lacks choices[0].logprobs");
  }
  if (!lp->contains("tokens") || !lp->contains("token_logprobs")) {
    throw ProtocolError("logprobs lacks tokens or token_logprobs");
  }
  const auto& toks = (*lp)["tokens"];
  const auto& lps = (*lp)["token_logprobs"];
  if (!toks.is_array() || !lps.is_array() || toks.size() != lps.size()) {
    throw ProtocolError("tokens and token_logprobs must be arrays of equal length");
  }

  std::vector<std::string> texts;
  texts.reserve(toks.size());
  for (const auto& t : toks) {
    if (!t.is_string()) throw ProtocolError("token entries must be strings");
    texts.push_back(t.get<std::string>());
  }

  std::vector<std::size_t> offsets;
  const auto off = lp->find("text_offset");
  if (off != lp->end() && !off->is_null()) {
    if (!off->is_array() || off->size() != texts.size()) {
      throw ProtocolError("text_offset must have one entry per token");
    }
    for (const auto& o : *off) {
      if (!o.is_number_unsigned() && !(o.is_number_integer() && o.get<long long>() >= 0)) {
        throw ProtocolError("text_offset entries must be non-negative integers");
      }
      offsets.push_back(o.get<std::size_t>());
    }
  } else {
    offsets = reconstruct_offsets(prompt, texts);
  }

  TokenScoreSeq seq;
  seq.prompt = prompt;
  seq.tokens.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ScoredToken tok;
    tok.text = std::move(texts[i]);
    tok.char_start = offsets[i];
    if (!lps[i].is_null()) {
      if (!lps[i].is_number()) throw ProtocolError("token_logprobs entries must be numbers or null");
      tok.logprob = lps[i].get<double>();
    }
    seq.tokens.push_back(std::move(tok));
  }
  validate(seq);
  return seq;
}

TokenScoreSeq HttpProvider::score(const std::string& prompt) const {
  httplib::Headers headers;
  if (const char* token = std::getenv(config_.auth_env_var.c_str()); token != nullptr && *token != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const auto body = completion_request_body(config_.model_id, prompt);
  const auto path = base_path_ + "/v1/completions";

  std::string last_problem;
  int last_status = 0;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    if (attempt > 1) sleeper_(config_.retry.backoff_ms(attempt - 1));
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);
    client.set_write_timeout(config_.timeout_s, 0);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_status = 0;
      last_problem = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return parse_completion_logprobs(res->body, prompt);
    last_status = res->status;
    last_problem = "HTTP " + std::to_string(res->status);
    if (res->status == 429 || res->status >= 500) continue;
    // Bodies of rejected requests are echoed (truncated) for diagnosis.
    throw TransportError(last_problem + " from " + path + ": " + res->body.substr(0, 300), res->status);
  }
  throw TransportError(last_problem + " after " + std::to_string(config_.retry.max_attempts) + " attempts",
                       last_status);
}

}  // namespace codec
