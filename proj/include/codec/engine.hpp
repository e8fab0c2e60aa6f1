#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "codec/provider.hpp"

namespace codec {

// Labels request i in error messages ("sample x, seed s").
using RequestLabel = std::function<std::string(std::size_t)>;

// Scores every prompt through score_tokens() with at most max_inflight
// requests outstanding. Results are returned in input order and never depend
// on completion order. On failure the error of the lowest failing index is
// rethrown with the same type and its label prepended.
std::vector<TokenScoreSeq> score_batch(const LogprobProvider& provider, std::span<const std::string> prompts,
                                       std::size_t max_inflight, const RequestLabel& label = {});

// Memoizes another provider by prompt. Purely an optimization: a hit returns
// exactly what the wrapped provider returned for that prompt. An optional
// predicate limits which prompts are kept.
class CachingProvider : public LogprobProvider {
 public:
  using Admit = std::function<bool(const std::string& prompt)>;

  explicit CachingProvider(const LogprobProvider& inner, Admit admit = {})
      : inner_(inner), admit_(std::move(admit)) {}

  TokenScoreSeq score(const std::string& prompt) const override;
  std::string model_id() const override { return inner_.model_id(); }
  std::size_t max_prompt_chars() const override { return inner_.max_prompt_chars(); }

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  const LogprobProvider& inner_;
  Admit admit_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::shared_ptr<const TokenScoreSeq>> cache_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

}  // namespace codec
