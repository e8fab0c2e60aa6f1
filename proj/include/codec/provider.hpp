#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "codec/dataset.hpp"

namespace codec {

struct ScoredToken {
  std::string text;
  // Natural-log probability; nullopt marks an unscored position (always the
  // case for position 0 of a causal model).
  std::optional<double> logprob;
  // Offset of the token's first character in the prompt, in Unicode scalars.
  std::size_t char_start = 0;

  bool operator==(const ScoredToken&) const = default;
};

// Per-token log-probabilities for one scored prompt.
//
// Invariants (checked by validate()): char_start strictly increasing and
// consistent with the token lengths, token texts concatenate to the prompt,
// and every logprob after position 0 is finite and <= 0.
struct TokenScoreSeq {
  std::string prompt;
  std::vector<ScoredToken> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool operator==(const TokenScoreSeq&) const = default;
};

// Throws ProtocolError describing the first violated invariant.
void validate(const TokenScoreSeq& seq);

// Builds a sequence from token strings alone by matching them sequentially
// against the prompt. Throws ProtocolError when they do not tile the prompt.
std::vector<std::size_t> reconstruct_offsets(std::string_view prompt,
                                             std::span<const std::string> token_texts);

// Half-open token index range [begin, end).
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return begin >= end; }
  bool operator==(const TokenRange&) const = default;
};

struct TargetScore {
  double mean_logprob = 0.0;        // nats per token
  std::size_t n_scored_tokens = 0;
  std::size_t skipped_tokens = 0;   // dropped by the skip rule or unscored
};

// Gray-box access to per-token log-probabilities. Implementations must be
// safe to call concurrently and deterministic for a fixed prompt.
class LogprobProvider {
 public:
  virtual ~LogprobProvider() = default;

  // Raw scoring; callers normally go through score_tokens().
  virtual TokenScoreSeq score(const std::string& prompt) const = 0;

  // Identifies the model in reports and cache keys.
  virtual std::string model_id() const = 0;

  // Longest accepted prompt in characters; 0 means unbounded.
  virtual std::size_t max_prompt_chars() const { return 0; }
};

// Scores `prompt` and enforces the TokenScoreSeq contract: position 0 is
// always reported unscored and any other violation is a ProtocolError.
TokenScoreSeq score_tokens(const LogprobProvider& provider, const std::string& prompt);

inline constexpr std::string_view kDefaultSeparator = "\n\n";
inline constexpr std::size_t kDefaultSkipTokens = 10;

struct BuiltPrompt {
  std::string prompt;
  std::size_t target_char_start = 0;  // in Unicode scalars
  std::size_t n_context = 0;          // context samples actually used

  bool operator==(const BuiltPrompt&) const = default;
};

// ctx_1 + sep + ... + ctx_n + sep + target.
BuiltPrompt build_prompt(std::span<const Sample> context, const Sample& target,
                         std::string_view separator = kDefaultSeparator);

// As build_prompt, but drops whole context samples from the left until the
// prompt fits into max_chars (0 = unbounded). The target is never cut.
BuiltPrompt build_prompt_within(std::span<const Sample> context, const Sample& target,
                                std::string_view separator, std::size_t max_chars);

// First token starting at or after target_char_start up to the end. Tokens
// straddling the boundary belong to neither side and are excluded.
TokenRange target_token_range(const TokenScoreSeq& scores, std::size_t target_char_start);

// Mean logprob over the range after dropping its first skip_tokens tokens and
// any unscored token. Throws UnscorableSample when nothing is left.
TargetScore mean_target_logprob(const TokenScoreSeq& scores, TokenRange range,
                                std::size_t skip_tokens = kDefaultSkipTokens);

}  // namespace codec
