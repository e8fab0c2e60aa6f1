#include "codec/provider.hpp"

#include <cmath>
#include <string>

#include "codec/errors.hpp"
#include "codec/utf8.hpp"

namespace codec {

void validate(const TokenScoreSeq& seq) {
  std::size_t expected_start = 0;
  std::string joined;
  joined.reserve(seq.prompt.size());
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const auto& tok = seq.tokens[i];
    const auto where = "token " + std::to_string(i);
    if (tok.text.empty()) throw ProtocolError(where + " is empty");
    if (!utf8::is_valid(tok.text)) throw ProtocolError(where + " is not valid UTF-8");
    if (tok.char_start != expected_start) {
      throw ProtocolError(where + " starts at character " + std::to_string(tok.char_start) +
                          ", expected " + std::to_string(expected_start));
    }
    if (i > 0) {
      if (!tok.logprob) throw ProtocolError(where + " has no logprob");
      if (!std::isfinite(*tok.logprob) || *tok.logprob > 0.0) {
        throw ProtocolError(where + " has invalid logprob " + std::to_string(*tok.logprob));
      }
    }
    expected_start += utf8::length(tok.text);
    joined += tok.text;
  }
  if (joined != seq.prompt) throw ProtocolError("token texts do not reproduce the prompt");
}

std::vector<std::size_t> reconstruct_offsets(std::string_view prompt,
                                             std::span<const std::string> token_texts) {
  std::vector<std::size_t> offsets;
  offsets.reserve(token_texts.size());
  std::size_t byte_pos = 0;
  std::size_t char_pos = 0;
  for (std::size_t i = 0; i < token_texts.size(); ++i) {
    const auto& t = token_texts[i];
    if (t.empty() || prompt.compare(byte_pos, t.size(), t) != 0) {
      throw ProtocolError("token " + std::to_string(i) + " does not match the prompt at character " +
                          std::to_string(char_pos));
    }
    offsets.push_back(char_pos);
    byte_pos += t.size();
    char_pos += utf8::length(t);
  }
  if (byte_pos != prompt.size()) throw ProtocolError("tokens cover only part of the prompt");
  return offsets;
}

TokenScoreSeq score_tokens(const LogprobProvider& provider, const std::string& prompt) {
  if (prompt.empty()) throw ConfigError("cannot score an empty prompt");
  if (const auto limit = provider.max_prompt_chars(); limit != 0) {
    if (const auto n = utf8::length(prompt); n > limit) {
      throw ConfigError("prompt of " + std::to_string(n) + " characters exceeds the limit of " +
                        std::to_string(limit));
    }
  }
  auto seq = provider.score(prompt);
  if (seq.prompt != prompt) throw ProtocolError("provider scored a different prompt");
  if (seq.tokens.empty()) throw ProtocolError("provider returned no tokens");
  seq.tokens.front().logprob.reset();
  validate(seq);
  return seq;
}

BuiltPrompt build_prompt(std::span<const Sample> context, const Sample& target,
                         std::string_view separator) {
  BuiltPrompt out;
  for (const auto& ctx : context) {
    out.prompt += ctx.text;
    out.prompt += separator;
  }
  out.target_char_start = utf8::length(out.prompt);
  out.prompt += target.text;
  out.n_context = context.size();
  return out;
}

BuiltPrompt build_prompt_within(std::span<const Sample> context, const Sample& target,
                                std::string_view separator, std::size_t max_chars) {
  if (max_chars == 0) return build_prompt(context, target, separator);
  const std::size_t target_len = utf8::length(target.text);
  if (target_len > max_chars) {
    throw UnscorableSample("target of " + std::to_string(target_len) + " characters exceeds the prompt limit");
  }
  const std::size_t sep_len = utf8::length(separator);
  std::size_t total = target_len;
  for (const auto& ctx : context) total += utf8::length(ctx.text) + sep_len;
  std::size_t first = 0;
  while (total > max_chars && first < context.size()) {
    total -= utf8::length(context[first].text) + sep_len;
    ++first;
  }
  return build_prompt(context.subspan(first), target, separator);
}

TokenRange target_token_range(const TokenScoreSeq& scores, std::size_t target_char_start) {
  const auto& toks = scores.tokens;
  std::size_t i = 0;
  while (i < toks.size() && toks[i].char_start < target_char_start) ++i;
  if (i == toks.size()) {
    throw UnscorableSample("no token starts at or after character " + std::to_string(target_char_start));
  }
  return {i, toks.size()};
}

TargetScore mean_target_logprob(const TokenScoreSeq& scores, TokenRange range, std::size_t skip_tokens) {
  if (range.empty() || range.end > scores.tokens.size()) {
    throw ConfigError("invalid target token range");
  }
  TargetScore out;
  double sum = 0.0;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    const auto& lp = scores.tokens[i].logprob;
    if (i - range.begin < skip_tokens || i == 0 || !lp) {
      ++out.skipped_tokens;
      continue;
    }
    sum += *lp;
    ++out.n_scored_tokens;
  }
  if (out.n_scored_tokens == 0) {
    throw UnscorableSample("no scored target tokens remain after skipping " + std::to_string(skip_tokens));
  }
  out.mean_logprob = sum / static_cast<double>(out.n_scored_tokens);
  return out;
}

}  // namespace codec
