#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "codec/engine.hpp"
#include "codec/errors.hpp"
#include "codec/provider.hpp"
#include "codec/toylm.hpp"
#include "support/fakes.hpp"

using namespace codec;
using codec::testing::FnProvider;

namespace {

TokenScoreSeq seq_with_offsets(const std::string& prompt, std::vector<std::size_t> offsets) {
  TokenScoreSeq s;
  s.prompt = prompt;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const std::size_t end = i + 1 < offsets.size() ? offsets[i + 1] : prompt.size();
    ScoredToken t;
    t.text = prompt.substr(offsets[i], end - offsets[i]);
    t.char_start = offsets[i];
    if (i > 0) t.logprob = -1.0;
    s.tokens.push_back(t);
  }
  return s;
}

TokenScoreSeq seq_with_logprobs(const std::vector<double>& lps) {
  TokenScoreSeq s;
  for (std::size_t i = 0; i < lps.size(); ++i) {
    ScoredToken t;
    t.text = std::string(1, static_cast<char>('a' + i % 26));
    t.char_start = i;
    if (i > 0) t.logprob = lps[i];
    s.prompt += t.text;
    s.tokens.push_back(t);
  }
  return s;
}

class ThrowingProvider : public LogprobProvider {
 public:
  TokenScoreSeq score(const std::string& prompt) const override {
    if (prompt.find("bad") != std::string::npos) throw TransportError("boom " + prompt, 500);
    if (prompt.find("data") != std::string::npos) throw DataError("data " + prompt);
    return inner.score(prompt);
  }
  std::string model_id() const override { return "throwing"; }
  FnProvider inner{[](const std::u32string&, std::size_t) { return -1.0; }};
};

}  // namespace

TEST_CASE("build_prompt examples") {
  const std::vector<Sample> ab{{"1", "AB"}};
  const Sample cd{"t", "CD"};
  auto p = build_prompt(ab, cd, "\n\n");
  CHECK(p.prompt == "AB\n\nCD");
  CHECK(p.target_char_start == 4);
  CHECK(p.n_context == 1);

  p = build_prompt({}, cd);
  CHECK(p.prompt == "CD");
  CHECK(p.target_char_start == 0);

  const std::vector<Sample> two{{"1", "A"}, {"2", "B"}};
  p = build_prompt(two, Sample{"t", "C"}, "\n\n");
  CHECK(p.prompt == "A\n\nB\n\nC");
  CHECK(p.target_char_start == 6);
}

TEST_CASE("build_prompt counts characters, not bytes") {
  const std::vector<Sample> ctx{{"1", "é中"}};
  const auto p = build_prompt(ctx, Sample{"t", "x"}, "\n\n");
  CHECK(p.target_char_start == 4);
}

TEST_CASE("build_prompt_within drops context from the left") {
  const std::vector<Sample> ctx{{"1", "AAAA"}, {"2", "BB"}};
  const Sample t{"t", "CC"};
  auto p = build_prompt_within(ctx, t, "\n\n", 0);
  CHECK(p.prompt == "AAAA\n\nBB\n\nCC");
  p = build_prompt_within(ctx, t, "\n\n", 8);
  CHECK(p.prompt == "BB\n\nCC");
  CHECK(p.n_context == 1);
  CHECK(p.target_char_start == 4);
  p = build_prompt_within(ctx, t, "\n\n", 3);
  CHECK(p.prompt == "CC");
  CHECK(p.n_context == 0);
  // The target is never cut.
  p = build_prompt_within(ctx, Sample{"t", "LONGTARGET"}, "\n\n", 10);
  CHECK(p.prompt == "LONGTARGET");
  CHECK_THROWS_AS(build_prompt_within(ctx, Sample{"t", "LONGTARGET"}, "\n\n", 9), UnscorableSample);
}

TEST_CASE("target_token_range examples") {
  const auto a = seq_with_offsets("abcdefgh", {0, 4, 6});
  CHECK(target_token_range(a, 4) == TokenRange{1, 3});
  const auto b = seq_with_offsets("abcdefgh", {0, 3, 6});
  CHECK(target_token_range(b, 4) == TokenRange{2, 3});
  CHECK(target_token_range(b, 0) == TokenRange{0, 3});
}

TEST_CASE("mean_target_logprob examples") {
  auto s = seq_with_logprobs({0.0, -2.0, -3.0});
  auto r = mean_target_logprob(s, target_token_range(s, 0), 0);
  CHECK(r.mean_logprob == -2.5);
  CHECK(r.n_scored_tokens == 2);

  s = seq_with_logprobs(std::vector<double>(13, -1.0));
  // Tokens 1..12 form the target: 12 tokens, skip 10.
  r = mean_target_logprob(s, TokenRange{1, 13}, 10);
  CHECK(r.mean_logprob == -1.0);
  CHECK(r.n_scored_tokens == 2);
  CHECK(r.skipped_tokens == 10);

  CHECK_THROWS_AS(mean_target_logprob(s, TokenRange{3, 13}, 10), UnscorableSample);
}

TEST_CASE("validate rejects broken sequences") {
  auto s = seq_with_logprobs({0.0, -1.0, -2.0});
  CHECK_NOTHROW(validate(s));
  auto pos = s;
  pos.tokens[2].logprob = 0.5;
  CHECK_THROWS_AS(validate(pos), ProtocolError);
  auto nan = s;
  nan.tokens[1].logprob = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(nan), ProtocolError);
  auto gap = s;
  gap.tokens[2].char_start = 5;
  CHECK_THROWS_AS(validate(gap), ProtocolError);
  auto text = s;
  text.prompt = "xyz";
  CHECK_THROWS_AS(validate(text), ProtocolError);
}

TEST_CASE("reconstruct_offsets") {
  const std::vector<std::string> toks{"hel", "lo", " wor", "ld"};
  CHECK(reconstruct_offsets("hello world", toks) == std::vector<std::size_t>{0, 3, 5, 9});
  const std::vector<std::string> uni{"é", "中x"};
  CHECK(reconstruct_offsets("é中x", uni) == std::vector<std::size_t>{0, 1});
  const std::vector<std::string> wrong{"hel", "xo"};
  CHECK_THROWS_AS(reconstruct_offsets("hello", wrong), ProtocolError);
  const std::vector<std::string> short_{"hel"};
  CHECK_THROWS_AS(reconstruct_offsets("hello", short_), ProtocolError);
}

TEST_CASE("toy LM provider: character tokens, position 0 unscored, deterministic") {
  const std::vector<Sample> corpus{{"0", "abab"}};
  auto model = std::make_shared<const ToyLm>(train_model(corpus, ToyLmParams{}));
  const ToyLmProvider provider(model);
  const auto s = score_tokens(provider, "abab");
  REQUIRE(s.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.tokens[i].char_start == i);
  CHECK_FALSE(s.tokens[0].logprob.has_value());
  for (std::size_t i = 1; i < 4; ++i) CHECK(s.tokens[i].logprob.has_value());
  CHECK(score_tokens(provider, "abab") == s);
}

TEST_CASE("score_tokens forces position 0 unscored") {
  FnProvider p([](const std::u32string&, std::size_t) { return -0.5; });
  const auto s = score_tokens(p, "xyz");
  CHECK_FALSE(s.tokens[0].logprob.has_value());
}

TEST_CASE("score_batch preserves input order for any max_inflight") {
  FnProvider p([](const std::u32string& cps, std::size_t pos) { return -static_cast<double>(cps.size() + pos) / 100.0; });
  std::vector<std::string> prompts;
  for (int i = 0; i < 40; ++i) prompts.push_back(std::string(2 + i % 7, 'a' + i % 26));
  const auto serial = score_batch(p, prompts, 1);
  for (std::size_t inflight : {2u, 5u, 16u, 64u}) {
    const auto parallel = score_batch(p, prompts, inflight);
    REQUIRE(parallel.size() == prompts.size());
    CHECK(parallel == serial);
  }
  for (std::size_t i = 0; i < prompts.size(); ++i) CHECK(serial[i].prompt == prompts[i]);
}

TEST_CASE("score_batch rethrows the lowest failing index with its label and type") {
  ThrowingProvider p;
  const std::vector<std::string> prompts{"ok", "ok2", "data1", "bad1", "bad2"};
  for (std::size_t inflight : {1u, 4u}) {
    try {
      score_batch(p, prompts, inflight, [](std::size_t i) { return "req " + std::to_string(i); });
      FAIL("expected a throw");
    } catch (const DataError& e) {
      const std::string what = e.what();
      CHECK(what.find("req 2") != std::string::npos);
      CHECK(what.find("data1") != std::string::npos);
    }
  }
  const std::vector<std::string> only_bad{"ok", "bad"};
  try {
    score_batch(p, only_bad, 2);
    FAIL("expected a throw");
  } catch (const TransportError& e) {
    CHECK(e.status() == 500);
  }
}

TEST_CASE("CachingProvider returns identical results and honors admit") {
  FnProvider inner([](const std::u32string&, std::size_t pos) { return -0.1 * static_cast<double>(pos % 5 + 1); });
  CachingProvider all(inner);
  const auto a = all.score("hello");
  const auto b = all.score("hello");
  CHECK(a == b);
  CHECK(all.hits() == 1);
  CHECK(all.misses() == 1);
  CHECK(inner.calls == 1);

  FnProvider inner2([](const std::u32string&, std::size_t) { return -1.0; });
  CachingProvider picky(inner2, [](const std::string& p) { return p.size() < 4; });
  picky.score("abc");
  picky.score("abc");
  picky.score("abcdef");
  picky.score("abcdef");
  CHECK(inner2.calls == 3);
  CHECK(picky.model_id() == "fake");
}
