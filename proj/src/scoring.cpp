#include "codec/scoring.hpp"

#include <algorithm>
#include <cmath>

#include <zlib.h>

#include "codec/errors.hpp"
#include "codec/rng.hpp"

namespace codec {

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::codec:
      return "codec";
    case Method::loss:
      return "loss";
    case Method::mink:
      return "mink";
    case Method::zlib:
      return "zlib";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "codec") return Method::codec;
  if (name == "loss") return Method::loss;
  if (name == "mink") return Method::mink;
  if (name == "zlib") return Method::zlib;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected codec, loss, mink or zlib)");
}

void CodecConfig::validate() const {
  std::string problems;
  if (n_context == 0) problems += " n_context must be positive;";
  if (n_seeds == 0) problems += " n_seeds must be positive;";
  if (!problems.empty()) throw ConfigError("invalid CoDeC configuration:" + problems);
}

DeltaRecord make_delta_record(std::string sample_id, double baseline_mean, std::vector<double> incontext_means,
                              std::vector<std::vector<std::string>> context_ids_per_seed,
                              std::size_t n_scored_tokens) {
  if (incontext_means.empty()) throw ConfigError("a delta record needs at least one seed");
  double sum = 0.0;
  for (double m : incontext_means) sum += m - baseline_mean;
  DeltaRecord r;
  r.sample_id = std::move(sample_id);
  r.baseline_mean = baseline_mean;
  r.delta = sum / static_cast<double>(incontext_means.size());
  r.indicator = r.delta < 0.0;
  r.incontext_means = std::move(incontext_means);
  r.context_ids_per_seed = std::move(context_ids_per_seed);
  r.n_scored_tokens = n_scored_tokens;
  return r;
}

std::vector<std::size_t> draw_context(const TextDataset& dataset, std::size_t sample_index, const CodecConfig& cfg,
                                      std::size_t seed) {
  const std::size_t others = dataset.size() - 1;
  if (sample_index >= dataset.size()) throw ConfigError("sample index out of range");
  if (cfg.n_context > others) {
    throw ConfigError("dataset '" + dataset.name() + "' has " + std::to_string(dataset.size()) +
                      " samples; n_context=" + std::to_string(cfg.n_context) + " needs more");
  }
  Rng rng(derive_seed({cfg.master_seed, fnv1a64(dataset[sample_index].id), cfg.first_seed + seed}));
  auto picks = sample_without_replacement(others, cfg.n_context, rng);
  for (auto& p : picks) {
    if (p >= sample_index) ++p;  // skip the target itself
  }
  return picks;
}

CodecPlan plan_codec(const TextDataset& dataset, std::size_t sample_index, const CodecConfig& cfg,
                     std::size_t max_prompt_chars) {
  cfg.validate();
  CodecPlan plan;
  plan.sample_index = sample_index;
  const Sample& target = dataset[sample_index];
  plan.baseline = build_prompt({}, target, cfg.separator);
  for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
    const auto picks = draw_context(dataset, sample_index, cfg, s);
    std::vector<Sample> ctx;
    ctx.reserve(picks.size());
    for (auto p : picks) ctx.push_back(dataset[p]);
    auto built = build_prompt_within(ctx, target, cfg.separator, max_prompt_chars);
    std::vector<std::string> ids;
    for (std::size_t k = ctx.size() - built.n_context; k < ctx.size(); ++k) ids.push_back(ctx[k].id);
    plan.incontext.push_back(std::move(built));
    plan.context_ids.push_back(std::move(ids));
  }
  return plan;
}

DeltaRecord finish_codec(const TextDataset& dataset, const CodecPlan& plan, const TokenScoreSeq& baseline,
                         std::span<const TokenScoreSeq> incontext, const CodecConfig& cfg) {
  if (incontext.size() != plan.incontext.size()) throw ConfigError("in-context score count mismatch");
  const auto base_range = target_token_range(baseline, plan.baseline.target_char_start);
  const auto base = mean_target_logprob(baseline, base_range, cfg.skip_tokens);
  std::vector<double> means;
  means.reserve(incontext.size());
  for (std::size_t s = 0; s < incontext.size(); ++s) {
    const auto range = target_token_range(incontext[s], plan.incontext[s].target_char_start);
    means.push_back(mean_target_logprob(incontext[s], range, cfg.skip_tokens).mean_logprob);
  }
  return make_delta_record(dataset[plan.sample_index].id, base.mean_logprob, std::move(means), plan.context_ids,
                           base.n_scored_tokens);
}

DeltaRecord codec_delta(const LogprobProvider& provider, const TextDataset& dataset, std::size_t sample_index,
                        const CodecConfig& cfg) {
  const auto plan = plan_codec(dataset, sample_index, cfg, provider.max_prompt_chars());
  const auto baseline = score_tokens(provider, plan.baseline.prompt);
  std::vector<TokenScoreSeq> scored;
  scored.reserve(plan.incontext.size());
  for (const auto& p : plan.incontext) scored.push_back(score_tokens(provider, p.prompt));
  return finish_codec(dataset, plan, baseline, scored, cfg);
}

double codec_score(std::span<const DeltaRecord> records) {
  if (records.empty()) throw ConfigError("CoDeC score needs at least one scoreable sample");
  std::size_t negatives = 0;
  for (const auto& r : records) negatives += r.delta < 0.0 ? 1 : 0;
  return static_cast<double>(negatives) / static_cast<double>(records.size());
}

namespace {

struct Scored {
  double logprob;
  std::size_t pos;
};

std::vector<Scored> scored_tokens(const TokenScoreSeq& scores, TokenRange range) {
  if (range.end > scores.tokens.size() || range.begin > range.end) throw ConfigError("invalid target token range");
  std::vector<Scored> out;
  out.reserve(range.size());
  for (std::size_t i = range.begin; i < range.end; ++i) {
    if (i == 0 || !scores.tokens[i].logprob) continue;
    out.push_back({*scores.tokens[i].logprob, i});
  }
  if (out.empty()) throw UnscorableSample("no scored tokens in the target range");
  return out;
}

}  // namespace

double vanilla_loss_score(const TokenScoreSeq& scores, TokenRange target_range) {
  const auto toks = scored_tokens(scores, target_range);
  double sum = 0.0;
  for (const auto& t : toks) sum += -t.logprob;
  return sum / static_cast<double>(toks.size());
}

double mink_score(const TokenScoreSeq& scores, TokenRange target_range, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) throw ConfigError("k_percent must be in (0, 100]");
  auto toks = scored_tokens(scores, target_range);
  const auto n = toks.size();
  const auto m = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(k_percent / 100.0 * static_cast<double>(n))), 1, n);
  std::partial_sort(toks.begin(), toks.begin() + static_cast<std::ptrdiff_t>(m), toks.end(),
                    [](const Scored& a, const Scored& b) {
                      return a.logprob != b.logprob ? a.logprob < b.logprob : a.pos < b.pos;
                    });
  toks.resize(m);
  // Sum in position order so that k = 100 reproduces the vanilla loss bit for bit.
  std::sort(toks.begin(), toks.end(), [](const Scored& a, const Scored& b) { return a.pos < b.pos; });
  double sum = 0.0;
  for (const auto& t : toks) sum += -t.logprob;
  return sum / static_cast<double>(m);
}

std::size_t zlib_compressed_size(std::string_view text) {
  uLongf size = compressBound(static_cast<uLong>(text.size()));
  std::vector<Bytef> buf(size);
  const int rc = compress2(buf.data(), &size, reinterpret_cast<const Bytef*>(text.data()),
                           static_cast<uLong>(text.size()), kZlibLevel);
  if (rc != Z_OK) throw Error("zlib compression failed with code " + std::to_string(rc));
  return size;
}

std::string compressor_version() { return zlibVersion(); }

double zlib_score(const TokenScoreSeq& scores, TokenRange target_range, std::string_view target_text) {
  if (target_text.empty()) throw ConfigError("zlib score needs a non-empty target text");
  const auto toks = scored_tokens(scores, target_range);
  double nll = 0.0;
  for (const auto& t : toks) nll += -t.logprob;
  return nll / static_cast<double>(zlib_compressed_size(target_text));
}

double orient(Method method, double raw) noexcept { return method == Method::codec ? raw : -raw; }

}  // namespace codec
