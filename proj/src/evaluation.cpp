#include "codec/evaluation.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <map>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "codec/engine.hpp"
#include "codec/errors.hpp"
#include "codec/utf8.hpp"
#include "codec/rng.hpp"

namespace codec {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// Samples per score_batch call; bounds how many token sequences are alive.
constexpr std::size_t kSamplesPerBatch = 64;

}  // namespace

void ScoreConfig::validate() const {
  std::string problems;
  try {
    codec.validate();
  } catch (const ConfigError& e) {
    problems += std::string(" ") + e.what() + ";";
  }
  if (!(k_percent > 0.0 && k_percent <= 100.0)) problems += " k_percent must be in (0, 100];";
  if (max_inflight == 0) problems += " max_inflight must be >= 1;";
  if (!problems.empty()) throw ConfigError("invalid score configuration:" + problems);
}

std::string dataset_fingerprint(const TextDataset& dataset) {
  std::string buf = dataset.name();
  buf.push_back('\0');
  for (const auto& s : dataset.samples()) {
    buf += s.id;
    buf.push_back('\0');
    buf += s.text;
    buf.push_back('\0');
  }
  return hex64(fnv1a64(buf));
}

std::string score_config_hash(Method method, const ScoreConfig& cfg, const std::string& model_id,
                              const std::string& fingerprint) {
  nlohmann::json j = {
      {"method", std::string(to_string(method))},
      {"model_id", model_id},
      {"dataset", fingerprint},
      {"k_percent", cfg.k_percent},
      {"n_context", cfg.codec.n_context},
      {"n_seeds", cfg.codec.n_seeds},
      {"skip_tokens", cfg.codec.skip_tokens},
      {"separator", cfg.codec.separator},
      {"master_seed", cfg.codec.master_seed},
      {"first_seed", cfg.codec.first_seed},
  };
  return hex64(fnv1a64(j.dump()));
}

DatasetEvaluation evaluate_dataset(const LogprobProvider& provider, const TextDataset& dataset,
                                   std::span<const Method> methods, const ScoreConfig& cfg) {
  cfg.validate();
  if (methods.empty()) throw ConfigError("no scoring method requested");
  const bool want_codec = std::find(methods.begin(), methods.end(), Method::codec) != methods.end();
  const bool want_baselines = std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::codec; });
  const std::size_t max_chars = provider.max_prompt_chars();

  struct BaselineRow {
    std::string id;
    double loss = 0.0, mink = 0.0, zlib = 0.0;
  };
  std::vector<BaselineRow> baseline_rows;
  DatasetEvaluation ev;

  for (std::size_t lo = 0; lo < dataset.size(); lo += kSamplesPerBatch) {
    const std::size_t hi = std::min(dataset.size(), lo + kSamplesPerBatch);
    std::vector<CodecPlan> plans;
    std::vector<std::string> prompts;
    std::vector<std::string> labels;
    std::vector<char> oversize(hi - lo, 0);
    for (std::size_t i = lo; i < hi; ++i) {
      const Sample& target = dataset[i];
      if (max_chars > 0 && utf8::length(target.text) > max_chars) {
        // Not even the bare sample fits; nothing is sent for it.
        oversize[i - lo] = 1;
        plans.emplace_back();
        continue;
      }
      if (want_codec) {
        plans.push_back(plan_codec(dataset, i, cfg.codec, max_chars));
        prompts.push_back(plans.back().baseline.prompt);
        labels.push_back("sample " + target.id + ", baseline");
        for (std::size_t s = 0; s < plans.back().incontext.size(); ++s) {
          prompts.push_back(plans.back().incontext[s].prompt);
          labels.push_back("sample " + target.id + ", seed " + std::to_string(cfg.codec.first_seed + s));
        }
      } else {
        prompts.push_back(target.text);
        labels.push_back("sample " + target.id + ", baseline");
      }
    }
    const auto scored = score_batch(provider, prompts, cfg.max_inflight, [&](std::size_t k) { return labels[k]; });

    std::size_t k = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const Sample& target = dataset[i];
      if (oversize[i - lo]) {
        if (want_codec) ev.skipped_codec.push_back(target.id);
        if (want_baselines) ev.skipped_baseline.push_back(target.id);
        continue;
      }
      const TokenScoreSeq& bare = scored[k];
      if (want_codec) {
        const auto& plan = plans[i - lo];
        std::span<const TokenScoreSeq> inc(scored.data() + k + 1, plan.incontext.size());
        try {
          ev.records.push_back(finish_codec(dataset, plan, bare, inc, cfg.codec));
        } catch (const UnscorableSample&) {
          ev.skipped_codec.push_back(target.id);
        }
        k += 1 + plan.incontext.size();
      } else {
        k += 1;
      }
      if (want_baselines) {
        try {
          const auto range = target_token_range(bare, 0);
          baseline_rows.push_back({target.id, vanilla_loss_score(bare, range), mink_score(bare, range, cfg.k_percent),
                                   zlib_score(bare, range, target.text)});
        } catch (const UnscorableSample&) {
          ev.skipped_baseline.push_back(target.id);
        }
      }
    }
  }

  std::sort(ev.records.begin(), ev.records.end(),
            [](const DeltaRecord& a, const DeltaRecord& b) { return a.sample_id < b.sample_id; });
  std::sort(baseline_rows.begin(), baseline_rows.end(),
            [](const BaselineRow& a, const BaselineRow& b) { return a.id < b.id; });
  std::sort(ev.skipped_codec.begin(), ev.skipped_codec.end());
  std::sort(ev.skipped_baseline.begin(), ev.skipped_baseline.end());

  const std::string fp = dataset_fingerprint(dataset);
  const std::string model = provider.model_id();
  for (Method m : methods) {
    DatasetScore ds;
    ds.dataset_name = dataset.name();
    ds.model_id = model;
    ds.method = m;
    ds.config_hash = score_config_hash(m, cfg, model, fp);
    if (m == Method::codec) {
      if (ev.records.empty()) throw DataError("dataset '" + dataset.name() + "' has no scoreable sample for codec");
      ds.value = codec_score(ev.records);
      ds.n_samples_scored = ev.records.size();
      ds.n_samples_skipped = ev.skipped_codec.size();
    } else {
      if (baseline_rows.empty()) {
        throw DataError("dataset '" + dataset.name() + "' has no scoreable sample for " + std::string(to_string(m)));
      }
      double sum = 0.0;
      for (const auto& r : baseline_rows) sum += m == Method::loss ? r.loss : m == Method::mink ? r.mink : r.zlib;
      ds.value = sum / static_cast<double>(baseline_rows.size());
      ds.n_samples_scored = baseline_rows.size();
      ds.n_samples_skipped = ev.skipped_baseline.size();
    }
    ds.oriented_value = orient(m, ds.value);
    ev.scores.push_back(std::move(ds));
  }
  return ev;
}

DatasetScore dataset_score(const LogprobProvider& provider, const TextDataset& dataset, Method method,
                           const ScoreConfig& cfg) {
  const Method methods[] = {method};
  return evaluate_dataset(provider, dataset, methods, cfg).scores.front();
}

AucResult auc(std::span<const double> seen, std::span<const double> unseen) {
  if (seen.empty() || unseen.empty()) throw ConfigError("AUC needs at least one seen and one unseen score");
  std::uint64_t greater = 0, ties = 0;
  for (double p : seen) {
    for (double n : unseen) {
      if (p > n) ++greater;
      else if (p == n) ++ties;
    }
  }
  AucResult r;
  r.n_pos = seen.size();
  r.n_neg = unseen.size();
  r.ties = ties;
  const double pairs = static_cast<double>(r.n_pos) * static_cast<double>(r.n_neg);
  r.auc = static_cast<double>(2 * greater + ties) / (2.0 * pairs);
  return r;
}

std::vector<ContextSweepRow> sweep_context_size(const LogprobProvider& provider,
                                                std::span<const TextDataset> seen,
                                                std::span<const TextDataset> unseen,
                                                std::span<const std::size_t> n_values, const ScoreConfig& cfg,
                                                std::size_t n_repeats) {
  if (n_repeats == 0) throw ConfigError("n_repeats must be >= 1");
  if (n_values.empty()) throw ConfigError("no context sizes given");
  std::size_t min_size = SIZE_MAX;
  std::unordered_set<std::string> bare;
  for (auto group : {seen, unseen}) {
    for (const auto& d : group) {
      min_size = std::min(min_size, d.size());
      for (const auto& s : d.samples()) bare.insert(s.text);
    }
  }
  const std::size_t max_n = *std::max_element(n_values.begin(), n_values.end());
  if (max_n >= min_size) {
    throw ConfigError("largest context size " + std::to_string(max_n) + " needs datasets of more than " +
                      std::to_string(max_n) + " samples");
  }
  // Bare targets repeat across every cell; in-context prompts never do.
  CachingProvider cached(provider, [&bare](const std::string& p) { return bare.count(p) > 0; });

  std::vector<ContextSweepRow> rows;
  for (std::size_t n : n_values) {
    const std::size_t first_row = rows.size();
    for (int cls = 0; cls < 2; ++cls) {
      for (const auto& d : cls == 0 ? seen : unseen) {
        ContextSweepRow row;
        row.n_context = n;
        row.dataset = d.name();
        row.seen = cls == 0;
        double sum = 0.0;
        for (std::size_t r = 0; r < n_repeats; ++r) {
          ScoreConfig c = cfg;
          c.codec.n_context = n;
          c.codec.master_seed = cfg.codec.master_seed + r;
          const double v = dataset_score(cached, d, Method::codec, c).value;
          sum += v;
          row.min = r == 0 ? v : std::min(row.min, v);
          row.max = r == 0 ? v : std::max(row.max, v);
        }
        row.score = sum / static_cast<double>(n_repeats);
        rows.push_back(std::move(row));
      }
    }
    double min_seen = 1.0, max_unseen = 0.0;
    for (std::size_t i = first_row; i < rows.size(); ++i) {
      if (rows[i].seen) min_seen = std::min(min_seen, rows[i].score);
      else max_unseen = std::max(max_unseen, rows[i].score);
    }
    for (std::size_t i = first_row; i < rows.size(); ++i) rows[i].gap = min_seen - max_unseen;
  }
  return rows;
}

std::vector<SizeSweepRow> sweep_dataset_size(const LogprobProvider& provider, const TextDataset& dataset,
                                             std::span<const std::size_t> sizes, std::size_t n_repeats,
                                             const ScoreConfig& cfg) {
  if (n_repeats == 0) throw ConfigError("n_repeats must be >= 1");
  for (std::size_t s : sizes) {
    if (s > dataset.size()) {
      throw ConfigError("size " + std::to_string(s) + " exceeds dataset size " + std::to_string(dataset.size()));
    }
    if (s < 2) throw ConfigError("sizes must be >= 2");
  }
  std::unordered_set<std::string> bare;
  for (const auto& s : dataset.samples()) bare.insert(s.text);
  CachingProvider cached(provider, [&bare](const std::string& p) { return bare.count(p) > 0; });

  std::vector<SizeSweepRow> rows;
  for (std::size_t size : sizes) {
    const auto subset = sample_subset(dataset, size, cfg.codec.master_seed);
    SizeSweepRow row;
    row.size = size;
    row.repeats = n_repeats;
    double sum = 0.0;
    for (std::size_t r = 0; r < n_repeats; ++r) {
      ScoreConfig c = cfg;
      c.codec.master_seed = cfg.codec.master_seed + r;
      const double v = dataset_score(cached, subset, Method::codec, c).value;
      sum += v;
      row.min = r == 0 ? v : std::min(row.min, v);
      row.max = r == 0 ? v : std::max(row.max, v);
    }
    row.mean = sum / static_cast<double>(n_repeats);
    rows.push_back(row);
  }
  return rows;
}

std::vector<TracePoint> token_delta_trace(const LogprobProvider& provider, std::span<const Sample> context,
                                          const Sample& target, const CodecConfig& cfg) {
  const auto built = build_prompt_within(context, target, cfg.separator, provider.max_prompt_chars());
  const std::string prompts[] = {target.text, built.prompt};
  const auto scored = score_batch(provider, prompts, 2, [&](std::size_t k) {
    return "trace of " + target.id + (k == 0 ? ", bare" : ", with context");
  });
  const TokenScoreSeq& bare = scored[0];
  const TokenScoreSeq& inc = scored[1];
  const auto bare_range = target_token_range(bare, 0);
  const auto inc_range = target_token_range(inc, built.target_char_start);

  std::map<std::size_t, std::size_t> by_offset;  // target-relative offset -> token index
  for (std::size_t i = inc_range.begin; i < inc_range.end; ++i) {
    by_offset.emplace(inc.tokens[i].char_start - built.target_char_start, i);
  }

  std::vector<TracePoint> trace;
  trace.reserve(bare_range.size());
  for (std::size_t i = bare_range.begin; i < bare_range.end; ++i) {
    const ScoredToken& b = bare.tokens[i];
    TracePoint p;
    p.token_text = b.text;
    p.position = i - bare_range.begin;
    const auto it = by_offset.find(b.char_start);
    const ScoredToken* w = it == by_offset.end() ? nullptr : &inc.tokens[it->second];
    p.aligned = w != nullptr && w->text == b.text;
    p.skipped = p.position < cfg.skip_tokens || !b.logprob || (p.aligned && !w->logprob);
    if (p.aligned && b.logprob && w->logprob) p.delta_logprob = *w->logprob - *b.logprob;
    trace.push_back(std::move(p));
  }
  if (std::none_of(trace.begin(), trace.end(), [](const TracePoint& p) { return p.aligned && !p.skipped; })) {
    throw UnscorableSample("trace of '" + target.id + "' has no aligned scored token");
  }
  return trace;
}

double mean_trace_delta(std::span<const TracePoint> trace) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : trace) {
    if (!p.aligned || p.skipped) continue;
    sum += p.delta_logprob;
    ++n;
  }
  if (n == 0) throw UnscorableSample("trace has no aligned scored token");
  return sum / static_cast<double>(n);
}

}  // namespace codec
