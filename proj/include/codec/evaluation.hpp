#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "codec/dataset.hpp"
#include "codec/provider.hpp"
#include "codec/scoring.hpp"

namespace codec {

struct ScoreConfig {
  CodecConfig codec;
  double k_percent = kDefaultKPercent;
  std::size_t max_inflight = 1;

  void validate() const;
  bool operator==(const ScoreConfig&) const = default;
};

struct DatasetScore {
  std::string dataset_name;
  std::string model_id;
  Method method = Method::codec;
  double value = 0.0;
  double oriented_value = 0.0;
  std::size_t n_samples_scored = 0;
  std::size_t n_samples_skipped = 0;
  std::string config_hash;

  bool operator==(const DatasetScore&) const = default;
};

// Content digest of a dataset (name, ids and texts), hex.
std::string dataset_fingerprint(const TextDataset& dataset);

// Digest of every parameter that can influence one DatasetScore.
std::string score_config_hash(Method method, const ScoreConfig& cfg, const std::string& model_id,
                              const std::string& dataset_fingerprint);

struct DatasetEvaluation {
  std::vector<DatasetScore> scores;         // one per requested method, in request order
  std::vector<DeltaRecord> records;         // codec evidence, sorted by sample_id
  std::vector<std::string> skipped_codec;   // ids of unscorable samples
  std::vector<std::string> skipped_baseline;
};

// Scores a prepared dataset under several methods, sharing provider calls.
// All prompts go through score_batch with cfg.max_inflight; aggregation runs
// over records sorted by sample_id, so results never depend on scheduling.
// Throws DataError when a method has no scoreable sample.
DatasetEvaluation evaluate_dataset(const LogprobProvider& provider, const TextDataset& dataset,
                                   std::span<const Method> methods, const ScoreConfig& cfg);

DatasetScore dataset_score(const LogprobProvider& provider, const TextDataset& dataset, Method method,
                           const ScoreConfig& cfg);

struct AucResult {
  double auc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::size_t ties = 0;  // tied (positive, negative) pairs

  bool operator==(const AucResult&) const = default;
};

// Pairwise AUC over oriented scores; positives are seen datasets. Computed as
// (2*greater + ties) / (2*n_pos*n_neg) with a single rounding.
AucResult auc(std::span<const double> seen, std::span<const double> unseen);

struct ContextSweepRow {
  std::size_t n_context = 0;
  std::string dataset;
  bool seen = false;
  double score = 0.0;  // mean over repeats
  double min = 0.0;
  double max = 0.0;
  double gap = 0.0;    // min(seen) - max(unseen) of the mean scores at this n
};

// CoDeC at every n in n_values for every dataset; repeat r uses master seed
// cfg.codec.master_seed + r. Rows are ordered by n, then seen datasets, then
// unseen ones, each in input order.
std::vector<ContextSweepRow> sweep_context_size(const LogprobProvider& provider,
                                                std::span<const TextDataset> seen,
                                                std::span<const TextDataset> unseen,
                                                std::span<const std::size_t> n_values, const ScoreConfig& cfg,
                                                std::size_t n_repeats = 1);

struct SizeSweepRow {
  std::size_t size = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t repeats = 0;
};

// For each size, a fixed subsample (seeded by the master seed) is scored
// n_repeats times with master seeds master_seed + r.
std::vector<SizeSweepRow> sweep_dataset_size(const LogprobProvider& provider, const TextDataset& dataset,
                                             std::span<const std::size_t> sizes, std::size_t n_repeats,
                                             const ScoreConfig& cfg);

struct TracePoint {
  std::string token_text;
  std::size_t position = 0;  // token index within the bare target
  double delta_logprob = 0.0;  // with context minus without; 0 when not aligned
  bool skipped = false;        // inside the skip window or unscored
  bool aligned = true;         // same token at the same target offset in both passes
};

// Per-token confidence change of `target` when `context` is prepended. One
// point per token of the bare target.
std::vector<TracePoint> token_delta_trace(const LogprobProvider& provider, std::span<const Sample> context,
                                          const Sample& target, const CodecConfig& cfg);

// Mean delta over aligned, non-skipped points. Throws UnscorableSample when
// there is none.
double mean_trace_delta(std::span<const TracePoint> trace);

}  // namespace codec
