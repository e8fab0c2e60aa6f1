#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codec/dataset.hpp"
#include "codec/provider.hpp"

namespace codec {

enum class Method { codec, loss, mink, zlib };

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view name);

struct CodecConfig {
  std::size_t n_context = 1;
  std::size_t n_seeds = 5;
  std::size_t skip_tokens = kDefaultSkipTokens;
  std::string separator = std::string(kDefaultSeparator);
  std::uint64_t master_seed = 0;
  // Index of the first context seed; seed s of a run is first_seed + s.
  std::size_t first_seed = 0;

  void validate() const;
  bool operator==(const CodecConfig&) const = default;
};

// Per-sample evidence for the in-context confidence shift.
struct DeltaRecord {
  std::string sample_id;
  double baseline_mean = 0.0;            // nats/token, bare target
  std::vector<double> incontext_means;   // one per seed
  double delta = 0.0;                    // mean over seeds of (incontext - baseline)
  bool indicator = false;                // delta < 0
  std::vector<std::vector<std::string>> context_ids_per_seed;
  std::size_t n_scored_tokens = 0;

  bool operator==(const DeltaRecord&) const = default;
};

// Assembles a record; delta is the mean over seeds of the per-seed
// differences, accumulated in seed order.
DeltaRecord make_delta_record(std::string sample_id, double baseline_mean, std::vector<double> incontext_means,
                              std::vector<std::vector<std::string>> context_ids_per_seed,
                              std::size_t n_scored_tokens = 0);

// Context sample indices for (sample, seed): n_context distinct indices from
// the dataset minus the sample itself, in draw order. A pure function of
// (master_seed, sample id, first_seed + seed).
std::vector<std::size_t> draw_context(const TextDataset& dataset, std::size_t sample_index,
                                      const CodecConfig& cfg, std::size_t seed);

// Every prompt the in-context comparison of one sample needs.
struct CodecPlan {
  std::size_t sample_index = 0;
  BuiltPrompt baseline;
  std::vector<BuiltPrompt> incontext;  // one per seed
  std::vector<std::vector<std::string>> context_ids;
};

CodecPlan plan_codec(const TextDataset& dataset, std::size_t sample_index, const CodecConfig& cfg,
                     std::size_t max_prompt_chars = 0);

// Throws UnscorableSample when the target leaves no scored token.
DeltaRecord finish_codec(const TextDataset& dataset, const CodecPlan& plan, const TokenScoreSeq& baseline,
                         std::span<const TokenScoreSeq> incontext, const CodecConfig& cfg);

// Baseline pass plus n_seeds in-context passes for one sample.
DeltaRecord codec_delta(const LogprobProvider& provider, const TextDataset& dataset, std::size_t sample_index,
                        const CodecConfig& cfg);

// Fraction of records with delta < 0. Throws ConfigError on an empty list.
double codec_score(std::span<const DeltaRecord> records);

inline constexpr double kDefaultKPercent = 20.0;
inline constexpr int kZlibLevel = 6;

// Mean negative log-likelihood over the scored tokens of the range.
double vanilla_loss_score(const TokenScoreSeq& scores, TokenRange target_range);

// Mean NLL of the ceil(k% * n) least probable scored tokens (at least one);
// ties at the cut go to the earliest position.
double mink_score(const TokenScoreSeq& scores, TokenRange target_range, double k_percent = kDefaultKPercent);

// Total NLL of the range divided by the zlib-compressed size of the target.
double zlib_score(const TokenScoreSeq& scores, TokenRange target_range, std::string_view target_text);

// Bytes of the RFC 1950 stream of `text` at compression level 6.
std::size_t zlib_compressed_size(std::string_view text);
std::string compressor_version();

// Maps a raw score so that larger always means "more likely contaminated".
double orient(Method method, double raw) noexcept;

}  // namespace codec
