#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "codec/dataset.hpp"
#include "codec/provider.hpp"

namespace codec {

struct ToyLmParams {
  int order = 4;                   // n-gram order; contexts hold order-1 chars
  double alpha = 0.1;              // Laplace constant (global and cache)
  double cache_lambda = 0.3;       // weight of the cache distribution
  std::size_t cache_window = 300;  // prompt characters feeding the cache

  // Throws ConfigError.
  void validate() const;
  bool operator==(const ToyLmParams&) const = default;
};

// Character-level n-gram model interpolated with a unigram cache over the
// preceding prompt window:
//
//   P(c_i) = (1 - lambda) * P_global(c_i | h) + lambda * P_cache(c_i)
//
// P_global is Laplace-smoothed with backoff to the longest suffix of h that
// was observed with mass >= kMinContextMass; P_cache is the Laplace-smoothed
// character distribution of the previous min(i, cache_window) characters.
// Vocabulary id 0 is the reserved unknown symbol.
//
// Instances are immutable once built; train() and finetune() return new
// models.
class ToyLm {
 public:
  static constexpr double kMinContextMass = 1.0;
  static constexpr std::uint32_t kUnk = 0;

  ToyLm(ToyLmParams params, std::u32string_view alphabet);

  const ToyLmParams& params() const noexcept { return params_; }
  // Includes the unknown symbol.
  std::size_t vocab_size() const noexcept { return alphabet_.size() + 1; }
  const std::u32string& alphabet() const noexcept { return alphabet_; }
  std::uint32_t id_of(char32_t c) const noexcept;
  // Total (weighted) characters consumed.
  double mass() const noexcept { return mass_; }
  std::size_t n_contexts() const noexcept { return table_.size(); }

  // Weighted count of `next` after `context` (context in characters).
  double count(std::u32string_view context, char32_t next) const;
  double context_total(std::u32string_view context) const;

  // Smoothed global n-gram probability of `next` after `history`.
  double global_prob(std::u32string_view history, char32_t next) const;

  // Full next-character distribution after `prefix`, indexed by vocabulary
  // id, with the cache state implied by the prefix.
  std::vector<double> next_distribution(std::u32string_view prefix) const;
  std::vector<double> next_distribution(std::u32string_view prefix, double cache_lambda) const;

  // One character token per position; position 0 unscored.
  TokenScoreSeq logprobs(std::string_view prompt) const;

  // Content digest of parameters, vocabulary and counts.
  std::uint64_t fingerprint() const;

  bool operator==(const ToyLm& other) const;

  std::string to_json() const;
  static ToyLm from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ToyLm load(const std::filesystem::path& path);

  struct Key {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  struct Node {
    double total = 0.0;
    std::vector<std::pair<std::uint32_t, double>> next;  // sorted by id
    bool operator==(const Node&) const = default;
  };

 private:
  friend class ToyLmTrainer;

  void accumulate(std::span<const std::uint32_t> ids, std::size_t from, std::size_t to, double weight);
  std::vector<std::uint32_t> encode(std::u32string_view text) const;
  double global_prob_ids(const std::uint32_t* history_end, std::size_t history_len, std::uint32_t next) const;
  const Node* lookup(const std::uint32_t* history_end, std::size_t len) const;

  ToyLmParams params_;
  std::u32string alphabet_;  // sorted, unique
  std::unordered_map<Key, Node, KeyHash> table_;
  double mass_ = 0.0;
};

struct LabCheckpoint {
  std::uint64_t step = 0;  // cumulative training characters consumed
  std::shared_ptr<const ToyLm> model;
};

// Trains on the samples in order. The vocabulary is every character of the
// corpus plus `extra_alphabet`. With checkpoint_every > 0 a checkpoint is
// emitted at step 0 and after every checkpoint_every characters; the final
// model is always the last checkpoint.
std::vector<LabCheckpoint> train(std::span<const Sample> corpus, const ToyLmParams& params,
                                 std::size_t checkpoint_every = 0,
                                 std::u32string_view extra_alphabet = {});

// Convenience: the final model of train().
ToyLm train_model(std::span<const Sample> corpus, const ToyLmParams& params,
                  std::u32string_view extra_alphabet = {});

// counts(result) = counts(model) + weight * counts(corpus). Characters
// outside the vocabulary count as the unknown symbol.
ToyLm finetune(const ToyLm& model, std::span<const Sample> corpus, double weight);

// Contiguous substring of ceil(fraction * length) characters at a uniformly
// random start, deterministic per (sample, fraction, rng_seed).
Sample augment_crop(const Sample& sample, double fraction, std::uint64_t rng_seed);

// Exposes a ToyLm through the provider contract.
class ToyLmProvider : public LogprobProvider {
 public:
  explicit ToyLmProvider(std::shared_ptr<const ToyLm> model, std::string name = "toylm");

  TokenScoreSeq score(const std::string& prompt) const override;
  std::string model_id() const override { return id_; }

  const ToyLm& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const ToyLm> model_;
  std::string id_;
};

}  // namespace codec
