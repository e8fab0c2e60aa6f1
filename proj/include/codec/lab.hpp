#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "codec/dataset.hpp"
#include "codec/evaluation.hpp"
#include "codec/synth.hpp"
#include "codec/toylm.hpp"

// Ground-truth contamination experiments on generated corpora: the toy LM is
// trained on the "seen" corpora and never on the "unseen" ones.
namespace codec::lab {

struct LabSuite {
  std::vector<TextDataset> seen;
  std::vector<TextDataset> unseen;
};

// 5 + 5 corpora of equal construction.
LabSuite standard_suite(std::uint64_t seed, std::size_t n_samples = 200);

// 5 + 5 corpora whose signature alphabets (and one corpus' topic layer) differ
// in size, so their intrinsic entropy differs and raw loss mixes difficulty
// with membership.
LabSuite difficulty_suite(std::uint64_t seed, std::size_t n_samples = 200);

// Samples of several datasets in order.
std::vector<Sample> concat(std::span<const TextDataset> datasets);

// Model trained on the seen corpora, vocabulary = the whole lab alphabet.
std::shared_ptr<const ToyLm> train_seen(const LabSuite& suite, const ToyLmParams& params = {});

// Every sample cropped with augment_crop(sample, fraction, seed).
TextDataset crop_dataset(const TextDataset& dataset, double fraction, std::uint64_t seed);

struct ProgressRow {
  std::uint64_t step = 0;
  std::string dataset;
  double score = 0.0;
};

// CoDeC of every dataset at every checkpoint. Rows by checkpoint, then dataset.
std::vector<ProgressRow> training_progress(std::span<const LabCheckpoint> checkpoints,
                                           std::span<const TextDataset> datasets, const ScoreConfig& cfg);

struct TransferRow {
  double fraction = 1.0;
  std::string dataset;
  double score = 0.0;
};

std::vector<TransferRow> crop_transfer(const LogprobProvider& provider, std::span<const TextDataset> datasets,
                                       std::span<const double> fractions, std::uint64_t crop_seed,
                                       const ScoreConfig& cfg);

// The context CoDeC's first seed would prepend to sample `index`.
std::vector<Sample> first_seed_context(const TextDataset& dataset, std::size_t index, const CodecConfig& cfg);

}  // namespace codec::lab
