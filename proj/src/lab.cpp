#include "codec/lab.hpp"

#include "codec/errors.hpp"

namespace codec::lab {

namespace {

LabSuite split(std::vector<TextDataset> all, std::size_t n_seen) {
  LabSuite s;
  for (std::size_t i = 0; i < all.size(); ++i) (i < n_seen ? s.seen : s.unseen).push_back(std::move(all[i]));
  return s;
}

}  // namespace

LabSuite standard_suite(std::uint64_t seed, std::size_t n_samples) {
  synth::SuiteSpec suite;
  suite.seed = seed;
  return split(synth::generate_suite(suite, 10, n_samples, {12}), 5);
}

LabSuite difficulty_suite(std::uint64_t seed, std::size_t n_samples) {
  synth::SuiteSpec suite;
  suite.seed = seed;
  const std::size_t letters[10] = {14, 10, 8, 6, 12, 2, 4, 8, 14, 12};
  std::vector<TextDataset> all;
  for (std::size_t i = 0; i < 10; ++i) {
    synth::CorpusSpec c;
    c.index = i;
    c.n_samples = n_samples;
    c.signature_letters = letters[i];
    if (i == 0) {
      // A hard seen corpus: large signature and private topic lexicons.
      c.signature_words = 2000;
      c.private_topic_words = 1000;
    }
    if (i == 5) c.signature_rate = 0.6;  // an easy unseen corpus
    all.push_back(synth::generate_corpus(suite, c));
  }
  return split(std::move(all), 5);
}

std::vector<Sample> concat(std::span<const TextDataset> datasets) {
  std::vector<Sample> out;
  for (const auto& d : datasets) out.insert(out.end(), d.samples().begin(), d.samples().end());
  return out;
}

std::shared_ptr<const ToyLm> train_seen(const LabSuite& suite, const ToyLmParams& params) {
  return std::make_shared<const ToyLm>(train_model(concat(suite.seen), params, synth::lab_alphabet()));
}

TextDataset crop_dataset(const TextDataset& dataset, double fraction, std::uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.samples()) out.push_back(augment_crop(s, fraction, seed));
  return TextDataset(dataset.name(), std::move(out));
}

std::vector<ProgressRow> training_progress(std::span<const LabCheckpoint> checkpoints,
                                           std::span<const TextDataset> datasets, const ScoreConfig& cfg) {
  std::vector<ProgressRow> rows;
  for (const auto& cp : checkpoints) {
    ToyLmProvider provider(cp.model);
    for (const auto& d : datasets) rows.push_back({cp.step, d.name(), dataset_score(provider, d, Method::codec, cfg).value});
  }
  return rows;
}

std::vector<TransferRow> crop_transfer(const LogprobProvider& provider, std::span<const TextDataset> datasets,
                                       std::span<const double> fractions, std::uint64_t crop_seed,
                                       const ScoreConfig& cfg) {
  std::vector<TransferRow> rows;
  for (double f : fractions) {
    for (const auto& d : datasets) {
      const auto cropped = crop_dataset(d, f, crop_seed);
      rows.push_back({f, d.name(), dataset_score(provider, cropped, Method::codec, cfg).value});
    }
  }
  return rows;
}

std::vector<Sample> first_seed_context(const TextDataset& dataset, std::size_t index, const CodecConfig& cfg) {
  std::vector<Sample> ctx;
  for (auto p : draw_context(dataset, index, cfg, 0)) ctx.push_back(dataset[p]);
  return ctx;
}

}  // namespace codec::lab
