#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "codec/dataset.hpp"

// Deterministic template-grammar corpora for the contamination lab.
//
// Every corpus of a suite mixes two layers of words:
//   * a shared lexicon of Latin-letter words grouped into topics; each sample
//     commits to one topic and draws most of its shared words from it, so
//     character statistics vary from sample to sample;
//   * a corpus-specific signature lexicon, used at the same rate by every
//     sample of the corpus. A shuffled pool of non-Latin letters is cut into
//     disjoint blocks and each corpus spells its signature words from its
//     own block, so two corpora never share a signature letter.
// A model trained on a corpus knows its signature layer; a held-out corpus'
// signature layer is foreign to it.
namespace codec::synth {

struct CorpusSpec {
  std::size_t index = 0;               // selects the corpus stream
  std::size_t n_samples = 200;
  std::size_t sample_chars = 300;
  std::size_t signature_letters = 12;  // size of the signature alphabet, <= signature_block
  double signature_rate = 0.5;         // fraction of signature words
  double topic_burst = 0.8;            // share of shared words from the sample topic
  double noise_rate = 0.0;             // fraction of words spelled at random (raises entropy)
  std::size_t signature_words = 15;
  // When non-zero the corpus replaces the shared topics with private ones of
  // this many longer words each (a harder, still learnable, Latin layer).
  std::size_t private_topic_words = 0;

  void validate() const;
};

struct SuiteSpec {
  std::uint64_t seed = 0;
  std::size_t n_topics = 150;
  std::size_t words_per_topic = 10;
  std::size_t topic_consonants = 3;  // letters each topic spells its words with
  std::size_t topic_vowels = 2;
  std::size_t signature_block = 14;  // pool letters reserved per corpus
};

// Every character any suite can emit (Latin, signature pool, punctuation).
std::u32string lab_alphabet();

TextDataset generate_corpus(const SuiteSpec& suite, const CorpusSpec& corpus);

// Convenience for the standard lab layout: corpora 0..n_seen-1 are the
// trained-on ones, the rest are held out. Signature alphabet sizes cycle
// through `signature_letters`.
std::vector<TextDataset> generate_suite(const SuiteSpec& suite, std::size_t n_corpora, std::size_t n_samples,
                                        const std::vector<std::size_t>& signature_letters);

}  // namespace codec::synth
