#include "codec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "codec/errors.hpp"
#include "codec/rng.hpp"
#include "codec/utf8.hpp"

namespace codec::synth {

namespace {

constexpr std::u32string_view kVowels = U"aeiou";
// Latin-1 letters widen the consonant set so topic letter sets rarely overlap.
constexpr std::u32string_view kConsonants =
    U"bcdfghjklmnpqrstvwxyz\u00e0\u00e1\u00e2\u00e3\u00e4\u00e5\u00e6\u00e7\u00e8\u00e9\u00ea\u00eb\u00ec\u00ed\u00ee"
    U"\u00ef\u00f1\u00f2\u00f3\u00f4\u00f5\u00f6\u00f8\u00f9\u00fa\u00fb\u00fc\u00fd\u00fe\u00ff";

std::u32string signature_pool() {
  std::u32string pool;
  for (char32_t c = 0x3B1; c <= 0x3C9; ++c) {
    if (c != 0x3C2) pool.push_back(c);  // Greek lowercase without final sigma
  }
  for (char32_t c = 0x430; c <= 0x44F; ++c) pool.push_back(c);   // Cyrillic lowercase
  for (char32_t c = 0x561; c <= 0x586; ++c) pool.push_back(c);   // Armenian lowercase
  for (char32_t c = 0x5D0; c <= 0x5EA; ++c) pool.push_back(c);   // Hebrew
  for (char32_t c = 0x10D0; c <= 0x10F0; ++c) pool.push_back(c); // Georgian
  return pool;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.uniform_index(v.size())];
}

char32_t pick(std::u32string_view s, Rng& rng) { return s[rng.uniform_index(s.size())]; }

// Consonant-vowel syllables with an optional closing consonant.
std::u32string make_word(std::u32string_view consonants, std::u32string_view vowels, std::size_t min_syl,
                         std::size_t max_syl, Rng& rng) {
  std::u32string w;
  const std::size_t n = min_syl + rng.uniform_index(max_syl - min_syl + 1);
  for (std::size_t s = 0; s < n; ++s) {
    w.push_back(pick(consonants, rng));
    w.push_back(pick(vowels, rng));
    if (rng.bernoulli(0.3)) w.push_back(pick(consonants, rng));
  }
  return w;
}

std::vector<std::u32string> make_lexicon(std::size_t n, std::u32string_view consonants, std::u32string_view vowels,
                                         std::size_t min_syl, std::size_t max_syl, Rng& rng) {
  std::set<std::u32string> words;
  // Bounded attempts: tiny alphabets cannot always supply n distinct words.
  for (std::size_t attempt = 0; words.size() < n && attempt < 50 * n; ++attempt) {
    words.insert(make_word(consonants, vowels, min_syl, max_syl, rng));
  }
  std::vector<std::u32string> out(words.begin(), words.end());
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.uniform_index(i)]);
  return out;
}

struct SharedLexicon {
  std::vector<std::vector<std::u32string>> topics;
  std::vector<std::u32string> function_words;
};

SharedLexicon shared_lexicon(const SuiteSpec& suite) {
  Rng rng(derive_seed({suite.seed, fnv1a64("shared-lexicon")}));
  SharedLexicon lex;
  for (std::size_t t = 0; t < suite.n_topics; ++t) {
    std::u32string cons(kConsonants);
    for (std::size_t i = cons.size(); i > 1; --i) std::swap(cons[i - 1], cons[rng.uniform_index(i)]);
    cons.resize(std::clamp<std::size_t>(suite.topic_consonants, 1, kConsonants.size()));
    std::u32string vowels(kVowels);
    for (std::size_t i = vowels.size(); i > 1; --i) std::swap(vowels[i - 1], vowels[rng.uniform_index(i)]);
    vowels.resize(std::clamp<std::size_t>(suite.topic_vowels, 1, kVowels.size()));
    lex.topics.push_back(make_lexicon(suite.words_per_topic, cons, vowels, 1, 3, rng));
  }
  lex.function_words = make_lexicon(20, kConsonants, kVowels, 1, 1, rng);
  return lex;
}

}  // namespace

void CorpusSpec::validate() const {
  std::string problems;
  if (n_samples < 2) problems += " n_samples must be >= 2;";
  if (sample_chars < 20) problems += " sample_chars must be >= 20;";
  if (signature_letters < 2) problems += " signature_letters must be >= 2;";
  if (signature_words == 0) problems += " signature_words must be positive;";
  if (!(signature_rate >= 0.0 && signature_rate <= 1.0)) problems += " signature_rate must be in [0, 1];";
  if (!(topic_burst >= 0.0 && topic_burst <= 1.0)) problems += " topic_burst must be in [0, 1];";
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) problems += " noise_rate must be in [0, 1];";
  if (!problems.empty()) throw ConfigError("invalid synthetic corpus spec:" + problems);
}

std::u32string lab_alphabet() {
  std::u32string a(kVowels);
  a += kConsonants;
  a += signature_pool();
  a += U" .,\n";
  return a;
}

TextDataset generate_corpus(const SuiteSpec& suite, const CorpusSpec& spec) {
  spec.validate();
  const auto pool = signature_pool();
  if (suite.signature_block == 0 || suite.signature_block > pool.size()) throw ConfigError("invalid signature block size");
  if (spec.signature_letters > suite.signature_block) throw ConfigError("signature_letters exceeds the signature block size");
  auto shared = shared_lexicon(suite);
  Rng rng(derive_seed({suite.seed, fnv1a64("corpus"), spec.index}));
  if (spec.private_topic_words > 0) {
    for (auto& topic : shared.topics) {
      std::u32string cons(kConsonants);
      for (std::size_t i = cons.size(); i > 1; --i) std::swap(cons[i - 1], cons[rng.uniform_index(i)]);
      cons.resize(8);
      topic = make_lexicon(spec.private_topic_words, cons, kVowels, 2, 4, rng);
    }
  }

  // Corpus i owns block i of a suite-wide shuffle of the pool, so signature
  // alphabets of different corpora never share a letter (until the pool wraps).
  std::u32string shuffled = pool;
  Rng pool_rng(derive_seed({suite.seed, fnv1a64("signature-pool")}));
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[pool_rng.uniform_index(i)]);
  const std::size_t n_blocks = shuffled.size() / suite.signature_block;
  const std::size_t block = spec.index % n_blocks;
  std::u32string letters = shuffled.substr(block * suite.signature_block, spec.signature_letters);
  const std::size_t n_vowels = std::max<std::size_t>(1, spec.signature_letters / 3);
  const std::u32string_view sig_vowels(letters.data(), n_vowels);
  const std::u32string_view sig_consonants(letters.data() + n_vowels, letters.size() - n_vowels);
  const auto signature = make_lexicon(spec.signature_words, sig_consonants, sig_vowels, 1, 3, rng);

  // Mildly skewed signature word frequencies: weight 1 / (rank + 1)^0.7.
  std::vector<double> cumulative;
  double acc = 0.0;
  for (std::size_t r = 0; r < signature.size(); ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), 0.7);
    cumulative.push_back(acc);
  }

  char name[32];
  std::snprintf(name, sizeof name, "synth-%02zu", spec.index);
  std::vector<Sample> samples;
  samples.reserve(spec.n_samples);
  for (std::size_t s = 0; s < spec.n_samples; ++s) {
    const auto& topic = shared.topics[rng.uniform_index(shared.topics.size())];
    std::u32string text;
    // Signature words sit at evenly spaced positions (random phase) so every
    // sample carries the corpus signature at the same density.
    const double phase = rng.uniform01();
    for (std::size_t k = 0; text.size() < spec.sample_chars; ++k) {
      const double kk = static_cast<double>(k);
      const bool signature_slot =
          std::floor((kk + 1.0) * spec.signature_rate + phase) > std::floor(kk * spec.signature_rate + phase);
      if (spec.noise_rate > 0.0 && rng.bernoulli(spec.noise_rate)) {
        const std::size_t len = 3 + rng.uniform_index(6);
        for (std::size_t k = 0; k < len; ++k) {
          text += rng.bernoulli(0.4) ? pick(kVowels, rng) : pick(kConsonants, rng);
        }
      } else if (signature_slot) {
        const double u = rng.uniform01() * acc;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        text += signature[std::min<std::size_t>(it - cumulative.begin(), signature.size() - 1)];
      } else if (rng.bernoulli(spec.topic_burst)) {
        text += pick(topic, rng);
      } else {
        text += pick(shared.function_words, rng);
      }
      const double p = rng.uniform01();
      if (p < 0.05) {
        text += U'.';
      } else if (p < 0.08) {
        text += U',';
      }
      text += U' ';
    }
    text.resize(spec.sample_chars);
    char id[48];
    std::snprintf(id, sizeof id, "%s-%04zu", name, s);
    samples.push_back({id, utf8::encode(text)});
  }
  return TextDataset(name, std::move(samples));
}

std::vector<TextDataset> generate_suite(const SuiteSpec& suite, std::size_t n_corpora, std::size_t n_samples,
                                        const std::vector<std::size_t>& signature_letters) {
  if (signature_letters.empty()) throw ConfigError("signature_letters must not be empty");
  std::vector<TextDataset> out;
  for (std::size_t i = 0; i < n_corpora; ++i) {
    CorpusSpec spec;
    spec.index = i;
    spec.n_samples = n_samples;
    spec.signature_letters = signature_letters[i % signature_letters.size()];
    out.push_back(generate_corpus(suite, spec));
  }
  return out;
}

}  // namespace codec::synth
