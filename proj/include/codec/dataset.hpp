#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace codec {

struct Sample {
  std::string id;
  std::string text;  // UTF-8, non-empty

  bool operator==(const Sample&) const = default;
};

// An ordered, non-trivial collection of samples: at least two samples (a
// context must always be drawable from the rest) with unique ids.
class TextDataset {
 public:
  TextDataset() = default;
  // Validates the invariants; throws DataError.
  TextDataset(std::string name, std::vector<Sample> samples);

  const std::string& name() const noexcept { return name_; }
  const std::vector<Sample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }

  // Index of the sample with `id`, or size() when absent.
  std::size_t find(std::string_view id) const noexcept;

  bool operator==(const TextDataset&) const = default;

 private:
  std::string name_;
  std::vector<Sample> samples_;
};

enum class DatasetFormat { jsonl, text_dir, raw_text };

DatasetFormat parse_dataset_format(std::string_view name);
std::string_view to_string(DatasetFormat format) noexcept;

inline constexpr std::size_t kDefaultChunkChars = 600;
inline constexpr std::size_t kDefaultMaxSamples = 1000;
// Tail chunks shorter than this are merged into their predecessor.
inline constexpr std::size_t kMinTailChars = 50;

// Splits text into consecutive non-overlapping chunks of `chunk_chars`
// Unicode scalar values; a tail shorter than kMinTailChars is merged into
// the previous chunk. Ids are "chunk-0000", "chunk-0001", ...
std::vector<Sample> chunk_text(std::string_view text, std::size_t chunk_chars);

// Loads jsonl (fields "id"/"text"), a directory of text files (one sample per
// regular file, lexicographic order) or a single raw text file (chunked).
// The dataset name defaults to the file or directory stem.
TextDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                         std::size_t chunk_chars = kDefaultChunkChars);

// Returns the dataset unchanged when it has at most n samples; otherwise n
// samples drawn uniformly without replacement, in source order.
TextDataset sample_subset(const TextDataset& dataset, std::size_t n, std::uint64_t rng_seed);

}  // namespace codec
