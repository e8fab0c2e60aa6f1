#include "codec/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "codec/errors.hpp"
#include "codec/rng.hpp"
#include "codec/utf8.hpp"

namespace codec {

namespace fs = std::filesystem;

TextDataset::TextDataset(std::string name, std::vector<Sample> samples)
    : name_(std::move(name)), samples_(std::move(samples)) {
  if (samples_.size() < 2) {
    throw DataError("dataset '" + name_ + "' needs at least 2 samples, has " +
                    std::to_string(samples_.size()));
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& s : samples_) {
    if (s.text.empty()) throw DataError("sample '" + s.id + "' has empty text");
    if (!seen.insert(s.id).second) throw DataError("duplicate sample id '" + s.id + "'");
  }
}

std::size_t TextDataset::find(std::string_view id) const noexcept {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].id == id) return i;
  }
  return samples_.size();
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "jsonl") return DatasetFormat::jsonl;
  if (name == "text_dir") return DatasetFormat::text_dir;
  if (name == "raw_text") return DatasetFormat::raw_text;
  throw ConfigError("unknown dataset format '" + std::string(name) +
                    "' (expected jsonl, text_dir or raw_text)");
}

std::string_view to_string(DatasetFormat format) noexcept {
  switch (format) {
    case DatasetFormat::jsonl:
      return "jsonl";
    case DatasetFormat::text_dir:
      return "text_dir";
    case DatasetFormat::raw_text:
      return "raw_text";
  }
  return "?";
}

std::vector<Sample> chunk_text(std::string_view text, std::size_t chunk_chars) {
  if (chunk_chars == 0) throw ConfigError("chunk_chars must be positive");
  if (text.empty()) throw DataError("cannot chunk empty text");

  // Byte offsets of every scalar boundary.
  std::vector<std::size_t> bounds;
  {
    const auto cps = utf8::decode(text);
    bounds.reserve(cps.size() + 1);
    std::size_t pos = 0;
    bounds.push_back(0);
    for (char32_t cp : cps) {
      pos += cp < 0x80 ? 1 : cp < 0x800 ? 2 : cp < 0x10000 ? 3 : 4;
      bounds.push_back(pos);
    }
  }
  const std::size_t n_chars = bounds.size() - 1;

  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < n_chars; s += chunk_chars) starts.push_back(s);
  if (starts.size() > 1 && n_chars - starts.back() < kMinTailChars) starts.pop_back();

  std::vector<Sample> out;
  out.reserve(starts.size());
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const std::size_t end = k + 1 < starts.size() ? starts[k + 1] : n_chars;
    char id[32];
    std::snprintf(id, sizeof id, "chunk-%04zu", k);
    out.push_back({id, std::string(text.substr(bounds[starts[k]], bounds[end] - bounds[starts[k]]))});
  }
  return out;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("error reading '" + path.string() + "'");
  return content;
}

std::vector<Sample> load_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::vector<Sample> samples;
  std::string line;
  for (std::size_t line_no = 0; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no + 1);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    const auto text = obj.find("text");
    if (text == obj.end() || !text->is_string()) {
      throw DataError(where + ": missing string field 'text'");
    }
    Sample s;
    s.text = text->get<std::string>();
    if (s.text.empty()) throw DataError(where + ": empty 'text'");
    if (!utf8::is_valid(s.text)) throw DataError(where + ": 'text' is not valid UTF-8");
    if (const auto id = obj.find("id"); id != obj.end() && !id->is_null()) {
      s.id = id->is_string() ? id->get<std::string>() : id->dump();
    } else {
      s.id = std::to_string(line_no);
    }
    samples.push_back(std::move(s));
  }
  if (in.bad()) throw DataError("error reading '" + path.string() + "'");
  return samples;
}

std::vector<Sample> load_text_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  if (ec) throw DataError("cannot list '" + dir.string() + "': " + ec.message());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  std::vector<Sample> samples;
  for (const auto& f : files) {
    auto text = read_file(f);
    if (text.empty()) throw DataError("'" + f.string() + "' is empty");
    if (!utf8::is_valid(text)) throw DataError("'" + f.string() + "' is not valid UTF-8");
    samples.push_back({f.filename().string(), std::move(text)});
  }
  return samples;
}

}  // namespace

TextDataset load_dataset(const fs::path& path, DatasetFormat format, std::size_t chunk_chars) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw DataError("dataset path '" + path.string() + "' does not exist");
  std::vector<Sample> samples;
  switch (format) {
    case DatasetFormat::jsonl:
      samples = load_jsonl(path);
      break;
    case DatasetFormat::text_dir:
      samples = load_text_dir(path);
      break;
    case DatasetFormat::raw_text: {
      if (chunk_chars == 0) throw ConfigError("raw_text datasets need chunk_chars > 0");
      const auto text = read_file(path);
      if (text.empty()) throw DataError("'" + path.string() + "' is empty");
      samples = chunk_text(text, chunk_chars);
      break;
    }
  }
  if (samples.empty()) throw DataError("dataset '" + path.string() + "' is empty");
  auto name = path.filename().string();
  if (name.empty()) name = path.parent_path().filename().string();
  if (const auto dot = name.rfind('.'); dot != std::string::npos && dot > 0 && format != DatasetFormat::text_dir) {
    name.resize(dot);
  }
  return TextDataset(std::move(name), std::move(samples));
}

TextDataset sample_subset(const TextDataset& dataset, std::size_t n, std::uint64_t rng_seed) {
  if (n < 2) throw ConfigError("subset size must be at least 2");
  if (dataset.size() <= n) return dataset;
  Rng rng(derive_seed({rng_seed, fnv1a64("sample_subset")}));
  auto picked = sample_without_replacement(dataset.size(), n, rng);
  std::sort(picked.begin(), picked.end());
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i : picked) out.push_back(dataset[i]);
  return TextDataset(dataset.name(), std::move(out));
}

}  // namespace codec
