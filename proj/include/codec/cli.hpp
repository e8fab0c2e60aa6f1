#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codec/dataset.hpp"
#include "codec/http_provider.hpp"
#include "codec/scoring.hpp"

namespace codec::cli {

struct DatasetSpec {
  std::string path;
  DatasetFormat format = DatasetFormat::jsonl;
  std::string label;  // seen | unseen | ""

  bool operator==(const DatasetSpec&) const = default;
};

// "PATH[:FORMAT]". Without a suffix the format follows the path: a directory
// is text_dir, *.jsonl is jsonl, anything else raw_text.
DatasetSpec parse_dataset_arg(std::string_view arg);

// Effective settings of one run: config file values overridden by flags.
struct RunConfig {
  std::vector<DatasetSpec> datasets;
  std::string provider = "toylm";  // toylm | http
  std::string endpoint;
  std::string model;
  std::string toylm_checkpoint;
  std::string auth_env_var = "CODEC_API_KEY";
  std::size_t max_prompt_chars = 8192;
  int timeout_s = 120;
  RetryPolicy retry;
  std::vector<Method> methods{Method::codec};
  CodecConfig codec;
  double k_percent = kDefaultKPercent;
  std::size_t max_samples = kDefaultMaxSamples;
  std::size_t chunk_chars = kDefaultChunkChars;
  std::string out_dir = "codec-out";
  std::vector<std::string> emit{"json"};
  std::size_t max_inflight = 4;
  std::optional<std::string> timestamp;

  // Throws ConfigError listing every problem. `command` selects the
  // command-specific checks (score, auc, trace).
  void validate(std::string_view command) const;
};

// Reads the JSON config file format; unknown keys are an error.
RunConfig load_run_config(const std::filesystem::path& path);

// Runs the command line; returns the process exit code (0 ok, 2 config,
// 3 provider, 4 data, 1 anything else). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace codec::cli
