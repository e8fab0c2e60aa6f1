#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "codec/evaluation.hpp"
#include "codec/lab.hpp"
#include "codec/scoring.hpp"

namespace codec {

// Bump on any change to the report or record field set.
inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.3.0";

// Canonical JSON: object keys sorted bytewise, no whitespace, doubles as
// %.17g (non-finite as null), strings UTF-8 without \u escapes for non-ASCII,
// one trailing newline.
std::string canonical_json(const nlohmann::json& value);

// Replaces the value of any key that looks like a credential.
nlohmann::json redact_secrets(nlohmann::json value);

struct DatasetEntry {
  std::string name;
  std::string source;       // path as given
  std::string format;       // jsonl | text_dir | raw_text | generated
  std::string label;        // seen | unseen | "" (score runs)
  std::string fingerprint;
  std::size_t n_samples = 0;
  std::vector<std::string> skipped_codec;
  std::vector<std::string> skipped_baseline;

  bool operator==(const DatasetEntry&) const = default;
};

struct MethodAuc {
  Method method = Method::codec;
  AucResult result;
  bool operator==(const MethodAuc&) const = default;
};

struct AuditReport {
  int schema_version = kReportSchemaVersion;
  std::string tool_version = std::string(kToolVersion);
  std::string timestamp;
  std::string command;               // score | auc
  nlohmann::json provider = nlohmann::json::object();  // redacted settings
  CodecConfig codec;
  double k_percent = kDefaultKPercent;
  std::size_t chunk_chars = kDefaultChunkChars;
  std::size_t max_samples = kDefaultMaxSamples;
  std::uint64_t sample_seed = 0;
  std::vector<Method> methods;
  std::vector<DatasetEntry> datasets;
  std::vector<DatasetScore> scores;
  std::vector<MethodAuc> auc;        // auc runs only
  std::string compressor;            // zlib build used for the zlib baseline
  std::string config_hash;

  bool operator==(const AuditReport&) const = default;
};

// Digest over the run settings: everything except timestamp, tool version,
// dataset source paths, results and the hash itself.
std::string report_config_hash(const AuditReport& report);

nlohmann::json to_json(const AuditReport& report);
AuditReport report_from_json(const nlohmann::json& j);

std::string emit_json(const AuditReport& report);
AuditReport parse_report(std::string_view text);

// ISO-8601 UTC. An explicit value wins, then SOURCE_DATE_EPOCH, then the clock.
std::string report_timestamp(const std::optional<std::string>& explicit_value = std::nullopt);

// Rows = models, columns = datasets, CoDeC values as integer percentages,
// "-" where no score exists.
std::string emit_markdown_table(std::span<const DatasetScore> scores, std::span<const std::string> models,
                                std::span<const std::string> datasets);

struct LabelledScore {
  DatasetScore score;
  bool seen = false;
};

// One <circle> per score, class "seen" or "unseen"; x = value.
std::string emit_scatter_svg(std::span<const LabelledScore> scores);

// One <rect> bar per token; skipped or unaligned tokens get class "skipped".
std::string emit_trace_svg(std::span<const TracePoint> trace, std::string_view title = {});

// CSV writers; header row first, doubles as %.17g, one row per line.
std::string scores_csv(std::span<const DatasetScore> scores);
std::string context_sweep_csv(std::span<const ContextSweepRow> rows);
std::string size_sweep_csv(std::span<const SizeSweepRow> rows);
std::string progress_csv(std::span<const lab::ProgressRow> rows);
std::string transfer_csv(std::span<const lab::TransferRow> rows);
std::string trace_csv(std::span<const TracePoint> trace);

// One canonical JSON object per line.
std::string delta_records_jsonl(std::span<const DeltaRecord> records, const std::string& config_hash);

// Writes through a temporary file in the same directory and renames it into
// place; parent directories are created. Throws DataError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace codec
