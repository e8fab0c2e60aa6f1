#include "codec/report.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <system_error>

#include <unistd.h>

#include "codec/errors.hpp"
#include "codec/rng.hpp"

namespace codec {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void dump(const json& v, std::string& out) {
  switch (v.type()) {
    case json::value_t::null:
    case json::value_t::discarded:
      out += "null";
      break;
    case json::value_t::boolean:
      out += v.get<bool>() ? "true" : "false";
      break;
    case json::value_t::number_integer:
      out += std::to_string(v.get<std::int64_t>());
      break;
    case json::value_t::number_unsigned:
      out += std::to_string(v.get<std::uint64_t>());
      break;
    case json::value_t::number_float:
      out += fmt_double(v.get<double>());
      break;
    case json::value_t::string:
      out += v.dump(-1, ' ', false, json::error_handler_t::replace);
      break;
    case json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& e : v) {
        if (!first) out += ',';
        first = false;
        dump(e, out);
      }
      out += ']';
      break;
    }
    case json::value_t::object: {
      // object_t is an ordered std::map, so iteration is already bytewise sorted.
      out += '{';
      bool first = true;
      for (const auto& [k, e] : v.items()) {
        if (!first) out += ',';
        first = false;
        out += json(k).dump(-1, ' ', false, json::error_handler_t::replace);
        out += ':';
        dump(e, out);
      }
      out += '}';
      break;
    }
    case json::value_t::binary:
      throw ConfigError("binary values cannot be emitted");
  }
}

std::string dump_line(const json& v) {
  std::string out;
  dump(v, out);
  return out;
}

bool looks_secret(std::string key) {
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  if (key == "auth_env_var") return false;  // the variable name, not its value
  for (const char* word : {"key", "token", "secret", "password", "authorization", "bearer", "credential"}) {
    if (key.find(word) != std::string::npos) return true;
  }
  return false;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

json codec_json(const CodecConfig& c) {
  return {{"n_context", c.n_context}, {"n_seeds", c.n_seeds},         {"skip_tokens", c.skip_tokens},
          {"separator", c.separator}, {"master_seed", c.master_seed}, {"first_seed", c.first_seed}};
}

CodecConfig codec_from(const json& j) {
  CodecConfig c;
  c.n_context = j.at("n_context").get<std::size_t>();
  c.n_seeds = j.at("n_seeds").get<std::size_t>();
  c.skip_tokens = j.at("skip_tokens").get<std::size_t>();
  c.separator = j.at("separator").get<std::string>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.first_seed = j.at("first_seed").get<std::size_t>();
  return c;
}

json score_json(const DatasetScore& s) {
  return {{"dataset", s.dataset_name},
          {"model_id", s.model_id},
          {"method", std::string(to_string(s.method))},
          {"value", s.value},
          {"oriented_value", s.oriented_value},
          {"n_samples_scored", s.n_samples_scored},
          {"n_samples_skipped", s.n_samples_skipped},
          {"config_hash", s.config_hash}};
}

DatasetScore score_from(const json& j) {
  DatasetScore s;
  s.dataset_name = j.at("dataset").get<std::string>();
  s.model_id = j.at("model_id").get<std::string>();
  s.method = parse_method(j.at("method").get<std::string>());
  s.value = j.at("value").get<double>();
  s.oriented_value = j.at("oriented_value").get<double>();
  s.n_samples_scored = j.at("n_samples_scored").get<std::size_t>();
  s.n_samples_skipped = j.at("n_samples_skipped").get<std::size_t>();
  s.config_hash = j.at("config_hash").get<std::string>();
  return s;
}

json dataset_json(const DatasetEntry& d) {
  return {{"name", d.name},
          {"source", d.source},
          {"format", d.format},
          {"label", d.label},
          {"fingerprint", d.fingerprint},
          {"n_samples", d.n_samples},
          {"skipped_codec", d.skipped_codec},
          {"skipped_baseline", d.skipped_baseline}};
}

DatasetEntry dataset_from(const json& j) {
  DatasetEntry d;
  d.name = j.at("name").get<std::string>();
  d.source = j.at("source").get<std::string>();
  d.format = j.at("format").get<std::string>();
  d.label = j.at("label").get<std::string>();
  d.fingerprint = j.at("fingerprint").get<std::string>();
  d.n_samples = j.at("n_samples").get<std::size_t>();
  d.skipped_codec = j.at("skipped_codec").get<std::vector<std::string>>();
  d.skipped_baseline = j.at("skipped_baseline").get<std::vector<std::string>>();
  return d;
}

// The settings part of a report, shared by the hash and the full document.
json settings_json(const AuditReport& r) {
  json methods = json::array();
  for (Method m : r.methods) methods.push_back(std::string(to_string(m)));
  json datasets = json::array();
  for (const auto& d : r.datasets) {
    datasets.push_back({{"name", d.name}, {"source", d.source}, {"format", d.format}, {"label", d.label},
                        {"fingerprint", d.fingerprint}, {"n_samples", d.n_samples}});
  }
  return {{"command", r.command},         {"provider", r.provider},       {"codec", codec_json(r.codec)},
          {"k_percent", r.k_percent},     {"chunk_chars", r.chunk_chars}, {"max_samples", r.max_samples},
          {"sample_seed", r.sample_seed}, {"methods", methods},           {"datasets", datasets},
          {"compressor", r.compressor},   {"schema_version", r.schema_version}};
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20 && c != '\t' && c != '\n') out += ' ';
        else out += c;
    }
  }
  return out;
}

std::string csv_field(std::string_view s) {
  std::string esc;
  for (char c : s) {
    switch (c) {
      case '\n': esc += "\\n"; break;
      case '\r': esc += "\\r"; break;
      case '\t': esc += "\\t"; break;
      case '\\': esc += "\\\\"; break;
      default: esc += c;
    }
  }
  if (esc.find_first_of(",\"") == std::string::npos && !esc.empty() && esc.front() != ' ' && esc.back() != ' ') {
    return esc;
  }
  std::string out = "\"";
  for (char c : esc) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string canonical_json(const json& value) { return dump_line(value) + "\n"; }

json redact_secrets(json value) {
  if (value.is_object()) {
    for (auto& [k, v] : value.items()) v = looks_secret(k) ? json("<redacted>") : redact_secrets(v);
  } else if (value.is_array()) {
    for (auto& v : value) v = redact_secrets(v);
  }
  return value;
}

std::string report_config_hash(const AuditReport& report) {
  // Content fingerprints identify the data; where it was read from does not matter.
  json settings = settings_json(report);
  for (auto& d : settings["datasets"]) d.erase("source");
  return hex64(fnv1a64(dump_line(settings)));
}

json to_json(const AuditReport& r) {
  json j = settings_json(r);
  json datasets = json::array();
  for (const auto& d : r.datasets) datasets.push_back(dataset_json(d));
  j["datasets"] = datasets;
  json scores = json::array();
  for (const auto& s : r.scores) scores.push_back(score_json(s));
  j["scores"] = scores;
  if (!r.auc.empty()) {
    json a = json::array();
    for (const auto& m : r.auc) {
      a.push_back({{"method", std::string(to_string(m.method))},
                   {"auc", m.result.auc},
                   {"n_pos", m.result.n_pos},
                   {"n_neg", m.result.n_neg},
                   {"ties", m.result.ties}});
    }
    j["auc"] = a;
  }
  j["tool_version"] = r.tool_version;
  j["timestamp"] = r.timestamp;
  j["config_hash"] = r.config_hash;
  j["units"] = {{"nll", "nats"},
                {"codec_skip_tokens_applies_to", "codec only; loss, mink and zlib use every scored token"}};
  return j;
}

AuditReport report_from_json(const json& j) {
  try {
    AuditReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw DataError("unsupported report schema version " + std::to_string(r.schema_version));
    }
    r.tool_version = j.at("tool_version").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.provider = j.at("provider");
    r.codec = codec_from(j.at("codec"));
    r.k_percent = j.at("k_percent").get<double>();
    r.chunk_chars = j.at("chunk_chars").get<std::size_t>();
    r.max_samples = j.at("max_samples").get<std::size_t>();
    r.sample_seed = j.at("sample_seed").get<std::uint64_t>();
    for (const auto& m : j.at("methods")) r.methods.push_back(parse_method(m.get<std::string>()));
    for (const auto& d : j.at("datasets")) r.datasets.push_back(dataset_from(d));
    for (const auto& s : j.at("scores")) r.scores.push_back(score_from(s));
    if (j.contains("auc")) {
      for (const auto& a : j.at("auc")) {
        MethodAuc m;
        m.method = parse_method(a.at("method").get<std::string>());
        m.result.auc = a.at("auc").get<double>();
        m.result.n_pos = a.at("n_pos").get<std::size_t>();
        m.result.n_neg = a.at("n_neg").get<std::size_t>();
        m.result.ties = a.at("ties").get<std::size_t>();
        r.auc.push_back(m);
      }
    }
    r.compressor = j.at("compressor").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string emit_json(const AuditReport& report) { return canonical_json(to_json(report)); }

AuditReport parse_report(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("report is not JSON: ") + e.what());
  }
  return report_from_json(j);
}

std::string report_timestamp(const std::optional<std::string>& explicit_value) {
  if (explicit_value) return *explicit_value;
  std::time_t t;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde != nullptr && *sde != '\0') {
    char* end = nullptr;
    const long long v = std::strtoll(sde, &end, 10);
    if (*end != '\0' || v < 0) throw ConfigError("SOURCE_DATE_EPOCH must be a non-negative integer");
    t = static_cast<std::time_t>(v);
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string emit_markdown_table(std::span<const DatasetScore> scores, std::span<const std::string> models,
                                std::span<const std::string> datasets) {
  std::string out = "| model |";
  for (const auto& d : datasets) out += " " + d + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < datasets.size(); ++i) out += "---:|";
  out += "\n";
  for (const auto& m : models) {
    out += "| " + m + " |";
    for (const auto& d : datasets) {
      const DatasetScore* hit = nullptr;
      for (const auto& s : scores) {
        if (s.method == Method::codec && s.model_id == m && s.dataset_name == d) hit = &s;
      }
      out += hit ? " " + std::to_string(std::lround(hit->value * 100.0)) + " |" : " - |";
    }
    out += "\n";
  }
  return out;
}

std::string emit_scatter_svg(std::span<const LabelledScore> scores) {
  constexpr double kLeft = 60, kWidth = 520, kTop = 40, kRow = 22;
  const double height = kTop + kRow * static_cast<double>(std::max<std::size_t>(scores.size(), 1)) + 60;
  const bool codec_axis =
      scores.empty() || std::all_of(scores.begin(), scores.end(), [](const auto& s) { return s.score.method == Method::codec; });
  double lo = 0.0, hi = 1.0;
  if (!codec_axis) {
    lo = hi = scores.front().score.value;
    for (const auto& s : scores) {
      lo = std::min(lo, s.score.value);
      hi = std::max(hi, s.score.value);
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  auto x_of = [&](double v) { return kLeft + (v - lo) / (hi - lo) * kWidth; };
  const std::string method = scores.empty() ? "codec" : std::string(to_string(scores.front().score.method));

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt2(kLeft + kWidth + 140) +
                    "\" height=\"" + fmt2(height) + "\" viewBox=\"0 0 " + fmt2(kLeft + kWidth + 140) + " " +
                    fmt2(height) + "\">\n";
  out += "<style>.seen{fill:#d62728}.unseen{fill:#1f77b4}text{font:11px sans-serif}</style>\n";
  out += "<text x=\"" + fmt2(kLeft) + "\" y=\"20\">" + xml_escape(method) + " score per model-dataset pair</text>\n";
  const double axis_y = height - 40;
  out += "<line x1=\"" + fmt2(kLeft) + "\" y1=\"" + fmt2(axis_y) + "\" x2=\"" + fmt2(kLeft + kWidth) + "\" y2=\"" +
         fmt2(axis_y) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", v);
    out += "<text x=\"" + fmt2(x_of(v)) + "\" y=\"" + fmt2(axis_y + 16) + "\" text-anchor=\"middle\">" + label +
           "</text>\n";
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const double y = kTop + kRow * (static_cast<double>(i) + 0.5);
    out += "<circle class=\"" + std::string(s.seen ? "seen" : "unseen") + "\" cx=\"" + fmt2(x_of(s.score.value)) +
           "\" cy=\"" + fmt2(y) + "\" r=\"5\"><title>" + xml_escape(s.score.dataset_name) + " / " +
           xml_escape(s.score.model_id) + ": " + fmt_double(s.score.value) + "</title></circle>\n";
    out += "<text x=\"" + fmt2(kLeft + kWidth + 10) + "\" y=\"" + fmt2(y + 4) + "\">" +
           xml_escape(s.score.dataset_name) + "</text>\n";
  }
  out += "<rect class=\"seen\" x=\"" + fmt2(kLeft) + "\" y=\"" + fmt2(height - 14) +
         "\" width=\"8\" height=\"8\"/><text x=\"" + fmt2(kLeft + 12) + "\" y=\"" + fmt2(height - 6) +
         "\">seen</text>\n";
  out += "<rect class=\"unseen\" x=\"" + fmt2(kLeft + 60) + "\" y=\"" + fmt2(height - 14) +
         "\" width=\"8\" height=\"8\"/><text x=\"" + fmt2(kLeft + 72) + "\" y=\"" + fmt2(height - 6) +
         "\">unseen</text>\n";
  out += "</svg>\n";
  return out;
}

std::string emit_trace_svg(std::span<const TracePoint> trace, std::string_view title) {
  constexpr double kLeft = 50, kWidth = 800, kTop = 30, kHalf = 120;
  double scale = 0.0;
  for (const auto& p : trace) scale = std::max(scale, std::fabs(p.delta_logprob));
  if (scale == 0.0) scale = 1.0;
  const double mid = kTop + kHalf;
  const double bar = trace.empty() ? kWidth : kWidth / static_cast<double>(trace.size());

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt2(kLeft + kWidth + 20) +
                    "\" height=\"" + fmt2(kTop + 2 * kHalf + 30) + "\">\n";
  out += "<style>.delta{fill:#2ca02c}.skipped{fill:#bbbbbb}text{font:11px sans-serif}</style>\n";
  out += "<text x=\"" + fmt2(kLeft) + "\" y=\"18\">" + xml_escape(title.empty() ? "per-token delta logprob" : title) +
         "</text>\n";
  out += "<line x1=\"" + fmt2(kLeft) + "\" y1=\"" + fmt2(mid) + "\" x2=\"" + fmt2(kLeft + kWidth) + "\" y2=\"" +
         fmt2(mid) + "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& p = trace[i];
    const double h = std::fabs(p.delta_logprob) / scale * kHalf;
    const double y = p.delta_logprob >= 0 ? mid - h : mid;
    out += "<rect class=\"" + std::string(p.skipped || !p.aligned ? "skipped" : "delta") + "\" x=\"" +
           fmt2(kLeft + bar * static_cast<double>(i)) + "\" y=\"" + fmt2(y) + "\" width=\"" + fmt2(bar) +
           "\" height=\"" + fmt2(h) + "\"><title>" + xml_escape(p.token_text) + " " + fmt_double(p.delta_logprob) +
           "</title></rect>\n";
  }
  char label[32];
  std::snprintf(label, sizeof label, "+%.3g", scale);
  out += "<text x=\"4\" y=\"" + fmt2(kTop + 10) + "\">" + label + "</text>\n";
  std::snprintf(label, sizeof label, "-%.3g", scale);
  out += "<text x=\"4\" y=\"" + fmt2(kTop + 2 * kHalf) + "\">" + label + "</text>\n";
  out += "</svg>\n";
  return out;
}

std::string scores_csv(std::span<const DatasetScore> scores) {
  std::string out = "dataset,model_id,method,value,oriented_value,n_samples_scored,n_samples_skipped,config_hash\n";
  for (const auto& s : scores) {
    out += csv_field(s.dataset_name) + "," + csv_field(s.model_id) + "," + std::string(to_string(s.method)) + "," +
           fmt_double(s.value) + "," + fmt_double(s.oriented_value) + "," + std::to_string(s.n_samples_scored) + "," +
           std::to_string(s.n_samples_skipped) + "," + s.config_hash + "\n";
  }
  return out;
}

std::string context_sweep_csv(std::span<const ContextSweepRow> rows) {
  std::string out = "n_context,dataset,label,score,min,max,gap\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n_context) + "," + csv_field(r.dataset) + "," + (r.seen ? "seen" : "unseen") + "," +
           fmt_double(r.score) + "," + fmt_double(r.min) + "," + fmt_double(r.max) + "," + fmt_double(r.gap) + "\n";
  }
  return out;
}

std::string size_sweep_csv(std::span<const SizeSweepRow> rows) {
  std::string out = "size,mean,min,max,repeats\n";
  for (const auto& r : rows) {
    out += std::to_string(r.size) + "," + fmt_double(r.mean) + "," + fmt_double(r.min) + "," + fmt_double(r.max) +
           "," + std::to_string(r.repeats) + "\n";
  }
  return out;
}

std::string progress_csv(std::span<const lab::ProgressRow> rows) {
  std::string out = "step,dataset,codec\n";
  for (const auto& r : rows) out += std::to_string(r.step) + "," + csv_field(r.dataset) + "," + fmt_double(r.score) + "\n";
  return out;
}

std::string transfer_csv(std::span<const lab::TransferRow> rows) {
  std::string out = "fraction,dataset,codec\n";
  for (const auto& r : rows) {
    out += fmt_double(r.fraction) + "," + csv_field(r.dataset) + "," + fmt_double(r.score) + "\n";
  }
  return out;
}

std::string trace_csv(std::span<const TracePoint> trace) {
  std::string out = "position,token,delta_logprob,skipped,aligned\n";
  for (const auto& p : trace) {
    out += std::to_string(p.position) + "," + csv_field(p.token_text) + "," + fmt_double(p.delta_logprob) + "," +
           (p.skipped ? "1" : "0") + "," + (p.aligned ? "1" : "0") + "\n";
  }
  return out;
}

std::string delta_records_jsonl(std::span<const DeltaRecord> records, const std::string& config_hash) {
  std::string out;
  for (const auto& r : records) {
    out += canonical_json({{"schema_version", kReportSchemaVersion},
                           {"config_hash", config_hash},
                           {"sample_id", r.sample_id},
                           {"baseline_mean", r.baseline_mean},
                           {"incontext_means", r.incontext_means},
                           {"delta", r.delta},
                           {"indicator", r.indicator},
                           {"context_ids_per_seed", r.context_ids_per_seed},
                           {"n_scored_tokens", r.n_scored_tokens}});
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.close();
    if (!f) {
      std::filesystem::remove(tmp, ec);
      throw DataError("cannot write " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot move report into place at " + path.string());
  }
}

}  // namespace codec
