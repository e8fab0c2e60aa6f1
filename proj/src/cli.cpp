#include "codec/cli.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "codec/errors.hpp"
#include "codec/evaluation.hpp"
#include "codec/http_provider.hpp"
#include "codec/lab.hpp"
#include "codec/report.hpp"
#include "codec/synth.hpp"
#include "codec/toylm.hpp"

namespace codec::cli {

using nlohmann::json;
namespace fs = std::filesystem;

DatasetSpec parse_dataset_arg(std::string_view arg) {
  DatasetSpec spec;
  const auto colon = arg.rfind(':');
  if (colon != std::string_view::npos) {
    const auto suffix = arg.substr(colon + 1);
    if (suffix == "jsonl" || suffix == "text_dir" || suffix == "raw_text") {
      spec.path = std::string(arg.substr(0, colon));
      spec.format = parse_dataset_format(suffix);
      return spec;
    }
  }
  spec.path = std::string(arg);
  std::error_code ec;
  if (fs::is_directory(spec.path, ec)) spec.format = DatasetFormat::text_dir;
  else if (fs::path(spec.path).extension() == ".jsonl") spec.format = DatasetFormat::jsonl;
  else spec.format = DatasetFormat::raw_text;
  return spec;
}

void RunConfig::validate(std::string_view command) const {
  std::vector<std::string> problems;
  if (datasets.empty()) problems.push_back("at least one --dataset is required");
  if (command == "trace" && datasets.size() > 1) problems.push_back("trace takes exactly one dataset");
  if (command == "auc") {
    std::size_t seen = 0, unseen = 0;
    for (const auto& d : datasets) {
      if (d.label == "seen") ++seen;
      else if (d.label == "unseen") ++unseen;
      else problems.push_back("dataset " + d.path + " needs a seen/unseen label");
    }
    if (!datasets.empty() && (seen == 0 || unseen == 0)) {
      problems.push_back("auc needs at least one seen and one unseen dataset");
    }
  }
  if (provider == "toylm") {
    if (toylm_checkpoint.empty()) problems.push_back("--toylm-checkpoint is required for the toylm provider");
  } else if (provider == "http") {
    ProviderConfig pc{endpoint, model, max_prompt_chars, max_inflight, retry, auth_env_var, timeout_s};
    try {
      pc.validate();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  } else {
    problems.push_back("unknown provider '" + provider + "' (expected http or toylm)");
  }
  if (methods.empty()) problems.push_back("at least one method is required");
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size()) {
    problems.push_back("methods must not repeat");
  }
  ScoreConfig sc{codec, k_percent, max_inflight};
  try {
    sc.validate();
  } catch (const ConfigError& e) {
    problems.push_back(e.what());
  }
  if (max_samples < 2) problems.push_back("max_samples must be >= 2");
  if (chunk_chars == 0) problems.push_back("chunk_chars must be positive");
  if (out_dir.empty()) problems.push_back("out_dir must not be empty");
  for (const auto& e : emit) {
    if (e != "json" && e != "csv" && e != "md" && e != "svg") problems.push_back("unknown --emit format '" + e + "'");
  }
  if (problems.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ConfigError(msg);
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  RunConfig c;
  std::vector<std::string> problems;
  auto get = [&](const json& obj, const char* key, auto& dst) {
    if (!obj.contains(key)) return;
    try {
      obj.at(key).get_to(dst);
    } catch (const json::exception&) {
      problems.push_back(std::string("bad value for '") + key + "'");
    }
  };
  static const std::set<std::string> known = {
      "datasets",  "provider",  "methods",     "n_context",   "n_seeds", "skip_tokens",  "separator", "seed",
      "k_percent", "max_samples", "chunk_chars", "out_dir",   "emit",    "max_inflight", "timestamp"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) problems.push_back("unknown config key '" + k + "'");
  }
  if (j.contains("datasets")) {
    for (const auto& d : j["datasets"]) {
      if (d.is_string()) {
        c.datasets.push_back(parse_dataset_arg(d.get<std::string>()));
      } else if (d.is_object() && d.contains("path")) {
        auto spec = parse_dataset_arg(d["path"].get<std::string>());
        if (d.contains("format")) spec.format = parse_dataset_format(d["format"].get<std::string>());
        if (d.contains("label")) spec.label = d["label"].get<std::string>();
        c.datasets.push_back(spec);
      } else {
        problems.push_back("datasets entries must be strings or objects with a path");
      }
    }
  }
  if (j.contains("provider")) {
    const auto& p = j["provider"];
    static const std::set<std::string> pkeys = {"kind",         "endpoint",         "model",     "checkpoint",
                                                "auth_env_var", "max_prompt_chars", "timeout_s", "retry"};
    for (const auto& [k, v] : p.items()) {
      if (!pkeys.count(k)) problems.push_back("unknown provider key '" + k + "'");
    }
    get(p, "kind", c.provider);
    get(p, "endpoint", c.endpoint);
    get(p, "model", c.model);
    get(p, "checkpoint", c.toylm_checkpoint);
    get(p, "auth_env_var", c.auth_env_var);
    get(p, "max_prompt_chars", c.max_prompt_chars);
    get(p, "timeout_s", c.timeout_s);
    if (p.contains("retry")) {
      const auto& r = p["retry"];
      get(r, "max_attempts", c.retry.max_attempts);
      get(r, "initial_backoff_ms", c.retry.initial_backoff_ms);
      get(r, "multiplier", c.retry.multiplier);
      get(r, "max_backoff_ms", c.retry.max_backoff_ms);
    }
  }
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
  }
  get(j, "n_context", c.codec.n_context);
  get(j, "n_seeds", c.codec.n_seeds);
  get(j, "skip_tokens", c.codec.skip_tokens);
  get(j, "separator", c.codec.separator);
  get(j, "seed", c.codec.master_seed);
  get(j, "k_percent", c.k_percent);
  get(j, "max_samples", c.max_samples);
  get(j, "chunk_chars", c.chunk_chars);
  get(j, "out_dir", c.out_dir);
  get(j, "emit", c.emit);
  get(j, "max_inflight", c.max_inflight);
  if (j.contains("timestamp")) c.timestamp = j["timestamp"].get<std::string>();
  if (!problems.empty()) {
    std::string msg = "invalid config file " + path.string() + ":";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

namespace {

// Raw flag values of the run commands; merged over the config file.
struct RunFlags {
  std::string config;
  std::vector<std::string> datasets, labels, methods, emit;
  std::string provider, endpoint, model, checkpoint, out_dir, timestamp, auth_env;
  std::size_t n_context = 0, seeds = 0, skip = 0, max_samples = 0, chunk_chars = 0, max_inflight = 0;
  std::size_t max_prompt_chars = 0;
  double k_percent = 0;
  std::uint64_t seed = 0;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }
};

void add_codec_flags(CLI::App* app, RunFlags& f) {
  f.opts["--n-context"] = app->add_option("--n-context", f.n_context, "context samples per prompt (default 1)");
  f.opts["--seeds"] = app->add_option("--seeds", f.seeds, "context seeds averaged per sample (default 5)");
  f.opts["--skip-tokens"] = app->add_option("--skip-tokens", f.skip, "leading target tokens ignored (default 10)");
  f.opts["--seed"] = app->add_option("--seed", f.seed, "master seed for context draws and subsampling");
  f.opts["--max-inflight"] = app->add_option("--max-inflight", f.max_inflight, "concurrent provider requests");
  f.opts["--out-dir"] = app->add_option("--out-dir", f.out_dir, "output directory");
}

void add_run_flags(CLI::App* app, RunFlags& f) {
  f.opts["--config"] = app->add_option("--config", f.config, "JSON config file");
  f.opts["--dataset"] = app->add_option("--dataset", f.datasets, "PATH[:jsonl|text_dir|raw_text], repeatable");
  f.opts["--label"] = app->add_option("--label", f.labels, "seen|unseen per --dataset, in order");
  f.opts["--provider"] = app->add_option("--provider", f.provider, "http or toylm");
  f.opts["--endpoint"] = app->add_option("--endpoint", f.endpoint, "OpenAI-compatible base URL");
  f.opts["--model"] = app->add_option("--model", f.model, "model name sent to the endpoint");
  f.opts["--auth-env"] = app->add_option("--auth-env", f.auth_env, "environment variable holding the API key");
  f.opts["--max-prompt-chars"] = app->add_option("--max-prompt-chars", f.max_prompt_chars, "longest prompt sent");
  f.opts["--toylm-checkpoint"] = app->add_option("--toylm-checkpoint", f.checkpoint, "toy LM checkpoint file");
  f.opts["--method"] = app->add_option("--method", f.methods, "codec|loss|mink|zlib, repeatable");
  f.opts["--k-percent"] = app->add_option("--k-percent", f.k_percent, "Min-K% fraction (default 20)");
  f.opts["--max-samples"] = app->add_option("--max-samples", f.max_samples, "subsample size (default 1000)");
  f.opts["--chunk-chars"] = app->add_option("--chunk-chars", f.chunk_chars, "raw text chunk length (default 600)");
  f.opts["--emit"] = app->add_option("--emit", f.emit, "json|csv|md|svg, repeatable; json is always written");
  f.opts["--timestamp"] = app->add_option("--timestamp", f.timestamp, "report timestamp override");
  add_codec_flags(app, f);
}

RunConfig merge(const RunFlags& f) {
  RunConfig c = f.given("--config") ? load_run_config(f.config) : RunConfig{};
  std::vector<std::string> problems;
  if (f.given("--dataset")) {
    c.datasets.clear();
    for (const auto& d : f.datasets) c.datasets.push_back(parse_dataset_arg(d));
  }
  if (f.given("--label")) {
    if (f.labels.size() != c.datasets.size()) {
      problems.push_back("--label given " + std::to_string(f.labels.size()) + " times for " +
                         std::to_string(c.datasets.size()) + " datasets");
    } else {
      for (std::size_t i = 0; i < f.labels.size(); ++i) c.datasets[i].label = f.labels[i];
    }
  }
  if (f.given("--provider")) c.provider = f.provider;
  if (f.given("--endpoint")) c.endpoint = f.endpoint;
  if (f.given("--model")) c.model = f.model;
  if (f.given("--auth-env")) c.auth_env_var = f.auth_env;
  if (f.given("--max-prompt-chars")) c.max_prompt_chars = f.max_prompt_chars;
  if (f.given("--toylm-checkpoint")) c.toylm_checkpoint = f.checkpoint;
  if (f.given("--method")) {
    c.methods.clear();
    for (const auto& m : f.methods) {
      try {
        c.methods.push_back(parse_method(m));
      } catch (const ConfigError& e) {
        problems.push_back(e.what());
      }
    }
  }
  if (f.given("--k-percent")) c.k_percent = f.k_percent;
  if (f.given("--max-samples")) c.max_samples = f.max_samples;
  if (f.given("--chunk-chars")) c.chunk_chars = f.chunk_chars;
  if (f.given("--emit")) c.emit = f.emit;
  if (f.given("--timestamp")) c.timestamp = f.timestamp;
  if (f.given("--n-context")) c.codec.n_context = f.n_context;
  if (f.given("--seeds")) c.codec.n_seeds = f.seeds;
  if (f.given("--skip-tokens")) c.codec.skip_tokens = f.skip;
  if (f.given("--seed")) c.codec.master_seed = f.seed;
  if (f.given("--max-inflight")) c.max_inflight = f.max_inflight;
  if (f.given("--out-dir")) c.out_dir = f.out_dir;
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return c;
}

bool emits(const RunConfig& c, std::string_view kind) {
  return std::find(c.emit.begin(), c.emit.end(), kind) != c.emit.end();
}

struct ProviderHandle {
  std::unique_ptr<LogprobProvider> provider;
  json settings;
};

ProviderHandle make_provider(const RunConfig& c) {
  ProviderHandle h;
  if (c.provider == "http") {
    ProviderConfig pc{c.endpoint, c.model, c.max_prompt_chars, c.max_inflight, c.retry, c.auth_env_var, c.timeout_s};
    h.provider = std::make_unique<HttpProvider>(pc);
    h.settings = {{"kind", "http"},
                  {"endpoint", c.endpoint},
                  {"model_id", c.model},
                  {"max_prompt_chars", c.max_prompt_chars},
                  {"timeout_s", c.timeout_s},
                  {"auth_env_var", c.auth_env_var},
                  {"retry",
                   {{"max_attempts", c.retry.max_attempts},
                    {"initial_backoff_ms", c.retry.initial_backoff_ms},
                    {"multiplier", c.retry.multiplier},
                    {"max_backoff_ms", c.retry.max_backoff_ms}}}};
  } else {
    auto model = std::make_shared<const ToyLm>(ToyLm::load(c.toylm_checkpoint));
    const auto& p = model->params();
    h.provider = std::make_unique<ToyLmProvider>(model);
    char fingerprint_hex[17];
    std::snprintf(fingerprint_hex, sizeof fingerprint_hex, "%016" PRIx64, model->fingerprint());
    h.settings = {{"kind", "toylm"},
                  {"checkpoint", c.toylm_checkpoint},
                  {"model_id", h.provider->model_id()},
                  {"fingerprint", fingerprint_hex},
                  {"params",
                   {{"order", p.order},
                    {"alpha", p.alpha},
                    {"cache_lambda", p.cache_lambda},
                    {"cache_window", p.cache_window}}}};
  }
  h.settings = redact_secrets(h.settings);
  return h;
}

std::vector<TextDataset> load_all(const RunConfig& c) {
  std::vector<TextDataset> out;
  std::set<std::string> names;
  for (const auto& d : c.datasets) {
    auto full = load_dataset(d.path, d.format, c.chunk_chars);
    out.push_back(sample_subset(full, c.max_samples, c.codec.master_seed));
    if (!names.insert(out.back().name()).second) {
      throw DataError("two datasets are named '" + out.back().name() + "'; rename one of them");
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// score and auc share everything except the AUC step.
int cmd_score_or_auc(const RunConfig& c, bool with_auc, std::ostream& out) {
  c.validate(with_auc ? "auc" : "score");
  auto datasets = load_all(c);
  auto handle = make_provider(c);
  const ScoreConfig sc{c.codec, c.k_percent, c.max_inflight};

  AuditReport report;
  report.timestamp = report_timestamp(c.timestamp);
  report.command = with_auc ? "auc" : "score";
  report.provider = handle.settings;
  report.codec = c.codec;
  report.k_percent = c.k_percent;
  report.chunk_chars = c.chunk_chars;
  report.max_samples = c.max_samples;
  report.sample_seed = c.codec.master_seed;
  report.methods = c.methods;
  report.compressor = "zlib " + compressor_version();

  std::vector<std::pair<std::string, std::string>> jsonl_files;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto& d = datasets[i];
    auto ev = evaluate_dataset(*handle.provider, d, c.methods, sc);
    DatasetEntry entry{d.name(),          c.datasets[i].path,         std::string(to_string(c.datasets[i].format)),
                       c.datasets[i].label, dataset_fingerprint(d),   d.size(),
                       ev.skipped_codec,    ev.skipped_baseline};
    report.datasets.push_back(std::move(entry));
    for (const auto& s : ev.scores) {
      if (s.method == Method::codec) jsonl_files.emplace_back(d.name() + ".deltas.jsonl", delta_records_jsonl(ev.records, s.config_hash));
      report.scores.push_back(s);
    }
  }

  std::vector<std::string> auc_lines;
  if (with_auc) {
    for (Method m : c.methods) {
      std::vector<double> seen, unseen;
      for (std::size_t i = 0; i < report.scores.size(); ++i) {
        const auto& s = report.scores[i];
        if (s.method != m) continue;
        const auto label = report.datasets[i / c.methods.size()].label;
        (label == "seen" ? seen : unseen).push_back(s.oriented_value);
      }
      report.auc.push_back({m, auc(seen, unseen)});
      auc_lines.push_back("auc " + std::string(to_string(m)) + " " + fmt(report.auc.back().result.auc));
    }
  }
  report.config_hash = report_config_hash(report);

  const fs::path dir = c.out_dir;
  write_file_atomic(dir / "report.json", emit_json(report));
  for (const auto& [name, body] : jsonl_files) write_file_atomic(dir / name, body);
  if (emits(c, "csv")) write_file_atomic(dir / "scores.csv", scores_csv(report.scores));
  if (emits(c, "md")) {
    std::vector<std::string> models{handle.provider->model_id()}, names;
    for (const auto& d : datasets) names.push_back(d.name());
    write_file_atomic(dir / "leaderboard.md", emit_markdown_table(report.scores, models, names));
  }
  if (emits(c, "svg")) {
    for (Method m : c.methods) {
      std::vector<LabelledScore> pts;
      for (std::size_t i = 0; i < report.scores.size(); ++i) {
        if (report.scores[i].method == m) {
          pts.push_back({report.scores[i], report.datasets[i / c.methods.size()].label == "seen"});
        }
      }
      write_file_atomic(dir / ("scatter-" + std::string(to_string(m)) + ".svg"), emit_scatter_svg(pts));
    }
  }

  for (const auto& s : report.scores) {
    if (s.method != Method::codec) {
      out << s.dataset_name << " " << to_string(s.method) << " " << fmt(s.value) << "\n";
    }
  }
  for (const auto& line : auc_lines) out << line << "\n";
  for (const auto& s : report.scores) {
    if (s.method == Method::codec) out << s.dataset_name << " codec " << fmt(s.value) << "\n";
  }
  return 0;
}

int cmd_trace(const RunConfig& c, const std::string& sample_id, std::ostream& out) {
  c.validate("trace");
  const auto dataset = load_dataset(c.datasets[0].path, c.datasets[0].format, c.chunk_chars);
  const std::size_t idx = dataset.find(sample_id);
  if (idx == dataset.size()) throw DataError("no sample '" + sample_id + "' in dataset " + dataset.name());
  auto handle = make_provider(c);
  const auto context = lab::first_seed_context(dataset, idx, c.codec);
  const auto trace = token_delta_trace(*handle.provider, context, dataset[idx], c.codec);
  const fs::path dir = c.out_dir;
  write_file_atomic(dir / "trace.csv", trace_csv(trace));
  if (emits(c, "svg")) write_file_atomic(dir / "trace.svg", emit_trace_svg(trace, "delta logprob, " + sample_id));
  out << "trace " << sample_id << " tokens " << trace.size() << " mean_delta " << mean_trace_delta(trace) << "\n";
  return 0;
}

std::string samples_jsonl(const TextDataset& d) {
  std::string out;
  for (const auto& s : d.samples()) out += canonical_json({{"id", s.id}, {"text", s.text}});
  return out;
}

std::vector<TextDataset> load_plain(const std::vector<std::string>& args, std::size_t chunk_chars) {
  if (args.empty()) throw ConfigError("at least one --dataset is required");
  std::vector<TextDataset> out;
  for (const auto& a : args) {
    const auto spec = parse_dataset_arg(a);
    out.push_back(load_dataset(spec.path, spec.format, chunk_chars));
  }
  return out;
}

ScoreConfig lab_score_config(const RunFlags& f) {
  ScoreConfig sc;
  if (f.given("--n-context")) sc.codec.n_context = f.n_context;
  if (f.given("--seeds")) sc.codec.n_seeds = f.seeds;
  if (f.given("--skip-tokens")) sc.codec.skip_tokens = f.skip;
  if (f.given("--seed")) sc.codec.master_seed = f.seed;
  if (f.given("--max-inflight")) sc.max_inflight = f.max_inflight;
  sc.validate();
  return sc;
}

std::string lab_out_dir(const RunFlags& f) { return f.given("--out-dir") ? f.out_dir : "lab-out"; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dataset contamination audits from per-token log-probabilities", "codec"};
  app.require_subcommand(1);

  RunFlags score_f, auc_f, trace_f;
  auto* score = app.add_subcommand("score", "score datasets with codec and baseline methods");
  add_run_flags(score, score_f);
  auto* auc_cmd = app.add_subcommand("auc", "dataset-level AUC over seen and unseen datasets");
  add_run_flags(auc_cmd, auc_f);
  auto* trace = app.add_subcommand("trace", "per-token confidence change for one sample");
  add_run_flags(trace, trace_f);
  std::string sample_id;
  trace->add_option("--sample-id", sample_id, "sample to trace")->required();

  auto* lab_cmd = app.add_subcommand("lab", "toy LM contamination experiments");
  lab_cmd->require_subcommand(1);

  std::string suite_name = "standard";
  std::size_t n_samples = 200;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "lab-corpora";
  auto* gen = lab_cmd->add_subcommand("gen", "write the synthetic corpora");
  gen->add_option("--suite", suite_name, "standard or difficulty")->check(CLI::IsMember({"standard", "difficulty"}));
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--n-samples", n_samples, "samples per corpus");
  gen->add_option("--out-dir", gen_out, "output directory");

  std::vector<std::string> train_ds;
  ToyLmParams params;
  std::size_t checkpoint_every = 0, chunk_chars = kDefaultChunkChars;
  bool lab_alphabet = false;
  std::string train_out = "lab-model";
  auto* train_cmd = lab_cmd->add_subcommand("train", "train a toy LM checkpoint");
  train_cmd->add_option("--dataset", train_ds, "training corpora, repeatable")->required();
  train_cmd->add_option("--order", params.order, "n-gram order");
  train_cmd->add_option("--alpha", params.alpha, "Laplace constant");
  train_cmd->add_option("--cache-lambda", params.cache_lambda, "cache interpolation weight");
  train_cmd->add_option("--cache-window", params.cache_window, "cache window in characters");
  train_cmd->add_option("--checkpoint-every", checkpoint_every, "also write a checkpoint every N characters");
  train_cmd->add_option("--chunk-chars", chunk_chars, "raw text chunk length");
  train_cmd->add_flag("--lab-alphabet", lab_alphabet, "add every character the generator can emit to the vocabulary");
  train_cmd->add_option("--out-dir", train_out, "output directory");

  std::string ft_in, ft_out = "finetuned.json";
  std::vector<std::string> ft_ds;
  double ft_weight = 10.0;
  auto* ft = lab_cmd->add_subcommand("finetune", "add weighted counts of corpora to a checkpoint");
  ft->add_option("--toylm-checkpoint", ft_in, "input checkpoint")->required();
  ft->add_option("--dataset", ft_ds, "corpora, repeatable")->required();
  ft->add_option("--weight", ft_weight, "count weight (default 10)");
  ft->add_option("--out", ft_out, "output checkpoint");

  RunFlags prog_f;
  std::vector<std::string> prog_ckpts;
  auto* prog = lab_cmd->add_subcommand("progress", "codec score per checkpoint (CSV)");
  prog->add_option("--toylm-checkpoint", prog_ckpts, "checkpoints in training order, repeatable")->required();
  prog_f.opts["--dataset"] = prog->add_option("--dataset", prog_f.datasets, "corpora, repeatable")->required();
  add_codec_flags(prog, prog_f);

  RunFlags tr_f;
  std::string tr_ckpt;
  std::vector<double> fractions{1.0, 0.5, 0.25};
  std::uint64_t crop_seed = 0;
  auto* transfer = lab_cmd->add_subcommand("transfer", "codec score of cropped corpora (CSV)");
  transfer->add_option("--toylm-checkpoint", tr_ckpt, "checkpoint")->required();
  tr_f.opts["--dataset"] = transfer->add_option("--dataset", tr_f.datasets, "corpora, repeatable")->required();
  transfer->add_option("--fraction", fractions, "crop fractions, repeatable");
  transfer->add_option("--crop-seed", crop_seed, "crop seed");
  add_codec_flags(transfer, tr_f);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (score->parsed()) return cmd_score_or_auc(merge(score_f), false, out);
    if (auc_cmd->parsed()) return cmd_score_or_auc(merge(auc_f), true, out);
    if (trace->parsed()) return cmd_trace(merge(trace_f), sample_id, out);

    if (gen->parsed()) {
      const auto suite = suite_name == "difficulty" ? lab::difficulty_suite(gen_seed, n_samples)
                                                    : lab::standard_suite(gen_seed, n_samples);
      json manifest = {{"suite", suite_name}, {"seed", gen_seed}, {"seen", json::array()}, {"unseen", json::array()}};
      for (int cls = 0; cls < 2; ++cls) {
        for (const auto& d : cls == 0 ? suite.seen : suite.unseen) {
          write_file_atomic(fs::path(gen_out) / (d.name() + ".jsonl"), samples_jsonl(d));
          manifest[cls == 0 ? "seen" : "unseen"].push_back(d.name() + ".jsonl");
          out << (cls == 0 ? "seen " : "unseen ") << d.name() << " " << d.size() << "\n";
        }
      }
      write_file_atomic(fs::path(gen_out) / "suite.json", canonical_json(manifest));
      return 0;
    }
    if (train_cmd->parsed()) {
      params.validate();
      const auto sets = load_plain(train_ds, chunk_chars);
      const auto corpus = lab::concat(sets);
      const auto extra = lab_alphabet ? synth::lab_alphabet() : std::u32string();
      const auto cps = train(corpus, params, checkpoint_every, extra);
      fs::create_directories(train_out);
      if (checkpoint_every > 0) {
        for (const auto& cp : cps) {
          char name[64];
          std::snprintf(name, sizeof name, "ckpt-%012llu.json", static_cast<unsigned long long>(cp.step));
          cp.model->save(fs::path(train_out) / name);
          out << "checkpoint " << name << "\n";
        }
      }
      cps.back().model->save(fs::path(train_out) / "model.json");
      out << "model " << (fs::path(train_out) / "model.json").string() << " chars " << cps.back().step << "\n";
      return 0;
    }
    if (ft->parsed()) {
      if (!(ft_weight > 0.0)) throw ConfigError("--weight must be positive");
      const auto base = ToyLm::load(ft_in);
      const auto sets = load_plain(ft_ds, kDefaultChunkChars);
      const auto tuned = finetune(base, lab::concat(sets), ft_weight);
      if (fs::path(ft_out).has_parent_path()) fs::create_directories(fs::path(ft_out).parent_path());
      tuned.save(ft_out);
      out << "model " << ft_out << "\n";
      return 0;
    }
    if (prog->parsed()) {
      const auto sc = lab_score_config(prog_f);
      const auto sets = load_plain(prog_f.datasets, kDefaultChunkChars);
      std::vector<LabCheckpoint> cps;
      for (const auto& p : prog_ckpts) {
        auto m = std::make_shared<const ToyLm>(ToyLm::load(p));
        const auto step = static_cast<std::uint64_t>(m->mass());
        cps.push_back({step, std::move(m)});
      }
      const auto rows = lab::training_progress(cps, sets, sc);
      write_file_atomic(fs::path(lab_out_dir(prog_f)) / "progress.csv", progress_csv(rows));
      for (const auto& r : rows) out << r.step << " " << r.dataset << " codec " << fmt(r.score) << "\n";
      return 0;
    }
    if (transfer->parsed()) {
      const auto sc = lab_score_config(tr_f);
      const auto sets = load_plain(tr_f.datasets, kDefaultChunkChars);
      ToyLmProvider provider(std::make_shared<const ToyLm>(ToyLm::load(tr_ckpt)));
      const auto rows = lab::crop_transfer(provider, sets, fractions, crop_seed, sc);
      write_file_atomic(fs::path(lab_out_dir(tr_f)) / "transfer.csv", transfer_csv(rows));
      for (const auto& r : rows) out << r.fraction << " " << r.dataset << " codec " << fmt(r.score) << "\n";
      return 0;
    }
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ProviderError& e) {
    err << "provider error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 4;
  } catch (const UnscorableSample& e) {
    err << "data error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace codec::cli
