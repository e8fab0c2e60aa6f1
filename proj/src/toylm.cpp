#include "codec/toylm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>

#include <json.hpp>

#include "codec/errors.hpp"
#include "codec/rng.hpp"
#include "codec/utf8.hpp"

namespace codec {

namespace {

constexpr int kMaxOrder = 8;
constexpr std::size_t kMaxVocab = 0xFFFF;
constexpr std::string_view kFormatTag = "codec-toylm";
constexpr int kFormatVersion = 1;

// Packs up to 7 ids (16 bits each, most recent first) and the length.
ToyLm::Key make_key(const std::uint32_t* history_end, std::size_t len) noexcept {
  ToyLm::Key key;
  for (std::size_t k = 0; k < len; ++k) {
    const std::uint64_t id = history_end[-1 - static_cast<std::ptrdiff_t>(k)];
    if (k < 4) {
      key.lo |= id << (16 * k);
    } else {
      key.hi |= id << (16 * (k - 4));
    }
  }
  key.hi |= static_cast<std::uint64_t>(len) << 48;
  return key;
}

// Chronological ids of a key (oldest first).
std::vector<std::uint32_t> unpack_key(const ToyLm::Key& key) {
  const std::size_t len = key.hi >> 48;
  std::vector<std::uint32_t> ids(len);
  for (std::size_t k = 0; k < len; ++k) {
    const std::uint64_t word = k < 4 ? key.lo >> (16 * k) : key.hi >> (16 * (k - 4));
    ids[len - 1 - k] = static_cast<std::uint32_t>(word & 0xFFFF);
  }
  return ids;
}

double node_count(const ToyLm::Node& node, std::uint32_t id) noexcept {
  auto it = std::lower_bound(node.next.begin(), node.next.end(), id,
                             [](const auto& entry, std::uint32_t v) { return entry.first < v; });
  return it != node.next.end() && it->first == id ? it->second : 0.0;
}

}  // namespace

void ToyLmParams::validate() const {
  std::string problems;
  if (order < 2 || order > kMaxOrder) problems += " order must be in [2, 8];";
  if (!(alpha > 0.0) || !std::isfinite(alpha)) problems += " alpha must be > 0;";
  if (!(cache_lambda >= 0.0 && cache_lambda < 1.0)) problems += " cache_lambda must be in [0, 1);";
  if (cache_window == 0) problems += " cache_window must be positive;";
  if (!problems.empty()) throw ConfigError("invalid toy LM parameters:" + problems);
}

std::size_t ToyLm::KeyHash::operator()(const Key& k) const noexcept {
  return static_cast<std::size_t>(splitmix64(k.lo ^ splitmix64(k.hi)));
}

ToyLm::ToyLm(ToyLmParams params, std::u32string_view alphabet) : params_(params) {
  params_.validate();
  alphabet_.assign(alphabet.begin(), alphabet.end());
  std::sort(alphabet_.begin(), alphabet_.end());
  alphabet_.erase(std::unique(alphabet_.begin(), alphabet_.end()), alphabet_.end());
  if (alphabet_.size() > kMaxVocab - 1) throw ConfigError("toy LM alphabet too large");
}

std::uint32_t ToyLm::id_of(char32_t c) const noexcept {
  auto it = std::lower_bound(alphabet_.begin(), alphabet_.end(), c);
  if (it == alphabet_.end() || *it != c) return kUnk;
  return static_cast<std::uint32_t>(it - alphabet_.begin()) + 1;
}

std::vector<std::uint32_t> ToyLm::encode(std::u32string_view text) const {
  std::vector<std::uint32_t> ids(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) ids[i] = id_of(text[i]);
  return ids;
}

void ToyLm::accumulate(std::span<const std::uint32_t> ids, std::size_t from, std::size_t to,
                       double weight) {
  const auto max_ctx = static_cast<std::size_t>(params_.order - 1);
  for (std::size_t i = from; i < to; ++i) {
    const std::size_t avail = std::min(i, max_ctx);
    for (std::size_t k = 0; k <= avail; ++k) {
      Node& node = table_[make_key(ids.data() + i, k)];
      node.total += weight;
      auto it = std::lower_bound(node.next.begin(), node.next.end(), ids[i],
                                 [](const auto& entry, std::uint32_t v) { return entry.first < v; });
      if (it != node.next.end() && it->first == ids[i]) {
        it->second += weight;
      } else {
        node.next.insert(it, {ids[i], weight});
      }
    }
  }
  mass_ += weight * static_cast<double>(to - from);
}

const ToyLm::Node* ToyLm::lookup(const std::uint32_t* history_end, std::size_t len) const {
  auto it = table_.find(make_key(history_end, len));
  return it == table_.end() ? nullptr : &it->second;
}

double ToyLm::global_prob_ids(const std::uint32_t* history_end, std::size_t history_len,
                              std::uint32_t next) const {
  const double alpha = params_.alpha;
  const double v = static_cast<double>(vocab_size());
  const std::size_t max_ctx = std::min<std::size_t>(history_len, params_.order - 1);
  for (std::size_t k = max_ctx; k >= 1; --k) {
    const Node* node = lookup(history_end, k);
    if (node && node->total >= kMinContextMass) {
      return (node_count(*node, next) + alpha) / (node->total + alpha * v);
    }
  }
  if (const Node* uni = lookup(history_end, 0)) {
    return (node_count(*uni, next) + alpha) / (uni->total + alpha * v);
  }
  return 1.0 / v;
}

double ToyLm::count(std::u32string_view context, char32_t next) const {
  const auto ids = encode(context);
  if (ids.size() >= static_cast<std::size_t>(params_.order)) return 0.0;
  const Node* node = lookup(ids.data() + ids.size(), ids.size());
  return node ? node_count(*node, id_of(next)) : 0.0;
}

double ToyLm::context_total(std::u32string_view context) const {
  const auto ids = encode(context);
  if (ids.size() >= static_cast<std::size_t>(params_.order)) return 0.0;
  const Node* node = lookup(ids.data() + ids.size(), ids.size());
  return node ? node->total : 0.0;
}

double ToyLm::global_prob(std::u32string_view history, char32_t next) const {
  const auto ids = encode(history);
  return global_prob_ids(ids.data() + ids.size(), ids.size(), id_of(next));
}

std::vector<double> ToyLm::next_distribution(std::u32string_view prefix) const {
  return next_distribution(prefix, params_.cache_lambda);
}

std::vector<double> ToyLm::next_distribution(std::u32string_view prefix, double cache_lambda) const {
  const auto ids = encode(prefix);
  const std::size_t v = vocab_size();
  const std::size_t start = ids.size() > params_.cache_window ? ids.size() - params_.cache_window : 0;
  std::vector<double> cache(v, 0.0);
  for (std::size_t i = start; i < ids.size(); ++i) cache[ids[i]] += 1.0;
  const double n = static_cast<double>(ids.size() - start);
  const double alpha = params_.alpha;
  std::vector<double> dist(v);
  for (std::uint32_t c = 0; c < v; ++c) {
    const double pg = global_prob_ids(ids.data() + ids.size(), ids.size(), c);
    const double pc = (cache[c] + alpha) / (n + alpha * static_cast<double>(v));
    dist[c] = (1.0 - cache_lambda) * pg + cache_lambda * pc;
  }
  return dist;
}

TokenScoreSeq ToyLm::logprobs(std::string_view prompt) const {
  const auto cps = utf8::decode(prompt);
  const auto ids = encode(cps);
  const std::size_t v = vocab_size();
  const double alpha = params_.alpha;
  const double lambda = params_.cache_lambda;
  const double denom_smooth = alpha * static_cast<double>(v);
  const std::size_t window = params_.cache_window;

  TokenScoreSeq seq;
  seq.prompt.assign(prompt);
  seq.tokens.resize(cps.size());
  std::vector<std::uint32_t> cache(v, 0);
  std::size_t in_window = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    auto& tok = seq.tokens[i];
    utf8::append(tok.text, cps[i]);
    tok.char_start = i;
    if (i > 0) {
      const double pg = global_prob_ids(ids.data() + i, i, ids[i]);
      const double pc = (cache[ids[i]] + alpha) / (static_cast<double>(in_window) + denom_smooth);
      tok.logprob = std::log((1.0 - lambda) * pg + lambda * pc);
    }
    ++cache[ids[i]];
    ++in_window;
    if (in_window > window) {
      --cache[ids[i - window]];
      --in_window;
    }
  }
  return seq;
}

bool ToyLm::operator==(const ToyLm& other) const {
  return params_ == other.params_ && alphabet_ == other.alphabet_ && mass_ == other.mass_ &&
         table_ == other.table_;
}

std::string ToyLm::to_json() const {
  using nlohmann::json;
  std::map<std::vector<std::uint32_t>, const Node*> sorted;
  for (const auto& [key, node] : table_) sorted.emplace(unpack_key(key), &node);
  json contexts = json::array();
  for (const auto& [ctx, node] : sorted) {
    json next = json::array();
    for (const auto& [id, c] : node->next) next.push_back({id, c});
    contexts.push_back({{"ctx", ctx}, {"total", node->total}, {"next", std::move(next)}});
  }
  std::vector<std::uint32_t> alphabet(alphabet_.begin(), alphabet_.end());
  json doc = {
      {"format", kFormatTag},
      {"version", kFormatVersion},
      {"params",
       {{"order", params_.order},
        {"alpha", params_.alpha},
        {"cache_lambda", params_.cache_lambda},
        {"cache_window", params_.cache_window}}},
      {"alphabet", alphabet},
      {"mass", mass_},
      {"contexts", std::move(contexts)},
  };
  return doc.dump();
}

ToyLm ToyLm::from_json(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed toy LM checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format") != kFormatTag) throw DataError("not a toy LM checkpoint");
    if (doc.at("version") != kFormatVersion) {
      throw DataError("unsupported toy LM checkpoint version " + doc.at("version").dump());
    }
    const auto& p = doc.at("params");
    ToyLmParams params{p.at("order").get<int>(), p.at("alpha").get<double>(),
                       p.at("cache_lambda").get<double>(), p.at("cache_window").get<std::size_t>()};
    const auto alphabet_ids = doc.at("alphabet").get<std::vector<std::uint32_t>>();
    ToyLm model(params, std::u32string(alphabet_ids.begin(), alphabet_ids.end()));
    if (model.alphabet_.size() != alphabet_ids.size()) throw DataError("checkpoint alphabet not canonical");
    model.mass_ = doc.at("mass").get<double>();
    for (const auto& entry : doc.at("contexts")) {
      const auto ctx = entry.at("ctx").get<std::vector<std::uint32_t>>();
      if (ctx.size() >= static_cast<std::size_t>(params.order)) throw DataError("checkpoint context too long");
      Node node;
      node.total = entry.at("total").get<double>();
      for (const auto& pair : entry.at("next")) {
        node.next.emplace_back(pair.at(0).get<std::uint32_t>(), pair.at(1).get<double>());
      }
      if (!std::is_sorted(node.next.begin(), node.next.end())) throw DataError("checkpoint counts not sorted");
      model.table_.emplace(make_key(ctx.data() + ctx.size(), ctx.size()), std::move(node));
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed toy LM checkpoint: ") + e.what());
  }
}

void ToyLm::save(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    out << to_json() << '\n';
    if (!out) throw DataError("error writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

ToyLm ToyLm::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read toy LM checkpoint '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

std::uint64_t ToyLm::fingerprint() const { return fnv1a64(to_json()); }

class ToyLmTrainer {
 public:
  // Adds counts for positions [from, to) of `ids`; histories may reach back
  // before `from` but never outside `ids`.
  static void feed(ToyLm& model, std::span<const std::uint32_t> ids, std::size_t from, std::size_t to,
                   double weight) {
    model.accumulate(ids, from, to, weight);
  }
  static std::vector<std::uint32_t> encode(const ToyLm& model, std::u32string_view text) {
    return model.encode(text);
  }
};

std::vector<LabCheckpoint> train(std::span<const Sample> corpus, const ToyLmParams& params,
                                 std::size_t checkpoint_every, std::u32string_view extra_alphabet) {
  params.validate();
  if (corpus.empty()) throw DataError("cannot train on an empty corpus");
  std::vector<std::u32string> texts;
  texts.reserve(corpus.size());
  std::u32string alphabet(extra_alphabet);
  for (const auto& s : corpus) {
    texts.push_back(utf8::decode(s.text));
    alphabet += texts.back();
  }
  ToyLm model(params, alphabet);

  std::vector<LabCheckpoint> checkpoints;
  std::uint64_t step = 0;
  if (checkpoint_every > 0) checkpoints.push_back({0, std::make_shared<const ToyLm>(model)});
  std::uint64_t next_checkpoint = checkpoint_every;
  for (const auto& text : texts) {
    const auto ids = ToyLmTrainer::encode(model, text);
    std::size_t pos = 0;
    while (pos < ids.size()) {
      std::size_t take = ids.size() - pos;
      if (checkpoint_every > 0) take = std::min<std::uint64_t>(take, next_checkpoint - step);
      ToyLmTrainer::feed(model, ids, pos, pos + take, 1.0);
      pos += take;
      step += take;
      if (checkpoint_every > 0 && step == next_checkpoint) {
        checkpoints.push_back({step, std::make_shared<const ToyLm>(model)});
        next_checkpoint += checkpoint_every;
      }
    }
  }
  if (checkpoints.empty() || checkpoints.back().step != step) {
    checkpoints.push_back({step, std::make_shared<const ToyLm>(std::move(model))});
  }
  return checkpoints;
}

ToyLm train_model(std::span<const Sample> corpus, const ToyLmParams& params, std::u32string_view extra_alphabet) {
  auto checkpoints = train(corpus, params, 0, extra_alphabet);
  return *checkpoints.back().model;
}

ToyLm finetune(const ToyLm& model, std::span<const Sample> corpus, double weight) {
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ConfigError("finetune weight must be positive");
  if (corpus.empty()) throw DataError("cannot finetune on an empty corpus");
  ToyLm out = model;
  for (const auto& s : corpus) {
    const auto ids = ToyLmTrainer::encode(out, utf8::decode(s.text));
    ToyLmTrainer::feed(out, ids, 0, ids.size(), weight);
  }
  return out;
}

Sample augment_crop(const Sample& sample, double fraction, std::uint64_t rng_seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("crop fraction must be in (0, 1]");
  const auto cps = utf8::decode(sample.text);
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(cps.size())));
  if (keep < 1) throw DataError("crop of sample '" + sample.id + "' is empty");
  if (keep >= cps.size()) return sample;
  Rng rng(derive_seed({rng_seed, fnv1a64(sample.id), fnv1a64("augment_crop")}));
  const auto start = static_cast<std::size_t>(rng.uniform_index(cps.size() - keep + 1));
  return {sample.id, utf8::encode(std::u32string_view(cps).substr(start, keep))};
}

ToyLmProvider::ToyLmProvider(std::shared_ptr<const ToyLm> model, std::string name)
    : model_(std::move(model)) {
  if (!model_) throw ConfigError("toy LM provider needs a model");
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(model_->fingerprint()));
  id_ = std::move(name) + "@" + buf;
}

TokenScoreSeq ToyLmProvider::score(const std::string& prompt) const { return model_->logprobs(prompt); }

}  // namespace codec
