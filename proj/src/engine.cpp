#include "codec/engine.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include "codec/errors.hpp"

namespace codec {

namespace {

[[noreturn]] void rethrow_labelled(std::exception_ptr err, const std::string& label) {
  if (label.empty()) std::rethrow_exception(err);
  const std::string prefix = label + ": ";
  try {
    std::rethrow_exception(err);
  } catch (const TransportError& e) {
    throw TransportError(prefix + e.what(), e.status());
  } catch (const ProtocolError& e) {
    throw ProtocolError(prefix + e.what());
  } catch (const ProviderError& e) {
    throw ProviderError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const UnscorableSample& e) {
    throw UnscorableSample(prefix + e.what());
  }
}

}  // namespace

std::vector<TokenScoreSeq> score_batch(const LogprobProvider& provider, std::span<const std::string> prompts,
                                       std::size_t max_inflight, const RequestLabel& label) {
  if (max_inflight == 0) throw ConfigError("max_inflight must be >= 1");
  std::vector<TokenScoreSeq> out(prompts.size());
  std::vector<std::exception_ptr> errors(prompts.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto worker = [&] {
    // A claimed index is always processed, so every index below a failure
    // has been attempted and the reported error is the lowest one.
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= prompts.size()) return;
      try {
        out[i] = score_tokens(provider, prompts[i]);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };

  const std::size_t n_threads = std::min(max_inflight, prompts.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) rethrow_labelled(errors[i], label ? label(i) : std::string());
  }
  return out;
}

TokenScoreSeq CachingProvider::score(const std::string& prompt) const {
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(prompt); it != cache_.end()) {
      ++hits_;
      return *it->second;
    }
  }
  auto seq = inner_.score(prompt);
  std::lock_guard lock(mu_);
  ++misses_;
  if (!admit_ || admit_(prompt)) cache_.emplace(prompt, std::make_shared<const TokenScoreSeq>(seq));
  return seq;
}

std::size_t CachingProvider::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t CachingProvider::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

}  // namespace codec
