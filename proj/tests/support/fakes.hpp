#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <unistd.h>

#include "codec/provider.hpp"
#include "codec/utf8.hpp"

namespace codec::testing {

// Character tokens, logprob supplied by a callback of (prompt, position).
class FnProvider : public LogprobProvider {
 public:
  using Fn = std::function<double(const std::u32string& prompt, std::size_t pos)>;
  explicit FnProvider(Fn fn, std::string id = "fake") : fn_(std::move(fn)), id_(std::move(id)) {}

  TokenScoreSeq score(const std::string& prompt) const override {
    ++calls;
    TokenScoreSeq seq;
    seq.prompt = prompt;
    const auto cps = utf8::decode(prompt);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      ScoredToken t;
      t.text = utf8::encode(std::u32string(1, cps[i]));
      t.char_start = i;
      if (i > 0) t.logprob = fn_(cps, i);
      seq.tokens.push_back(std::move(t));
    }
    return seq;
  }
  std::string model_id() const override { return id_; }
  std::size_t max_prompt_chars() const override { return max_chars; }

  std::size_t max_chars = 0;
  mutable std::atomic<std::size_t> calls{0};

 private:
  Fn fn_;
  std::string id_;
};

// Fresh directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("codec-unit-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace codec::testing
