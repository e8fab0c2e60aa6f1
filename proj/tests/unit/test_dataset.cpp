#include <doctest.h>

#include <random>
#include <set>
#include <string>
#include <vector>

#include "codec/dataset.hpp"
#include "codec/errors.hpp"
#include "codec/utf8.hpp"
#include "support/fakes.hpp"

using namespace codec;
using codec::testing::TempDir;
using codec::testing::write_text;

namespace {

std::vector<std::size_t> chunk_lengths(const std::string& text, std::size_t n) {
  std::vector<std::size_t> out;
  for (const auto& s : chunk_text(text, n)) out.push_back(utf8::length(s.text));
  return out;
}

TextDataset numbered(std::size_t n) {
  std::vector<Sample> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back({"s" + std::to_string(i), "text " + std::to_string(i)});
  return TextDataset("numbered", std::move(s));
}

}  // namespace

TEST_CASE("chunk_text lengths") {
  CHECK(chunk_lengths(std::string(1500, 'x'), 600) == std::vector<std::size_t>{600, 600, 300});
  CHECK(chunk_lengths(std::string(620, 'x'), 600) == std::vector<std::size_t>{620});
  CHECK(chunk_lengths(std::string(600, 'x'), 600) == std::vector<std::size_t>{600});
  CHECK(chunk_lengths(std::string(650, 'x'), 600) == std::vector<std::size_t>{600, 50});
  CHECK(chunk_lengths(std::string(10, 'x'), 600) == std::vector<std::size_t>{10});
}

TEST_CASE("chunk_text ids and errors") {
  const auto chunks = chunk_text(std::string(1300, 'a'), 600);
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[0].id == "chunk-0000");
  CHECK(chunks[2].id == "chunk-0002");
  CHECK_THROWS_AS(chunk_text("", 600), DataError);
  CHECK_THROWS_AS(chunk_text("abc", 0), ConfigError);
}

TEST_CASE("chunk_text property: chunks tile the text and respect scalar boundaries") {
  std::mt19937_64 rng(42);
  const std::u32string pool = U"ab \né中\U0001F600";
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 1 + rng() % 2000;
    std::u32string cps;
    for (std::size_t i = 0; i < len; ++i) cps.push_back(pool[rng() % pool.size()]);
    const auto text = utf8::encode(cps);
    const std::size_t n = 1 + rng() % 700;
    const auto chunks = chunk_text(text, n);
    std::string joined;
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      joined += chunks[k].text;
      const auto l = utf8::length(chunks[k].text);
      if (k + 1 < chunks.size()) {
        CHECK(l == n);
      } else if (chunks.size() > 1) {
        CHECK(l >= std::min(n, kMinTailChars));
        CHECK(l < n + kMinTailChars);
      }
    }
    CHECK(joined == text);
  }
}

TEST_CASE("TextDataset invariants") {
  CHECK_THROWS_AS(TextDataset("x", {{"a", "t"}}), DataError);
  CHECK_THROWS_AS(TextDataset("x", {{"a", "t"}, {"a", "u"}}), DataError);
  CHECK_THROWS_AS(TextDataset("x", {{"a", "t"}, {"b", ""}}), DataError);
  const TextDataset d("x", {{"a", "t"}, {"b", "u"}});
  CHECK(d.find("b") == 1);
  CHECK(d.find("zz") == d.size());
}

TEST_CASE("load_dataset jsonl synthesizes ids from line numbers") {
  TempDir dir("ds");
  write_text(dir / "three.jsonl", "{\"text\":\"a\"}\n{\"text\":\"b\"}\n{\"text\":\"c\"}\n");
  const auto d = load_dataset(dir / "three.jsonl", DatasetFormat::jsonl);
  CHECK(d.name() == "three");
  REQUIRE(d.size() == 3);
  CHECK(d[0].id == "0");
  CHECK(d[1].id == "1");
  CHECK(d[2].id == "2");
  CHECK(d[2].text == "c");
}

TEST_CASE("load_dataset jsonl keeps explicit ids and rejects bad lines") {
  TempDir dir("ds");
  write_text(dir / "ok.jsonl", "{\"id\":\"x\",\"text\":\"one\"}\n\n{\"id\":7,\"text\":\"two\"}\n");
  const auto d = load_dataset(dir / "ok.jsonl", DatasetFormat::jsonl);
  REQUIRE(d.size() == 2);
  CHECK(d[0].id == "x");
  CHECK(d[1].id == "7");

  write_text(dir / "bad.jsonl", "{\"text\":\"a\"}\nnot json\n");
  CHECK_THROWS_AS(load_dataset(dir / "bad.jsonl", DatasetFormat::jsonl), DataError);
  write_text(dir / "notext.jsonl", "{\"text\":\"a\"}\n{\"body\":\"b\"}\n");
  CHECK_THROWS_AS(load_dataset(dir / "notext.jsonl", DatasetFormat::jsonl), DataError);
  write_text(dir / "latin1.jsonl", "{\"text\":\"a\"}\n{\"text\":\"caf\xe9\"}\n");
  CHECK_THROWS_AS(load_dataset(dir / "latin1.jsonl", DatasetFormat::jsonl), DataError);
  CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl", DatasetFormat::jsonl), DataError);
}

TEST_CASE("load_dataset text_dir uses file names in lexicographic order") {
  TempDir dir("ds");
  write_text(dir / "corpus" / "b.txt", "second");
  write_text(dir / "corpus" / "a.txt", "first");
  const auto d = load_dataset(dir / "corpus", DatasetFormat::text_dir);
  REQUIRE(d.size() == 2);
  CHECK(d[0].id == "a.txt");
  CHECK(d[1].id == "b.txt");
  CHECK(d[0].text == "first");
  CHECK(d.name() == "corpus");
}

TEST_CASE("load_dataset raw_text chunks the file") {
  TempDir dir("ds");
  write_text(dir / "book.txt", std::string(1500, 'q'));
  const auto d = load_dataset(dir / "book.txt", DatasetFormat::raw_text, 600);
  REQUIRE(d.size() == 3);
  CHECK(d[2].text.size() == 300);
  CHECK(d.name() == "book");
}

TEST_CASE("parse_dataset_format") {
  CHECK(parse_dataset_format("jsonl") == DatasetFormat::jsonl);
  CHECK(parse_dataset_format("text_dir") == DatasetFormat::text_dir);
  CHECK(parse_dataset_format("raw_text") == DatasetFormat::raw_text);
  CHECK_THROWS_AS(parse_dataset_format("csv"), ConfigError);
  CHECK(to_string(DatasetFormat::raw_text) == "raw_text");
}

TEST_CASE("sample_subset") {
  const auto small = numbered(10);
  CHECK(sample_subset(small, 1000, 7) == small);

  const auto big = numbered(2000);
  const auto a = sample_subset(big, 1000, 7);
  const auto b = sample_subset(big, 1000, 7);
  const auto c = sample_subset(big, 1000, 8);
  CHECK(a == b);
  CHECK(a.size() == 1000);
  CHECK_FALSE(a == c);

  // Source order and no duplicates.
  std::size_t last = 0;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto at = big.find(a[i].id);
    REQUIRE(at < big.size());
    if (i > 0) CHECK(at > last);
    last = at;
    ids.insert(a[i].id);
  }
  CHECK(ids.size() == 1000);
}
