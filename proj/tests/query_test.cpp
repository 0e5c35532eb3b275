// Copyright 2026 The Data Portrait Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"

#include "dataportrait/error.hpp"
#include "dataportrait/ingest.hpp"
#include "dataportrait/query.hpp"
#include "dataportrait/textnorm.hpp"
#include "test_util.hpp"

using namespace dataportrait;
using dataportrait::testing::random_text;

namespace {

BloomFilter portrait_of(const std::vector<std::string>& docs, std::uint32_t width, std::uint64_t capacity = 100'000,
                        double fpr = 1e-6) {
  FilterParams p = plan_parameters(capacity, fpr);
  p.ngram_width = width;
  p.stride = width;
  BloomFilter f(p);
  for (const auto& d : docs) ingest_document(f, d);
  return f;
}

std::vector<bool> flags_at(std::size_t size, std::initializer_list<std::size_t> on) {
  std::vector<bool> flags(size, false);
  for (auto i : on) flags[i] = true;
  return flags;
}

std::vector<std::size_t> true_positions(const std::vector<bool>& flags) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) out.push_back(i);
  }
  return out;
}

/// Oracle: tiles of a document tiled from 0 that lie wholly inside [offset, offset + length).
std::size_t tiles_inside(std::size_t offset, std::size_t length, std::size_t width) {
  std::size_t count = 0;
  for (std::size_t t = 0; t * width + width <= offset + length; ++t) {
    if (t * width >= offset) ++count;
  }
  return count;
}

/// Text made of pairwise distinct CJK scalars, so no window can match a tile by coincidence.
std::string distinct_text(std::size_t first, std::size_t length) {
  std::u32string out;
  for (std::size_t i = 0; i < length; ++i) out.push_back(static_cast<char32_t>(0x4E00 + first + i));
  return encode_utf8(out);
}

}  // namespace

TEST_CASE("chain") {
  SUBCASE("width-spaced run") {
    const auto chains = chain(flags_at(12, {0, 4, 8}), 4);
    REQUIRE(chains.size() == 1);
    CHECK(chains[0].start_norm == 0);
    CHECK(chains[0].count == 3);
    CHECK(chains[0].char_length == 12);
  }
  SUBCASE("other spacing gives singletons") {
    const auto chains = chain(flags_at(8, {0, 5}), 4);
    REQUIRE(chains.size() == 2);
    CHECK(chains[0].count == 1);
    CHECK(chains[1].count == 1);
    CHECK(chains[1].start_norm == 5);
  }
  SUBCASE("no matches") { CHECK(chain(std::vector<bool>(20, false), 4).empty()); }
  SUBCASE("interleaved residues form separate chains") {
    const auto chains = chain(flags_at(20, {0, 1, 4, 5, 9, 12}), 4);
    REQUIRE(chains.size() == 3);
    CHECK(chains[0].start_norm == 0);
    CHECK(chains[0].count == 2);
    CHECK(chains[1].start_norm == 1);
    CHECK(chains[1].count == 3);
    CHECK(chains[2].start_norm == 12);
  }
  SUBCASE("random flags: partition, maximality, spacing") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t width = 1 + rng() % 9;
      std::vector<bool> flags(rng() % 120);
      for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = rng() % 3 == 0;
      std::vector<int> covered(flags.size(), 0);
      for (const Chain& c : chain(flags, width)) {
        CHECK(c.char_length == c.count * width);
        for (std::size_t j = 0; j < c.count; ++j) {
          REQUIRE(flags[c.start_norm + j * width]);
          ++covered[c.start_norm + j * width];
        }
        if (c.start_norm >= width) CHECK_FALSE(flags[c.start_norm - width]);
        const std::size_t next = c.start_norm + c.count * width;
        if (next < flags.size()) CHECK_FALSE(flags[next]);
      }
      for (std::size_t i = 0; i < flags.size(); ++i) CHECK(covered[i] == (flags[i] ? 1 : 0));
    }
  }
}

TEST_CASE("check_document on the four-character example") {
  const BloomFilter aligned = portrait_of({"abcdefghijklmn"}, 4);
  SUBCASE("verbatim query chains all three tiles") {
    const QueryReport r = check_document(aligned, "abcdefghijklmn");
    CHECK(r.flags.size() == 11);
    CHECK(true_positions(r.flags) == std::vector<std::size_t>{0, 4, 8});
    REQUIRE(r.chains.size() == 1);
    REQUIRE(r.longest_chain);
    CHECK(r.longest_chain->count == 3);
    CHECK(r.longest_chain->char_length == 12);
    CHECK(r.longest_chain->text == "abcdefghijkl");
    CHECK(r.overlap_ratio == doctest::Approx(12.0 / 14.0));
    CHECK(r.expected_matches == doctest::Approx(2.75));
  }
  SUBCASE("short query straddling tiles misses") {
    const QueryReport r = check_document(aligned, "defg");
    CHECK(r.flags.size() == 1);
    CHECK(true_positions(r.flags).empty());
    CHECK(r.chains.empty());
    CHECK_FALSE(r.longest_chain);
  }

  // Corpus aligned one position later: tiles bcde, fghi, jklm.
  const BloomFilter shifted = portrait_of({"bcdefghijklmn"}, 4);
  SUBCASE("shifted alignment still chains three tiles") {
    const QueryReport r = check_document(shifted, "abcdefghijklmn");
    CHECK(true_positions(r.flags) == std::vector<std::size_t>{1, 5, 9});
    REQUIRE(r.longest_chain);
    CHECK(r.longest_chain->count == 3);
    CHECK(r.longest_chain->char_length == 12);
    CHECK(r.longest_chain->text == "bcdefghijklm");
  }
  SUBCASE("2w-1 query hits exactly one tile") {
    const QueryReport r = check_document(shifted, "defghij");
    CHECK(true_positions(r.flags) == std::vector<std::size_t>{2});
    REQUIRE(r.chains.size() == 1);
    CHECK(r.chains[0].text == "fghi");
  }
  SUBCASE("shorter than width") {
    const QueryReport r = check_document(aligned, "abc");
    CHECK(r.flags.empty());
    CHECK(r.chains.empty());
    CHECK(r.overlap_ratio == 0.0);
    CHECK_FALSE(classify_membership(r));
  }
}

TEST_CASE("chains report original offsets") {
  const BloomFilter f = portrait_of({"abcd efgh ijkl"}, 5);
  const std::string raw = "xx  abcd\n\t efgh ijkl";
  // normalized "xx abcd efgh ijkl"; tiles "abcd ", "efgh " at normalized 3, 8
  const QueryReport r = check_document(f, raw);
  REQUIRE(r.longest_chain);
  CHECK(r.longest_chain->start_norm == 3);
  CHECK(r.longest_chain->count == 2);
  CHECK(r.longest_chain->text == "abcd efgh ");
  CHECK(r.longest_chain->start_orig == 4);
  // last character is the space collapsed from "\n\t " at raw 8, then "efgh " ends at raw 15
  CHECK(r.longest_chain->end_orig == 16);
  CHECK(raw.substr(4, 12) == "abcd\n\t efgh ");
}

TEST_CASE("longest chain ties go to the smallest start") {
  const BloomFilter f = portrait_of({"aaaabbbb", "ccccdddd"}, 4);
  const QueryReport r = check_document(f, "ccccdddd-aaaabbbb");
  REQUIRE(r.chains.size() == 2);
  REQUIRE(r.longest_chain);
  CHECK(r.longest_chain->start_norm == 0);
  CHECK(r.longest_chain->text == "ccccdddd");
  const auto sorted = chains_by_length(r);
  CHECK(sorted[0].start_norm == 0);
}

TEST_CASE("expected_matches") {
  CHECK(expected_matches(150, 50) == doctest::Approx(2.02));
  CHECK(expected_matches(14, 4) == doctest::Approx(2.75));
  CHECK(expected_matches(49, 50) == 0.0);
  CHECK(expected_matches(50, 50) == doctest::Approx(0.02));
}

TEST_CASE("alignment-count law against brute force") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t width = 2 + rng() % 9;
    const std::size_t length = width + rng() % (6 * width);
    const std::size_t a = length / width;
    const std::size_t b = length % width;
    const std::string needle = distinct_text(0, length);
    CAPTURE(width);
    CAPTURE(length);
    double total = 0.0;
    std::size_t favourable = 0;
    for (std::size_t offset = 0; offset < width; ++offset) {
      // Embed the needle at `offset` in an otherwise fresh document.
      const std::string doc = distinct_text(10'000, offset) + needle + distinct_text(20'000, width);
      const BloomFilter f = portrait_of({doc}, static_cast<std::uint32_t>(width));
      const QueryReport r = check_document(f, needle);
      const std::size_t matched = true_positions(r.flags).size();
      CHECK(matched == tiles_inside(offset, length, width));
      CHECK((matched == a || matched + 1 == a));
      if (matched == a) ++favourable;
      total += static_cast<double>(matched);
    }
    CHECK(favourable == b + 1);
    CHECK(total / static_cast<double>(width) == doctest::Approx(expected_matches(length, width)).epsilon(1e-12));
  }
}

TEST_CASE("boundary guarantee") {
  std::mt19937_64 rng(5);
  const std::size_t width = 12;
  std::vector<std::string> docs;
  for (int i = 0; i < 50; ++i) docs.push_back(random_text(rng, 400));
  const BloomFilter f = portrait_of(docs, width);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::string& doc = docs[rng() % docs.size()];
    const std::size_t len = 2 * width - 1 + rng() % 40;
    const std::size_t start = rng() % (doc.size() - len);
    std::string query = doc.substr(start, len);
    if (query.front() == ' ' || query.back() == ' ') continue;  // trimmed by normalize
    const QueryReport r = check_document(f, query);
    CHECK(std::count(r.flags.begin(), r.flags.end(), true) >= 1);
  }
}

TEST_CASE("chain reconstruction and determinism") {
  std::mt19937_64 rng(21);
  std::vector<std::string> docs;
  for (int i = 0; i < 20; ++i) docs.push_back(random_text(rng, 1000));
  const BloomFilter f = portrait_of(docs, 8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::string& doc = docs[rng() % docs.size()];
    const std::size_t start = rng() % 500;
    const std::string query = random_text(rng, 30) + "  " + doc.substr(start, 300) + "\n" + random_text(rng, 30);
    const QueryReport r = check_document(f, query);
    const NormalizedText nt = normalize(query);
    for (const Chain& c : r.chains) {
      std::string joined;
      for (std::size_t j = 0; j < c.count; ++j) joined += std::string(nt.utf8_slice(c.start_norm + j * 8, 8));
      CHECK(joined == c.text);
      CHECK(joined == nt.utf8_slice(c.start_norm, c.char_length));
    }
    CHECK(check_document(f, query) == r);
  }
}

TEST_CASE("spurious chains on independent text are rare") {
  std::mt19937_64 rng(77);
  FilterParams p = plan_parameters(200'000, 1e-3);
  BloomFilter f(p);
  for (int i = 0; i < 4000; ++i) ingest_document(f, random_text(rng, 2500));
  std::size_t positions = 0;
  std::size_t chained = 0;
  std::size_t single = 0;
  for (int i = 0; i < 100; ++i) {
    const QueryReport r = check_document(f, random_text(rng, 1049));
    positions += r.flags.size();
    for (const Chain& c : r.chains) (c.count >= 2 ? chained : single) += 1;
  }
  MESSAGE("positions " << positions << ", isolated matches " << single << ", chains >= 2: " << chained);
  // Expected spurious chains ~ positions * fpr^2 = 0.1.
  CHECK(chained <= 2);
  CHECK(static_cast<double>(single) / static_cast<double>(positions) < 2e-3);
}

TEST_CASE("classify_membership and chain_fp_probability") {
  QueryReport r;
  r.overlap_ratio = 0.95;
  CHECK(classify_membership(r));
  r.overlap_ratio = 0.9;
  CHECK_FALSE(classify_membership(r));
  CHECK(classify_membership(r, 0.5));
  CHECK_FALSE(classify_membership(QueryReport{}));

  CHECK(chain_fp_probability(1, 1e-3) == doctest::Approx(1e-3));
  CHECK(chain_fp_probability(3, 1e-3) == doctest::Approx(1e-9));
  CHECK(chain_fp_probability(0, 0.3) == 1.0);
}

TEST_CASE("membership on verbatim corpus samples versus novel text") {
  std::mt19937_64 rng(4);
  std::vector<std::string> docs;
  for (int i = 0; i < 30; ++i) docs.push_back(random_text(rng, 1200));
  const BloomFilter f = portrait_of(docs, 50);
  for (const auto& d : docs) CHECK(classify_membership(check_document(f, d)));
  for (int i = 0; i < 30; ++i) CHECK_FALSE(classify_membership(check_document(f, random_text(rng, 1200))));
  CHECK_FALSE(classify_membership(check_document(f, "")));
}

TEST_CASE("expected_overlap") {
  std::mt19937_64 rng(12);
  std::vector<std::string> present;
  for (int i = 0; i < 10; ++i) present.push_back(random_text(rng, 150));
  const BloomFilter f = portrait_of(present, 50);

  std::vector<QueryReport> aligned;
  for (const auto& d : present) aligned.push_back(check_document(f, d));
  // Hand computation: each document contributes 3 matches against an expectation of 101/50.
  const OverlapSummary all = expected_overlap(aligned);
  CHECK(all.instances == 10);
  CHECK(all.expected_overlap_pct == doctest::Approx(100.0 * 30.0 / (10 * 2.02)));
  CHECK(all.expected_overlap_pct == doctest::Approx(148.51).epsilon(1e-3));
  CHECK(all.above_expectation);

  std::vector<QueryReport> half = aligned;
  for (int i = 0; i < 10; ++i) half.push_back(check_document(f, random_text(rng, 150)));
  CHECK(expected_overlap(half).expected_overlap_pct == doctest::Approx(74.26).epsilon(1e-3));

  std::vector<QueryReport> none;
  for (int i = 0; i < 10; ++i) none.push_back(check_document(f, random_text(rng, 150)));
  CHECK(expected_overlap(none).expected_overlap_pct == 0.0);

  CHECK_THROWS_AS(expected_overlap(std::vector<QueryReport>{}), Error);
}

TEST_CASE("render_text lists chains longest first") {
  const BloomFilter f = portrait_of({"aaaabbbbcccc", "zzzz"}, 4);
  const std::string text = render_text(check_document(f, "zzzz-aaaabbbbcccc"));
  CHECK(text.find("MEMBER") == std::string::npos);
  const auto longest = text.find("aaaabbbbcccc");
  const auto shorter = text.find("zzzz", text.find("inferred chains"));
  CHECK(longest != std::string::npos);
  CHECK(shorter != std::string::npos);
  CHECK(longest < shorter);
}
