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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dataportrait/bloom_filter.hpp"

namespace dataportrait {

inline constexpr double kMembershipThreshold = 0.9;

/// A maximal run of matching windows spaced exactly ngram_width apart. The
/// span is inferred: the sketch cannot confirm the tiles were adjacent in
/// the corpus.
struct Chain {
  std::size_t start_norm = 0;
  std::size_t count = 0;
  std::size_t char_length = 0;  ///< count * ngram_width
  std::size_t start_orig = 0;   ///< original scalar index of the first character
  std::size_t end_orig = 0;     ///< one past the original index of the last character
  std::string text;             ///< normalized text, UTF-8

  friend bool operator==(const Chain&, const Chain&) = default;
};

struct QueryReport {
  std::uint32_t ngram_width = 0;
  std::vector<bool> flags;  ///< membership of the window starting at each normalized index
  std::vector<Chain> chains;  ///< ordered by start_norm
  std::optional<Chain> longest_chain;
  std::size_t doc_norm_length = 0;
  double expected_matches = 0.0;
  double overlap_ratio = 0.0;

  friend bool operator==(const QueryReport&, const QueryReport&) = default;
};

/// Group true flags into maximal runs with common difference `width`.
/// Only start_norm, count and char_length are filled in.
std::vector<Chain> chain(const std::vector<bool>& flags, std::size_t width);

/// normalize -> sliding windows -> contains -> chain.
QueryReport check_document(const BloomFilter& filter, std::string_view raw);

/// Alignment-averaged number of tiles fully inside a string of `length`:
/// (N - w + 1) / w, or 0 when N < w.
double expected_matches(std::size_t length, std::size_t width);

/// overlap_ratio > threshold.
bool classify_membership(const QueryReport& report, double threshold = kMembershipThreshold);

/// fpr ^ count: chance that `count` chained windows are all false positives.
double chain_fp_probability(std::size_t count, double fpr);

struct OverlapSummary {
  std::string dataset_name;
  std::uint64_t instances = 0;
  double expected_overlap_pct = 0.0;
  double total_query_seconds = 0.0;
  /// Set when the percentage exceeds 100, which aligned verbatim copies or
  /// false-positive chains can cause.
  bool above_expectation = false;
};

/// Streaming form of the corpus Expected Overlap metric:
///   100 * sum(longest chain count) / sum(expected_matches).
class OverlapAccumulator {
 public:
  void add(const QueryReport& report, double query_seconds = 0.0);
  /// Throws Error(kEmptyInput) when nothing was added.
  OverlapSummary summary(std::string dataset_name = {}) const;

 private:
  std::uint64_t instances_ = 0;
  double matched_ = 0.0;
  double expected_ = 0.0;
  double seconds_ = 0.0;
};

OverlapSummary expected_overlap(std::span<const QueryReport> reports);

/// Human-readable report with the chain table sorted by length, longest first.
std::string render_text(const QueryReport& report, double threshold = kMembershipThreshold);

/// Chains sorted by char_length descending, then start_norm ascending.
std::vector<Chain> chains_by_length(const QueryReport& report);

}  // namespace dataportrait
