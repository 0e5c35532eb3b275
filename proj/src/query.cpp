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

#include "dataportrait/query.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dataportrait/error.hpp"
#include "dataportrait/textnorm.hpp"

namespace dataportrait {

std::vector<Chain> chain(const std::vector<bool>& flags, std::size_t width) {
  std::vector<Chain> chains;
  if (width == 0) return chains;
  // owner[i]: index into chains of the chain holding flag i.
  std::vector<std::size_t> owner(flags.size(), 0);
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (!flags[i]) continue;
    if (i >= width && flags[i - width]) {
      owner[i] = owner[i - width];
      Chain& c = chains[owner[i]];
      ++c.count;
      c.char_length += width;
    } else {
      owner[i] = chains.size();
      Chain c;
      c.start_norm = i;
      c.count = 1;
      c.char_length = width;
      chains.push_back(std::move(c));
    }
  }
  return chains;
}

QueryReport check_document(const BloomFilter& filter, std::string_view raw) {
  const std::size_t width = filter.params().ngram_width;
  const NormalizedText nt = normalize(raw);

  QueryReport report;
  report.ngram_width = static_cast<std::uint32_t>(width);
  report.doc_norm_length = nt.size();
  report.expected_matches = expected_matches(nt.size(), width);
  report.flags.resize(sliding_count(nt.size(), width));
  for (std::size_t i = 0; i < report.flags.size(); ++i) {
    report.flags[i] = filter.contains(nt.utf8_slice(i, width));
  }

  report.chains = chain(report.flags, width);
  for (Chain& c : report.chains) {
    c.start_orig = nt.offset_map[c.start_norm];
    c.end_orig = nt.offset_map[c.start_norm + c.char_length - 1] + 1;
    c.text = std::string(nt.utf8_slice(c.start_norm, c.char_length));
    if (!report.longest_chain || c.char_length > report.longest_chain->char_length) report.longest_chain = c;
  }
  if (report.longest_chain && nt.size() > 0) {
    report.overlap_ratio =
        static_cast<double>(report.longest_chain->char_length) / static_cast<double>(nt.size());
  }
  return report;
}

double expected_matches(std::size_t length, std::size_t width) {
  if (width == 0 || length < width) return 0.0;
  return static_cast<double>(length - width + 1) / static_cast<double>(width);
}

bool classify_membership(const QueryReport& report, double threshold) { return report.overlap_ratio > threshold; }

double chain_fp_probability(std::size_t count, double fpr) {
  return std::pow(fpr, static_cast<double>(count));
}

void OverlapAccumulator::add(const QueryReport& report, double query_seconds) {
  ++instances_;
  if (report.longest_chain) matched_ += static_cast<double>(report.longest_chain->count);
  expected_ += report.expected_matches;
  seconds_ += query_seconds;
}

OverlapSummary OverlapAccumulator::summary(std::string dataset_name) const {
  if (instances_ == 0) throw Error(ErrorCode::kEmptyInput, "no query reports to summarize");
  OverlapSummary s;
  s.dataset_name = std::move(dataset_name);
  s.instances = instances_;
  s.expected_overlap_pct = expected_ > 0.0 ? 100.0 * matched_ / expected_ : 0.0;
  s.total_query_seconds = seconds_;
  s.above_expectation = s.expected_overlap_pct > 100.0;
  return s;
}

OverlapSummary expected_overlap(std::span<const QueryReport> reports) {
  OverlapAccumulator acc;
  for (const auto& r : reports) acc.add(r);
  return acc.summary();
}

std::vector<Chain> chains_by_length(const QueryReport& report) {
  std::vector<Chain> sorted = report.chains;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Chain& a, const Chain& b) { return a.char_length > b.char_length; });
  return sorted;
}

std::string render_text(const QueryReport& report, double threshold) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line,
                "normalized length %zu, width %u, windows %zu, expected matches %.4f\n"
                "overlap ratio %.4f -> %s (threshold %.2f)\n",
                report.doc_norm_length, report.ngram_width, report.flags.size(), report.expected_matches,
                report.overlap_ratio, classify_membership(report, threshold) ? "MEMBER" : "not a member",
                threshold);
  out += line;
  if (report.chains.empty()) {
    out += "no matching windows\n";
    return out;
  }
  out += "inferred chains (longest first):\n";
  std::snprintf(line, sizeof line, "%8s %8s %10s %10s  %s\n", "chars", "ngrams", "orig_start", "orig_end",
                "text");
  out += line;
  for (const Chain& c : chains_by_length(report)) {
    std::string preview = c.text;
    if (const std::u32string scalars = decode_utf8(c.text); scalars.size() > 60) {
      preview = encode_utf8(std::u32string_view(scalars).substr(0, 57)) + "...";
    }
    std::snprintf(line, sizeof line, "%8zu %8zu %10zu %10zu  ", c.char_length, c.count, c.start_orig, c.end_orig);
    out += line;
    out += preview;
    out += '\n';
  }
  return out;
}

}  // namespace dataportrait
