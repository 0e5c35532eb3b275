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
#include <string>
#include <string_view>
#include <vector>

namespace dataportrait {

/// Whitespace-collapsed text. Positions are Unicode scalar values, not bytes.
struct NormalizedText {
  std::u32string chars;
  /// offset_map[i] is the scalar index in the original text that produced chars[i].
  std::vector<std::size_t> offset_map;
  /// chars re-encoded as UTF-8; utf8_offsets[i] is the byte offset of chars[i]
  /// (one extra entry for the end).
  std::string utf8;
  std::vector<std::size_t> utf8_offsets{0};

  std::size_t size() const noexcept { return chars.size(); }
  bool empty() const noexcept { return chars.empty(); }

  std::string_view utf8_slice(std::size_t start, std::size_t length) const noexcept {
    return std::string_view(utf8).substr(utf8_offsets[start], utf8_offsets[start + length] - utf8_offsets[start]);
  }
};

/// A width-character window. Views borrow from the NormalizedText that produced them.
struct Ngram {
  std::size_t start = 0;
  std::u32string_view text;
  std::string_view utf8;
};

/// True for the six ASCII whitespace scalars (space, tab, LF, CR, FF, VT).
constexpr bool is_collapsible_space(char32_t c) noexcept {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v';
}

/// Malformed sequences decode to U+FFFD, one per offending byte.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view chars);
void append_utf8(std::string& out, char32_t c);

/// Collapse every whitespace run to a single space (mapped to the run's first
/// original index) and drop leading and trailing runs.
NormalizedText normalize(std::string_view raw);
NormalizedText normalize(std::u32string_view raw);

/// Tiles at 0, stride, 2*stride, ...; a tail shorter than width is dropped.
std::vector<Ngram> strided_ngrams(const NormalizedText& nt, std::size_t width, std::size_t stride);

/// One window at every start in [0, size - width].
std::vector<Ngram> sliding_ngrams(const NormalizedText& nt, std::size_t width);

/// Number of tiles strided_ngrams would produce for a text of `length` scalars.
constexpr std::size_t strided_count(std::size_t length, std::size_t width, std::size_t stride) noexcept {
  return length < width ? 0 : (length - width) / stride + 1;
}

constexpr std::size_t sliding_count(std::size_t length, std::size_t width) noexcept {
  return length < width ? 0 : length - width + 1;
}

}  // namespace dataportrait
