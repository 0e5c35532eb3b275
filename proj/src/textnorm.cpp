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

#include "dataportrait/textnorm.hpp"

namespace dataportrait {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

}  // namespace

std::u32string decode_utf8(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  const std::size_t n = bytes.size();
  while (i < n) {
    const auto b0 = static_cast<unsigned char>(bytes[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07, min = 0x10000;
    }
    bool ok = len != 0 && i + len <= n;
    for (std::size_t j = 1; ok && j < len; ++j) {
      const auto bj = static_cast<unsigned char>(bytes[i + j]);
      if ((bj & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (bj & 0x3F);
      }
    }
    if (ok && (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
    if (ok) {
      out.push_back(cp);
      i += len;
    } else {
      out.push_back(kReplacement);
      ++i;
    }
  }
  return out;
}

void append_utf8(std::string& out, char32_t c) {
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
}

std::string encode_utf8(std::u32string_view chars) {
  std::string out;
  out.reserve(chars.size());
  for (char32_t c : chars) append_utf8(out, c);
  return out;
}

NormalizedText normalize(std::u32string_view raw) {
  NormalizedText nt;
  nt.chars.reserve(raw.size());
  nt.offset_map.reserve(raw.size());
  nt.utf8.reserve(raw.size());
  nt.utf8_offsets.reserve(raw.size() + 1);

  auto emit = [&nt](char32_t c, std::size_t original) {
    nt.chars.push_back(c);
    nt.offset_map.push_back(original);
    append_utf8(nt.utf8, c);
    nt.utf8_offsets.push_back(nt.utf8.size());
  };

  std::size_t pending_space = 0;
  bool in_run = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char32_t c = raw[i];
    if (is_collapsible_space(c)) {
      if (!in_run) {
        in_run = true;
        pending_space = i;
      }
      continue;
    }
    if (in_run && !nt.empty()) emit(U' ', pending_space);
    in_run = false;
    emit(c, i);
  }
  return nt;
}

NormalizedText normalize(std::string_view raw) { return normalize(decode_utf8(raw)); }

std::vector<Ngram> strided_ngrams(const NormalizedText& nt, std::size_t width, std::size_t stride) {
  std::vector<Ngram> out;
  if (width == 0 || stride == 0) return out;
  out.reserve(strided_count(nt.size(), width, stride));
  for (std::size_t start = 0; start + width <= nt.size(); start += stride) {
    out.push_back({start, std::u32string_view(nt.chars).substr(start, width), nt.utf8_slice(start, width)});
  }
  return out;
}

std::vector<Ngram> sliding_ngrams(const NormalizedText& nt, std::size_t width) {
  return strided_ngrams(nt, width, 1);
}

}  // namespace dataportrait
