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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace dataportrait {

inline constexpr std::uint32_t kDefaultNgramWidth = 50;
inline constexpr double kDefaultTargetFpr = 1e-3;
inline constexpr std::uint64_t kDefaultSeed = 0;

/// Identifier written into the file header for the probe derivation below.
/// 1 = XXH64 double hashing: h1 = xxh64(e, seed), h2 = xxh64(e, seed ^ kSecondarySeedMask) | 1.
inline constexpr std::uint32_t kHashXxh64Double = 1;
inline constexpr std::uint64_t kSecondarySeedMask = 0x9E3779B97F4A7C15ULL;

/// Sketch geometry. target_fpr is the planning input; it is not part of the
/// on-disk header and does not participate in equality.
struct FilterParams {
  std::uint64_t m_bits = 8;
  std::uint32_t k_hashes = 1;
  std::uint32_t ngram_width = kDefaultNgramWidth;
  std::uint32_t stride = kDefaultNgramWidth;
  std::uint64_t seed = kDefaultSeed;
  double target_fpr = kDefaultTargetFpr;

  /// Throws Error(kInvalidArgument) when an invariant is violated.
  void validate() const;

  /// Merge compatibility: every persisted field equal.
  friend bool operator==(const FilterParams& a, const FilterParams& b) noexcept {
    return a.m_bits == b.m_bits && a.k_hashes == b.k_hashes && a.ngram_width == b.ngram_width &&
           a.stride == b.stride && a.seed == b.seed;
  }
};

/// Optimal-Bloom sizing:
///   m = ceil(-n ln p / (ln 2)^2), k = max(1, round(m/n ln 2)).
/// Width and stride are left at their defaults.
FilterParams plan_parameters(std::uint64_t expected_elements, double target_fpr);

inline double bits_per_element(const FilterParams& params, std::uint64_t elements) {
  return elements == 0 ? 0.0 : static_cast<double>(params.m_bits) / static_cast<double>(elements);
}

/// The k probe positions for one element.
std::vector<std::uint64_t> hash_indices(std::span<const std::byte> element, const FilterParams& params);

inline std::vector<std::uint64_t> hash_indices(std::string_view element, const FilterParams& params) {
  return hash_indices(std::as_bytes(std::span(element.data(), element.size())), params);
}

struct Saturation {
  double fraction = 0.0;       ///< popcount / m_bits
  double estimated_fpr = 0.0;  ///< fraction ^ k_hashes
};

class BloomFilter {
 public:
  explicit BloomFilter(FilterParams params);

  const FilterParams& params() const noexcept { return params_; }
  std::uint64_t inserted() const noexcept { return inserted_; }

  void insert(std::span<const std::byte> element);
  void insert(std::string_view element) { insert(std::as_bytes(std::span(element.data(), element.size()))); }

  bool contains(std::span<const std::byte> element) const noexcept;
  bool contains(std::string_view element) const noexcept {
    return contains(std::as_bytes(std::span(element.data(), element.size())));
  }

  bool test_bit(std::uint64_t index) const noexcept { return (words_[index >> 6] >> (index & 63)) & 1U; }

  /// OR `other` into this filter. Throws Error(kParamsMismatch).
  void merge_from(const BloomFilter& other);

  std::uint64_t popcount() const noexcept;
  Saturation saturation() const noexcept;

  /// Exact size in bytes of the serialized form.
  std::uint64_t serialized_size() const noexcept;

  void serialize(std::ostream& sink) const;
  static BloomFilter deserialize(std::istream& source);

  void save(const std::filesystem::path& path) const;
  /// Like deserialize, but also rejects trailing bytes after the checksum.
  static BloomFilter load(const std::filesystem::path& path);

  friend bool operator==(const BloomFilter& a, const BloomFilter& b) noexcept {
    return a.params_ == b.params_ && a.inserted_ == b.inserted_ && a.words_ == b.words_;
  }

 private:
  BloomFilter(FilterParams params, std::uint64_t inserted, std::vector<std::uint64_t> words);

  FilterParams params_;
  std::uint64_t inserted_ = 0;
  std::vector<std::uint64_t> words_;  // bit j lives at words_[j / 64], bit j % 64
};

/// a OR b. Throws Error(kParamsMismatch) unless a.params() == b.params().
BloomFilter merge(const BloomFilter& a, const BloomFilter& b);

}  // namespace dataportrait
