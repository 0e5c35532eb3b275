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

#include <cstdint>
#include <span>
#include <string_view>

namespace dataportrait {

/// XXH64 (xxHash, 64-bit variant). Output matches the reference implementation
/// for every input and seed, so portraits hashed with it are portable.
std::uint64_t xxh64(std::span<const std::byte> data, std::uint64_t seed) noexcept;

inline std::uint64_t xxh64(std::string_view s, std::uint64_t seed) noexcept {
  return xxh64(std::as_bytes(std::span(s.data(), s.size())), seed);
}

/// Incremental 64-bit FNV-1a, used for file checksums.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffsetBasis = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void update(std::span<const std::byte> data) noexcept {
    for (std::byte b : data) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= kPrime;
    }
  }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kOffsetBasis;
};

inline std::uint64_t fnv1a64(std::span<const std::byte> data) noexcept {
  Fnv1a64 h;
  h.update(data);
  return h.digest();
}

}  // namespace dataportrait
