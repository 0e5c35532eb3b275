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

#include "dataportrait/bloom_filter.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "dataportrait/error.hpp"
#include "dataportrait/hash.hpp"

namespace dataportrait {
namespace {

constexpr std::array<char, 4> kMagic = {'D', 'P', 'B', 'F'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kHeaderBytes = 64;
constexpr std::size_t kTrailerBytes = 8;
constexpr std::size_t kReadChunk = 1 << 20;

std::uint64_t payload_bytes(std::uint64_t m_bits) { return (m_bits + 7) / 8; }
std::uint64_t word_count(std::uint64_t m_bits) { return (m_bits + 63) / 64; }

template <typename Fn>
void for_each_probe(std::span<const std::byte> element, const FilterParams& params, Fn&& fn) {
  const std::uint64_t h1 = xxh64(element, params.seed);
  const std::uint64_t h2 = xxh64(element, params.seed ^ kSecondarySeedMask) | 1U;
  std::uint64_t h = h1;
  for (std::uint32_t i = 0; i < params.k_hashes; ++i) {
    if (!fn(h % params.m_bits)) return;
    h += h2;
  }
}

class HeaderWriter {
 public:
  explicit HeaderWriter(std::vector<std::byte>& out) : out_(out) {}
  template <typename T>
  void put(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::byte>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
  }

 private:
  std::vector<std::byte>& out_;
};

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::byte> in) : in_(in) {}
  template <typename T>
  T get() {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  void skip(std::size_t n) { pos_ += n; }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

void read_exact(std::istream& in, std::byte* dst, std::size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw Error(ErrorCode::kTruncatedStream, std::string("stream ended inside ") + what);
  }
}

}  // namespace

void FilterParams::validate() const {
  if (m_bits < 8) throw Error(ErrorCode::kInvalidArgument, "m_bits must be >= 8");
  if (k_hashes < 1 || k_hashes > 64) throw Error(ErrorCode::kInvalidArgument, "k_hashes must be in [1, 64]");
  if (ngram_width < 1) throw Error(ErrorCode::kInvalidArgument, "ngram_width must be >= 1");
  if (stride < 1 || stride > ngram_width) {
    throw Error(ErrorCode::kInvalidArgument, "stride must be in [1, ngram_width]");
  }
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target_fpr must be in (0, 1)");
  }
}

FilterParams plan_parameters(std::uint64_t expected_elements, double target_fpr) {
  if (expected_elements < 1) throw Error(ErrorCode::kInvalidArgument, "expected_elements must be >= 1");
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target_fpr must be in (0, 1)");
  }
  const double ln2 = std::log(2.0);
  const double n = static_cast<double>(expected_elements);
  const double m = std::ceil(-n * std::log(target_fpr) / (ln2 * ln2));
  FilterParams p;
  p.m_bits = static_cast<std::uint64_t>(m);
  p.k_hashes = static_cast<std::uint32_t>(
      std::clamp<double>(std::round(m / n * ln2), 1.0, 64.0));
  p.target_fpr = target_fpr;
  return p;
}

std::vector<std::uint64_t> hash_indices(std::span<const std::byte> element, const FilterParams& params) {
  std::vector<std::uint64_t> out;
  out.reserve(params.k_hashes);
  for_each_probe(element, params, [&](std::uint64_t idx) {
    out.push_back(idx);
    return true;
  });
  return out;
}

BloomFilter::BloomFilter(FilterParams params) : params_(params) {
  params_.validate();
  words_.assign(word_count(params_.m_bits), 0);
}

BloomFilter::BloomFilter(FilterParams params, std::uint64_t inserted, std::vector<std::uint64_t> words)
    : params_(params), inserted_(inserted), words_(std::move(words)) {}

void BloomFilter::insert(std::span<const std::byte> element) {
  for_each_probe(element, params_, [this](std::uint64_t idx) {
    words_[idx >> 6] |= std::uint64_t{1} << (idx & 63);
    return true;
  });
  ++inserted_;
}

bool BloomFilter::contains(std::span<const std::byte> element) const noexcept {
  bool hit = true;
  for_each_probe(element, params_, [&](std::uint64_t idx) {
    hit = test_bit(idx);
    return hit;
  });
  return hit;
}

void BloomFilter::merge_from(const BloomFilter& other) {
  if (!(params_ == other.params_)) {
    throw Error(ErrorCode::kParamsMismatch, "cannot merge portraits with different geometry or seed");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  inserted_ += other.inserted_;
}

BloomFilter merge(const BloomFilter& a, const BloomFilter& b) {
  BloomFilter out = a;
  out.merge_from(b);
  return out;
}

std::uint64_t BloomFilter::popcount() const noexcept {
  std::uint64_t total = 0;
  for (std::uint64_t w : words_) total += static_cast<std::uint64_t>(std::popcount(w));
  return total;
}

Saturation BloomFilter::saturation() const noexcept {
  Saturation s;
  s.fraction = static_cast<double>(popcount()) / static_cast<double>(params_.m_bits);
  s.estimated_fpr = std::pow(s.fraction, static_cast<double>(params_.k_hashes));
  return s;
}

std::uint64_t BloomFilter::serialized_size() const noexcept {
  return kHeaderBytes + payload_bytes(params_.m_bits) + kTrailerBytes;
}

void BloomFilter::serialize(std::ostream& sink) const {
  std::vector<std::byte> header;
  header.reserve(kHeaderBytes);
  for (char c : kMagic) header.push_back(static_cast<std::byte>(c));
  HeaderWriter w(header);
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::uint32_t>(kHashXxh64Double);
  w.put<std::uint64_t>(params_.seed);
  w.put<std::uint32_t>(params_.ngram_width);
  w.put<std::uint32_t>(params_.stride);
  w.put<std::uint32_t>(params_.k_hashes);
  w.put<std::uint64_t>(params_.m_bits);
  w.put<std::uint64_t>(inserted_);
  header.resize(kHeaderBytes, std::byte{0});

  Fnv1a64 checksum;
  checksum.update(header);
  sink.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));

  // Words are emitted little-endian, which places bit j at byte j>>3, bit j&7.
  const std::uint64_t total = payload_bytes(params_.m_bits);
  std::vector<std::byte> chunk;
  chunk.reserve(kReadChunk);
  for (std::uint64_t byte = 0; byte < total; ++byte) {
    chunk.push_back(static_cast<std::byte>((words_[byte >> 3] >> (8 * (byte & 7))) & 0xFF));
    if (chunk.size() == kReadChunk || byte + 1 == total) {
      checksum.update(chunk);
      sink.write(reinterpret_cast<const char*>(chunk.data()), static_cast<std::streamsize>(chunk.size()));
      chunk.clear();
    }
  }

  std::vector<std::byte> trailer;
  HeaderWriter(trailer).put<std::uint64_t>(checksum.digest());
  sink.write(reinterpret_cast<const char*>(trailer.data()), static_cast<std::streamsize>(trailer.size()));
  if (!sink) throw Error(ErrorCode::kSourceIo, "failed writing portrait");
}

BloomFilter BloomFilter::deserialize(std::istream& source) {
  std::array<std::byte, kHeaderBytes> header{};
  source.read(reinterpret_cast<char*>(header.data()), 4);
  if (source.gcount() != 4 || !std::equal(kMagic.begin(), kMagic.end(), header.begin(),
                                          [](char c, std::byte b) { return static_cast<std::byte>(c) == b; })) {
    throw Error(ErrorCode::kBadMagic, "not a portrait file");
  }
  read_exact(source, header.data() + 4, kHeaderBytes - 4, "header");

  HeaderReader r(header);
  r.skip(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "format_version " + std::to_string(version));
  }
  const auto hash_id = r.get<std::uint32_t>();
  if (hash_id != kHashXxh64Double) {
    throw Error(ErrorCode::kVersionUnsupported, "hash_algorithm_id " + std::to_string(hash_id));
  }
  FilterParams p;
  p.seed = r.get<std::uint64_t>();
  p.ngram_width = r.get<std::uint32_t>();
  p.stride = r.get<std::uint32_t>();
  p.k_hashes = r.get<std::uint32_t>();
  p.m_bits = r.get<std::uint64_t>();
  const auto inserted = r.get<std::uint64_t>();
  for (std::size_t i = r.pos(); i < kHeaderBytes; ++i) {
    if (header[i] != std::byte{0}) throw Error(ErrorCode::kCorruptPayload, "reserved header bytes are not zero");
  }
  p.validate();

  Fnv1a64 checksum;
  checksum.update(header);

  // Grow incrementally so a corrupt m_bits cannot force a huge allocation up front.
  const std::uint64_t total = payload_bytes(p.m_bits);
  std::vector<std::uint64_t> words;
  std::vector<std::byte> chunk(kReadChunk);
  std::uint64_t done = 0;
  while (done < total) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kReadChunk, total - done));
    source.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(source.gcount()) != n) {
      throw Error(ErrorCode::kTruncatedStream,
                  "payload shorter than the " + std::to_string(total) + " bytes implied by m_bits");
    }
    checksum.update(std::span(chunk.data(), n));
    words.resize(word_count((done + n) * 8), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t byte = done + i;
      words[byte >> 3] |= static_cast<std::uint64_t>(chunk[i]) << (8 * (byte & 7));
    }
    done += n;
  }
  words.resize(word_count(p.m_bits), 0);

  std::array<std::byte, kTrailerBytes> trailer{};
  read_exact(source, trailer.data(), trailer.size(), "checksum trailer");
  if (HeaderReader(trailer).get<std::uint64_t>() != checksum.digest()) {
    throw Error(ErrorCode::kChecksumMismatch, "payload checksum does not match trailer");
  }

  if (const std::uint64_t tail = p.m_bits & 63; tail != 0) {
    if (words.back() >> tail) throw Error(ErrorCode::kCorruptPayload, "padding bits beyond m_bits are set");
  }
  return BloomFilter(p, inserted, std::move(words));
}

void BloomFilter::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kSourceIo, "cannot open " + path.string() + " for writing");
  serialize(out);
  out.close();
  if (!out) throw Error(ErrorCode::kSourceIo, "failed writing " + path.string());
}

BloomFilter BloomFilter::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kSourceIo, "cannot open " + path.string());
  BloomFilter f = deserialize(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kTruncatedStream, "trailing bytes after checksum in " + path.string());
  }
  return f;
}

}  // namespace dataportrait
