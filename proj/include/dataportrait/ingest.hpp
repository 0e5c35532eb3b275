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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dataportrait/bloom_filter.hpp"

namespace dataportrait {

enum class InputFormat {
  kJsonl,  ///< one JSON object per line, text under field_name
  kText,   ///< one document per file
  kLines,  ///< one document per line
};

InputFormat parse_input_format(std::string_view name);

/// Where documents come from. A path of "-" reads standard input. Files whose
/// name ends in .gz are decompressed on the fly.
struct DocumentSource {
  InputFormat format = InputFormat::kJsonl;
  std::vector<std::filesystem::path> paths;
  std::string field_name = "text";
  /// When set, read from this stream instead of `paths`. Not owned.
  std::istream* stream = nullptr;

  static DocumentSource files(InputFormat format, std::vector<std::filesystem::path> paths,
                              std::string field_name = "text") {
    return DocumentSource{format, std::move(paths), std::move(field_name), nullptr};
  }
  static DocumentSource standard_input(InputFormat format, std::string field_name = "text") {
    return DocumentSource{format, {"-"}, std::move(field_name), nullptr};
  }
  static DocumentSource from_stream(std::istream& in, InputFormat format, std::string field_name = "text") {
    return DocumentSource{format, {}, std::move(field_name), &in};
  }
};

struct Document {
  std::uint64_t index = 0;  ///< position among yielded documents
  std::string text;
};

/// Pull-style reader over a DocumentSource. Malformed JSONL records are
/// skipped and counted; blank JSONL lines are ignored.
class DocumentReader {
 public:
  explicit DocumentReader(const DocumentSource& source);
  ~DocumentReader();
  DocumentReader(const DocumentReader&) = delete;
  DocumentReader& operator=(const DocumentReader&) = delete;

  /// Returns false at end of input. Throws Error(kSourceIo) on read failures.
  bool next(Document& doc);

  std::uint64_t malformed_records() const noexcept { return malformed_; }
  std::uint64_t bytes_read() const noexcept { return bytes_; }

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
  std::uint64_t malformed_ = 0;
  std::uint64_t bytes_ = 0;
  std::uint64_t yielded_ = 0;
};

struct BuildReport {
  std::uint64_t documents = 0;
  std::uint64_t tiles_hashed = 0;
  std::uint64_t chars_in = 0;  ///< Unicode scalars before normalization
  std::uint64_t malformed_records = 0;
  double elapsed_seconds = 0.0;
  double final_saturation = 0.0;
};

/// normalize -> strided tiles -> insert each tile's UTF-8 bytes. With
/// shards > 1 documents are spread over independent shard filters which are
/// OR-merged at the end; the bit array equals the single-shard build.
std::pair<BloomFilter, BuildReport> build_portrait(const DocumentSource& source, const FilterParams& params,
                                                   unsigned shards = 1);

/// Adds every tile of one document to `filter`; returns the tile count.
std::uint64_t ingest_document(BloomFilter& filter, std::string_view raw);

/// Estimated number of tiles the source would produce. Each document is
/// sampled with probability `sample_fraction` (seeded, deterministic; the
/// first document is always included) and the sampled tiles-per-byte rate is
/// scaled to the total byte count. sample_fraction == 1 gives the exact count.
std::uint64_t estimate_elements(const DocumentSource& source, double sample_fraction,
                                std::uint32_t width = kDefaultNgramWidth, std::uint32_t stride = kDefaultNgramWidth,
                                std::uint64_t sample_seed = 0);

}  // namespace dataportrait
