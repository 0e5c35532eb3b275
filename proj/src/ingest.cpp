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

#include "dataportrait/ingest.hpp"

#include <zlib.h>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <istream>
#include <mutex>
#include <random>
#include <thread>
#include <unistd.h>

#include "json.hpp"

#include "dataportrait/error.hpp"
#include "dataportrait/textnorm.hpp"

namespace dataportrait {
namespace {

constexpr std::size_t kBufferBytes = 1 << 16;
constexpr std::size_t kBatchDocs = 64;
constexpr std::size_t kMaxQueuedBatches = 16;

/// Sequential byte input: a gzip-or-plain file, stdin, or a caller's istream.
class ByteInput {
 public:
  virtual ~ByteInput() = default;
  /// Returns bytes read, 0 at EOF; throws on error.
  virtual std::size_t read(char* dst, std::size_t n) = 0;
};

class GzInput final : public ByteInput {
 public:
  explicit GzInput(const std::filesystem::path& path) : name_(path.string()) {
    if (name_ == "-") {
      file_ = gzdopen(dup(STDIN_FILENO), "rb");
    } else {
      file_ = gzopen(name_.c_str(), "rb");
    }
    if (file_ == nullptr) throw Error(ErrorCode::kSourceIo, "cannot open " + name_);
    gzbuffer(file_, 1 << 17);
  }
  ~GzInput() override {
    if (file_ != nullptr) gzclose(file_);
  }
  std::size_t read(char* dst, std::size_t n) override {
    const int got = gzread(file_, dst, static_cast<unsigned>(n));
    if (got < 0) {
      int errnum = 0;
      throw Error(ErrorCode::kSourceIo, name_ + ": " + gzerror(file_, &errnum));
    }
    return static_cast<std::size_t>(got);
  }

 private:
  std::string name_;
  gzFile file_ = nullptr;
};

class StreamInput final : public ByteInput {
 public:
  explicit StreamInput(std::istream& in) : in_(in) {}
  std::size_t read(char* dst, std::size_t n) override {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (in_.bad()) throw Error(ErrorCode::kSourceIo, "stream read failed");
    return static_cast<std::size_t>(in_.gcount());
  }

 private:
  std::istream& in_;
};

class LineBuffer {
 public:
  explicit LineBuffer(ByteInput& in) : in_(in), buf_(kBufferBytes) {}

  bool getline(std::string& line) {
    line.clear();
    bool any = false;
    while (true) {
      if (pos_ == end_) {
        end_ = in_.read(buf_.data(), buf_.size());
        pos_ = 0;
        if (end_ == 0) return any;
      }
      any = true;
      const char* begin = buf_.data() + pos_;
      const auto* nl = static_cast<const char*>(std::memchr(begin, '\n', end_ - pos_));
      if (nl != nullptr) {
        line.append(begin, nl);
        pos_ += static_cast<std::size_t>(nl - begin) + 1;
        return true;
      }
      line.append(begin, end_ - pos_);
      pos_ = end_;
    }
  }

  void read_all(std::string& out) {
    out.assign(buf_.data() + pos_, end_ - pos_);
    pos_ = end_;
    std::size_t got;
    while ((got = in_.read(buf_.data(), buf_.size())) > 0) out.append(buf_.data(), got);
  }

 private:
  ByteInput& in_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

}  // namespace

InputFormat parse_input_format(std::string_view name) {
  if (name == "jsonl") return InputFormat::kJsonl;
  if (name == "text") return InputFormat::kText;
  if (name == "lines") return InputFormat::kLines;
  throw Error(ErrorCode::kInvalidArgument, "unknown input format '" + std::string(name) + "'");
}

class DocumentReader::Impl {
 public:
  explicit Impl(const DocumentSource& source) : source_(source) {}

  /// Advances to the next input; false when all are exhausted.
  bool open_next() {
    lines_.reset();
    input_.reset();
    if (source_.stream != nullptr) {
      if (next_input_ > 0) return false;
      input_ = std::make_unique<StreamInput>(*source_.stream);
    } else {
      if (next_input_ >= source_.paths.size()) return false;
      input_ = std::make_unique<GzInput>(source_.paths[next_input_]);
    }
    ++next_input_;
    lines_ = std::make_unique<LineBuffer>(*input_);
    return true;
  }

  const DocumentSource& source_;
  std::size_t next_input_ = 0;
  std::unique_ptr<ByteInput> input_;
  std::unique_ptr<LineBuffer> lines_;
  std::string line_;
};

DocumentReader::DocumentReader(const DocumentSource& source) : impl_(std::make_unique<Impl>(source)) {}
DocumentReader::~DocumentReader() = default;

bool DocumentReader::next(Document& doc) {
  try {
    while (true) {
      if (!impl_->lines_ && !impl_->open_next()) return false;
      auto& lines = *impl_->lines_;
      switch (impl_->source_.format) {
        case InputFormat::kText: {
          lines.read_all(doc.text);
          impl_->lines_.reset();
          bytes_ += doc.text.size();
          doc.index = yielded_++;
          return true;
        }
        case InputFormat::kLines: {
          if (!lines.getline(doc.text)) {
            impl_->lines_.reset();
            continue;
          }
          bytes_ += doc.text.size() + 1;
          doc.index = yielded_++;
          return true;
        }
        case InputFormat::kJsonl: {
          std::string& line = impl_->line_;
          if (!lines.getline(line)) {
            impl_->lines_.reset();
            continue;
          }
          bytes_ += line.size() + 1;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          auto record = nlohmann::json::parse(line, nullptr, false);
          if (record.is_discarded() || !record.is_object()) {
            ++malformed_;
            continue;
          }
          auto field = record.find(impl_->source_.field_name);
          if (field == record.end() || !field->is_string()) {
            ++malformed_;
            continue;
          }
          doc.text = field->get_ref<const std::string&>();
          doc.index = yielded_++;
          return true;
        }
      }
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::kSourceIo, std::string(e.what()) + " (at document " + std::to_string(yielded_) + ")");
  }
}

std::uint64_t ingest_document(BloomFilter& filter, std::string_view raw) {
  const NormalizedText nt = normalize(raw);
  const auto& p = filter.params();
  std::uint64_t tiles = 0;
  for (std::size_t start = 0; start + p.ngram_width <= nt.size(); start += p.stride) {
    filter.insert(nt.utf8_slice(start, p.ngram_width));
    ++tiles;
  }
  return tiles;
}

namespace {

struct ShardTotals {
  std::uint64_t documents = 0;
  std::uint64_t tiles = 0;
  std::uint64_t chars = 0;
};

void ingest_counted(BloomFilter& filter, const std::string& raw, ShardTotals& totals) {
  const std::u32string decoded = decode_utf8(raw);
  totals.chars += decoded.size();
  const NormalizedText nt = normalize(decoded);
  const auto& p = filter.params();
  for (std::size_t start = 0; start + p.ngram_width <= nt.size(); start += p.stride) {
    filter.insert(nt.utf8_slice(start, p.ngram_width));
    ++totals.tiles;
  }
  ++totals.documents;
}

/// Bounded multi-consumer queue of document batches.
class BatchQueue {
 public:
  void push(std::vector<std::string> batch) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return batches_.size() < kMaxQueuedBatches; });
    batches_.push_back(std::move(batch));
    not_empty_.notify_one();
  }
  bool pop(std::vector<std::string>& batch) {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !batches_.empty() || closed_; });
    if (batches_.empty()) return false;
    batch = std::move(batches_.front());
    batches_.pop_front();
    not_full_.notify_one();
    return true;
  }
  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<std::vector<std::string>> batches_;
  bool closed_ = false;
};

}  // namespace

std::pair<BloomFilter, BuildReport> build_portrait(const DocumentSource& source, const FilterParams& params,
                                                   unsigned shards) {
  params.validate();
  if (shards < 1) throw Error(ErrorCode::kInvalidArgument, "shards must be >= 1");
  const auto started = std::chrono::steady_clock::now();

  DocumentReader reader(source);
  Document doc;
  std::vector<BloomFilter> filters(shards, BloomFilter(params));
  std::vector<ShardTotals> totals(shards);

  if (shards == 1) {
    while (reader.next(doc)) ingest_counted(filters[0], doc.text, totals[0]);
  } else {
    BatchQueue queue;
    std::vector<std::jthread> workers;
    workers.reserve(shards);
    for (unsigned s = 0; s < shards; ++s) {
      workers.emplace_back([&, s] {
        std::vector<std::string> batch;
        while (queue.pop(batch)) {
          for (const auto& text : batch) ingest_counted(filters[s], text, totals[s]);
        }
      });
    }
    std::vector<std::string> batch;
    try {
      while (reader.next(doc)) {
        batch.push_back(std::move(doc.text));
        if (batch.size() == kBatchDocs) {
          queue.push(std::move(batch));
          batch.clear();
        }
      }
      if (!batch.empty()) queue.push(std::move(batch));
    } catch (...) {
      queue.close();
      throw;
    }
    queue.close();
    workers.clear();
    for (unsigned s = 1; s < shards; ++s) filters[0].merge_from(filters[s]);
  }

  BuildReport report;
  for (const auto& t : totals) {
    report.documents += t.documents;
    report.tiles_hashed += t.tiles;
    report.chars_in += t.chars;
  }
  report.malformed_records = reader.malformed_records();
  report.final_saturation = filters[0].saturation().fraction;
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(filters[0]), report};
}

std::uint64_t estimate_elements(const DocumentSource& source, double sample_fraction, std::uint32_t width,
                                std::uint32_t stride, std::uint64_t sample_seed) {
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sample_fraction must be in (0, 1]");
  }
  if (width < 1 || stride < 1) throw Error(ErrorCode::kInvalidArgument, "width and stride must be >= 1");

  DocumentReader reader(source);
  Document doc;
  std::mt19937_64 rng(sample_seed);
  std::bernoulli_distribution pick(sample_fraction);
  const bool exact = sample_fraction >= 1.0;

  std::uint64_t total_bytes = 0;
  std::uint64_t sampled_bytes = 0;
  std::uint64_t sampled_tiles = 0;
  while (reader.next(doc)) {
    total_bytes += doc.text.size();
    if (exact || doc.index == 0 || pick(rng)) {
      sampled_bytes += doc.text.size();
      sampled_tiles += strided_count(normalize(doc.text).size(), width, stride);
    }
  }
  if (exact || sampled_bytes == 0 || sampled_bytes == total_bytes) return sampled_tiles;
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(sampled_tiles) *
                                                 static_cast<double>(total_bytes) /
                                                 static_cast<double>(sampled_bytes)));
}

}  // namespace dataportrait
