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

#include "cli.hpp"

#include <pthread.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "dataportrait/bloom_filter.hpp"
#include "dataportrait/error.hpp"
#include "dataportrait/ingest.hpp"
#include "dataportrait/query.hpp"
#include "dataportrait/service.hpp"

namespace dataportrait::cli {
namespace {

struct GlobalOptions {
  bool quiet = false;
  unsigned threads = 0;
};

struct BuildOptions {
  std::vector<std::string> inputs;
  std::string format = "jsonl";
  std::string field = "text";
  std::uint32_t width = kDefaultNgramWidth;
  std::uint32_t stride = 0;
  double fpr = kDefaultTargetFpr;
  std::string expected = "auto";
  double sample_fraction = 1.0;
  unsigned shards = 0;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

struct CheckOptions {
  std::string portrait;
  std::string file;
  bool json = false;
};

struct ReportOptions {
  std::string portrait;
  std::vector<std::string> datasets;
  std::string format = "jsonl";
  std::string field = "text";
};

struct ServeOptions {
  std::vector<std::string> portraits;
  std::string addr = "127.0.0.1:8080";
  std::size_t max_doc_bytes = kDefaultMaxDocBytes;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

DocumentSource make_source(const std::vector<std::string>& inputs, const std::string& format,
                           const std::string& field) {
  std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
  return DocumentSource::files(parse_input_format(format), std::move(paths), field);
}

int cmd_build(const BuildOptions& o, const GlobalOptions& g, std::ostream& out) {
  FilterParams params;
  const std::uint32_t stride = o.stride == 0 ? o.width : o.stride;
  if (o.width < 1 || stride > o.width) throw UsageError("--stride must be in [1, --width]");
  if (!(o.fpr > 0.0 && o.fpr < 1.0)) throw UsageError("--fpr must be in (0, 1)");
  if (!(o.sample_fraction > 0.0 && o.sample_fraction <= 1.0)) throw UsageError("--sample-fraction must be in (0, 1]");
  std::uint64_t expected = 0;
  const bool automatic = o.expected == "auto";
  if (!automatic) {
    try {
      std::size_t used = 0;
      expected = std::stoull(o.expected, &used);
      if (used != o.expected.size() || expected == 0) throw std::invalid_argument("range");
    } catch (const std::exception&) {
      throw UsageError("--expected-elements must be a positive integer or 'auto'");
    }
  }
  const unsigned shards = o.shards != 0 ? o.shards : (g.threads != 0 ? g.threads : 1);
  InputFormat format;
  try {
    format = parse_input_format(o.format);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  DocumentSource source =
      DocumentSource::files(format, std::vector<std::filesystem::path>(o.inputs.begin(), o.inputs.end()), o.field);
  if (automatic) {
    if (std::find(o.inputs.begin(), o.inputs.end(), "-") != o.inputs.end()) {
      throw UsageError("--expected-elements auto needs a second pass and cannot read stdin");
    }
    expected = std::max<std::uint64_t>(1, estimate_elements(source, o.sample_fraction, o.width, stride, o.seed));
  }

  params = plan_parameters(expected, o.fpr);
  params.ngram_width = o.width;
  params.stride = stride;
  params.seed = o.seed;
  auto [filter, report] = build_portrait(source, params, shards);
  filter.save(o.out);

  if (!g.quiet) {
    out << "portrait        " << o.out << "\n"
        << "documents       " << report.documents << "\n"
        << "malformed       " << report.malformed_records << "\n"
        << "chars in        " << report.chars_in << "\n"
        << "tiles hashed    " << report.tiles_hashed << "\n"
        << "planned for     " << expected << " elements\n"
        << "m_bits          " << params.m_bits << "\n"
        << "k_hashes        " << params.k_hashes << "\n"
        << "bits/element    " << fixed(bits_per_element(params, expected), 2) << "\n"
        << "saturation      " << fixed(report.final_saturation, 4) << "\n"
        << "elapsed         " << fixed(report.elapsed_seconds, 3) << " s\n";
  }
  return kExitOk;
}

BloomFilter load_portrait(const std::string& path) { return BloomFilter::load(path); }

int cmd_check(const CheckOptions& o, const GlobalOptions& g, std::istream& in, std::ostream& out) {
  const BloomFilter filter = load_portrait(o.portrait);
  std::string document;
  if (o.file.empty() || o.file == "-") {
    document.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    std::ifstream f(o.file, std::ios::binary);
    if (!f) throw Error(ErrorCode::kSourceIo, "cannot open " + o.file);
    document.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }

  const auto started = std::chrono::steady_clock::now();
  const QueryReport report = check_document(filter, document);
  const double elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  if (o.json) {
    out << check_response_json(report, portrait_name_for(o.portrait), false, elapsed_ms).dump() << "\n";
  } else if (!g.quiet) {
    out << render_text(report);
  }
  return classify_membership(report) ? kExitOk : kExitNotMember;
}

int cmd_report(const ReportOptions& o, const GlobalOptions&, std::ostream& out) {
  if (o.format != "jsonl" && o.format != "lines") throw UsageError("--format must be jsonl or lines");
  const BloomFilter filter = load_portrait(o.portrait);
  char line[256];
  std::snprintf(line, sizeof line, "%-32s %10s %10s %12s\n", "dataset", "instances", "E.O. %", "seconds");
  out << line;
  for (const auto& dataset : o.datasets) {
    DocumentSource source = make_source({dataset}, o.format, o.field);
    DocumentReader reader(source);
    OverlapAccumulator acc;
    Document doc;
    while (reader.next(doc)) {
      const auto started = std::chrono::steady_clock::now();
      const QueryReport report = check_document(filter, doc.text);
      acc.add(report, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    }
    const OverlapSummary s = acc.summary(portrait_name_for(dataset));
    std::snprintf(line, sizeof line, "%-32s %10llu %10.2f %12.4f%s\n", s.dataset_name.c_str(),
                  static_cast<unsigned long long>(s.instances), s.expected_overlap_pct, s.total_query_seconds,
                  s.above_expectation ? "  (above alignment-averaged expectation)" : "");
    out << line;
  }
  return kExitOk;
}

int cmd_stats(const std::string& path, std::ostream& out) {
  const BloomFilter filter = load_portrait(path);
  const FilterParams& p = filter.params();
  const Saturation s = filter.saturation();
  out << "file            " << path << "\n"
      << "file size       " << std::filesystem::file_size(path) << " bytes\n"
      << "hash algorithm  " << kHashXxh64Double << " (xxh64 double hashing)\n"
      << "seed            " << p.seed << "\n"
      << "ngram_width     " << p.ngram_width << "\n"
      << "stride          " << p.stride << "\n"
      << "k_hashes        " << p.k_hashes << "\n"
      << "m_bits          " << p.m_bits << "\n"
      << "inserted        " << filter.inserted() << "\n"
      << "bits/element    " << (filter.inserted() ? fixed(bits_per_element(p, filter.inserted()), 2) : "n/a")
      << "\n"
      << "saturation      " << fixed(s.fraction, 6) << "\n"
      << "estimated fpr   " << s.estimated_fpr << "\n";
  return kExitOk;
}

int cmd_serve(ServeOptions o, std::ostream& out, std::ostream& err) {
  if (const char* env = std::getenv("DP_ADDR"); env != nullptr && *env != '\0') o.addr = env;
  if (const char* env = std::getenv("DP_MAX_DOC_BYTES"); env != nullptr && *env != '\0') {
    try {
      o.max_doc_bytes = std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("DP_MAX_DOC_BYTES must be an integer");
    }
  }
  std::pair<std::string, int> address;
  try {
    address = parse_address(o.addr);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  // Route SIGINT/SIGTERM to a waiter thread; every thread spawned below inherits the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  PortraitRegistry registry;
  for (const auto& spec : o.portraits) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      registry.mount_async(portrait_name_for(spec), spec);
    } else {
      registry.mount_async(spec.substr(0, eq), spec.substr(eq + 1));
    }
  }

  HttpServer server(registry, ServiceConfig{o.max_doc_bytes});
  const int port = server.bind(address.first, address.second);
  if (port < 0) {
    err << "error: cannot bind " << o.addr << "\n";
    return kExitFailure;
  }
  out << "listening on " << address.first << ":" << port << "\n" << std::flush;

  std::atomic<int> exit_code{kExitOk};
  std::jthread loader_watch([&] {
    registry.wait_until_loaded();
    if (auto failure = registry.first_failure()) {
      err << "error: refusing to serve: " << *failure << "\n";
      exit_code = kExitFailure;
      server.stop();
    } else {
      out << "all portraits loaded\n" << std::flush;
    }
  });
  std::thread signal_watch([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (sig != 0) server.stop();
  });

  server.listen_after_bind();
  loader_watch.join();
  // Wake the signal thread if the server stopped for another reason.
  pthread_kill(signal_watch.native_handle(), SIGTERM);
  signal_watch.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return exit_code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Build and query data portraits: strided Bloom-filter sketches of text corpora."};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions global;
  app.add_flag("-q,--quiet", global.quiet, "Suppress informational output");
  app.add_option("--threads", global.threads, "Worker threads (build shards when --shards is not given)");

  BuildOptions build;
  auto* b = app.add_subcommand("build", "Build a portrait from a corpus");
  b->add_option("--input", build.inputs, "Input files ('-' for stdin; .gz decompressed)")->required();
  b->add_option("--format", build.format, "jsonl, text (one document per file) or lines")
      ->check(CLI::IsMember({"jsonl", "text", "lines"}));
  b->add_option("--field", build.field, "JSONL field holding the document text");
  b->add_option("--width", build.width, "Characters per n-gram")->check(CLI::PositiveNumber);
  b->add_option("--stride", build.stride, "Tile step during ingestion (default: width)")->check(CLI::PositiveNumber);
  b->add_option("--fpr", build.fpr, "Target false positive rate");
  b->add_option("--expected-elements", build.expected, "Planned element count, or 'auto'");
  b->add_option("--sample-fraction", build.sample_fraction, "Corpus fraction sampled by --expected-elements auto");
  b->add_option("--shards", build.shards, "Independent shard filters merged at the end")->check(CLI::PositiveNumber);
  b->add_option("--seed", build.seed, "Hash seed stored in the portrait header");
  b->add_option("--out", build.out, "Output portrait file")->required();

  CheckOptions check;
  auto* c = app.add_subcommand("check", "Check one document against a portrait (exit 0 member, 3 not)");
  c->add_option("--portrait", check.portrait, "Portrait file")->required();
  c->add_option("--file", check.file, "Document file (default: stdin)");
  c->add_flag("--json", check.json, "Emit the service's JSON response schema");

  ReportOptions report;
  auto* r = app.add_subcommand("report", "Expected Overlap of datasets against a portrait");
  r->add_option("--portrait", report.portrait, "Portrait file")->required();
  r->add_option("--dataset", report.datasets, "Dataset files, one summary row each")->required();
  r->add_option("--format", report.format, "jsonl or lines")->check(CLI::IsMember({"jsonl", "lines"}));
  r->add_option("--field", report.field, "JSONL field holding the document text");

  std::string stats_path;
  auto* s = app.add_subcommand("stats", "Print portrait header and health");
  s->add_option("--portrait", stats_path, "Portrait file")->required();

  ServeOptions serve;
  auto* v = app.add_subcommand("serve", "Serve portraits over HTTP");
  v->add_option("--portrait", serve.portraits, "Portrait files, optionally NAME=FILE")->required();
  v->add_option("--addr", serve.addr, "HOST:PORT to listen on (env DP_ADDR overrides)");
  v->add_option("--max-doc-bytes", serve.max_doc_bytes, "Largest accepted document (env DP_MAX_DOC_BYTES overrides)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (b->parsed()) return cmd_build(build, global, out);
    if (c->parsed()) return cmd_check(check, global, in, out);
    if (r->parsed()) return cmd_report(report, global, out);
    if (s->parsed()) return cmd_stats(stats_path, out);
    if (v->parsed()) return cmd_serve(serve, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dataportrait::cli
