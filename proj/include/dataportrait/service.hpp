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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dataportrait/bloom_filter.hpp"
#include "dataportrait/query.hpp"

namespace httplib {
class Server;
}

namespace dataportrait {

inline constexpr std::size_t kDefaultMaxDocBytes = 1 << 20;

/// The /v1/check response body. The CLI's --json output uses the same function
/// so both surfaces agree byte for byte (apart from elapsed_ms).
nlohmann::ordered_json check_response_json(const QueryReport& report, const std::string& portrait_name,
                                           bool include_flags, double elapsed_ms);

/// Default mount name for a portrait file: its stem ("pile.dpbf" -> "pile").
std::string portrait_name_for(const std::filesystem::path& path);

/// Named, immutable portraits. Loading happens on background threads; a
/// portrait is queryable only once its load finished and passed the self-check.
class PortraitRegistry {
 public:
  enum class State { kLoading, kReady, kFailed };

  struct Entry {
    std::string name;
    std::filesystem::path path;
    State state = State::kLoading;
    std::shared_ptr<const BloomFilter> filter;
    std::string error;
  };

  PortraitRegistry() = default;
  ~PortraitRegistry();
  PortraitRegistry(const PortraitRegistry&) = delete;
  PortraitRegistry& operator=(const PortraitRegistry&) = delete;

  /// Starts loading `path` under `name`. Throws Error(kInvalidArgument) on a duplicate name.
  void mount_async(std::string name, std::filesystem::path path);
  /// Mounts an already built filter.
  void mount(std::string name, std::shared_ptr<const BloomFilter> filter);

  void wait_until_loaded();
  std::vector<Entry> snapshot() const;
  std::optional<Entry> find(const std::string& name) const;
  bool all_ready() const;
  /// First load error, if any portrait failed.
  std::optional<std::string> first_failure() const;

 private:
  void finish(const std::string& name, std::shared_ptr<const BloomFilter> filter, std::string error);

  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
  std::vector<std::jthread> loaders_;
};

/// Verifies the query path against a portrait: a scratch filter with the same
/// hashing geometry must recognise a canary, and the canary's report on the
/// mounted portrait must be internally consistent. Returns an error message on failure.
std::optional<std::string> self_check(const BloomFilter& filter);

struct HttpResponse {
  int status = 200;
  std::string body;
};

struct ServiceConfig {
  std::size_t max_doc_bytes = kDefaultMaxDocBytes;
};

/// Transport-independent request handling; the HTTP layer only forwards.
class PortraitService {
 public:
  PortraitService(PortraitRegistry& registry, ServiceConfig config);

  HttpResponse check(const std::string& body) const;
  HttpResponse portraits() const;
  HttpResponse healthz() const;

 private:
  PortraitRegistry& registry_;
  ServiceConfig config_;
};

/// cpp-httplib server exposing PortraitService under /v1 with permissive CORS.
class HttpServer {
 public:
  HttpServer(PortraitRegistry& registry, ServiceConfig config);
  ~HttpServer();

  /// Binds to host:port; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  bool listen_after_bind();
  /// Safe from any thread, including before the listen loop has started.
  void stop();
  bool running() const;

 private:
  PortraitService service_;
  std::unique_ptr<httplib::Server> server_;
  std::atomic<bool> stop_requested_{false};
  std::atomic<bool> listening_{false};
};

/// Parses "HOST:PORT" (the host may be empty, meaning 0.0.0.0).
std::pair<std::string, int> parse_address(const std::string& addr);

}  // namespace dataportrait
