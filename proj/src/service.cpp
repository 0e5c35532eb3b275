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

#include "dataportrait/service.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "httplib.h"

#include "dataportrait/error.hpp"
#include "dataportrait/ingest.hpp"
#include "dataportrait/textnorm.hpp"

namespace dataportrait {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kCanary =
    "Data portrait canary document used by the service self-check. It is long enough to hold several "
    "tiles at any reasonable window width, and it mixes   spacing,\ttabs and\nnewlines so the "
    "normalization path is exercised on every startup of the query service. 0123456789 abcdefghij "
    "ABCDEFGHIJ klmnopqrst KLMNOPQRST uvwxyz UVWXYZ. The end of the canary comes after one more line "
    "of filler text so that a width of fifty characters still yields a long chain across the document.";

ordered_json chain_json(const Chain& c) {
  return ordered_json{{"start_orig", c.start_orig}, {"end_orig", c.end_orig},   {"start_norm", c.start_norm},
                      {"count", c.count},           {"char_length", c.char_length}, {"text", c.text}};
}

HttpResponse json_error(int status, const std::string& message) {
  return {status, ordered_json{{"error", message}}.dump()};
}

}  // namespace

ordered_json check_response_json(const QueryReport& report, const std::string& portrait_name, bool include_flags,
                                 double elapsed_ms) {
  ordered_json chains = ordered_json::array();
  for (const Chain& c : chains_by_length(report)) chains.push_back(chain_json(c));

  ordered_json out;
  out["portrait"] = portrait_name;
  out["ngram_width"] = report.ngram_width;
  out["doc_norm_length"] = report.doc_norm_length;
  out["chains"] = std::move(chains);
  out["longest_chain"] = report.longest_chain ? chain_json(*report.longest_chain) : ordered_json(nullptr);
  out["overlap_ratio"] = report.overlap_ratio;
  out["expected_matches"] = report.expected_matches;
  out["is_member"] = classify_membership(report);
  if (include_flags) {
    ordered_json flags = ordered_json::array();
    for (bool f : report.flags) flags.push_back(f);
    out["flags"] = std::move(flags);
  }
  out["elapsed_ms"] = elapsed_ms;
  return out;
}

std::string portrait_name_for(const std::filesystem::path& path) { return path.stem().string(); }

std::optional<std::string> self_check(const BloomFilter& filter) {
  FilterParams scratch_params = filter.params();
  scratch_params.m_bits = 1 << 16;
  std::string canary(kCanary);
  while (normalize(canary).size() < 3 * static_cast<std::size_t>(scratch_params.ngram_width)) {
    canary += ' ';
    canary += kCanary;
  }
  BloomFilter scratch(scratch_params);
  ingest_document(scratch, canary);
  const QueryReport own = check_document(scratch, canary);
  if (own.chains.empty() || !own.longest_chain) return "canary produced no chain on a filter that holds it";
  const std::size_t tiles = strided_count(own.doc_norm_length, scratch_params.ngram_width, scratch_params.stride);
  if (scratch_params.stride == scratch_params.ngram_width && own.longest_chain->count < tiles) {
    return "canary chain shorter than its tile count";
  }

  const QueryReport r = check_document(filter, canary);
  if (r.flags.size() != sliding_count(r.doc_norm_length, r.ngram_width)) return "flag count mismatch";
  std::size_t chained = 0;
  for (const Chain& c : r.chains) {
    for (std::size_t j = 0; j < c.count; ++j) {
      if (!r.flags[c.start_norm + j * r.ngram_width]) return "chain member without a matching flag";
    }
    chained += c.count;
  }
  if (chained != static_cast<std::size_t>(std::count(r.flags.begin(), r.flags.end(), true))) {
    return "chains do not cover every matching flag";
  }
  if (classify_membership(r) != (r.overlap_ratio > kMembershipThreshold)) return "classifier inconsistent";
  return std::nullopt;
}

PortraitRegistry::~PortraitRegistry() { loaders_.clear(); }

void PortraitRegistry::mount_async(std::string name, std::filesystem::path path) {
  {
    std::lock_guard lock(mu_);
    if (entries_.contains(name)) throw Error(ErrorCode::kInvalidArgument, "portrait '" + name + "' mounted twice");
    entries_[name] = Entry{name, path, State::kLoading, nullptr, {}};
  }
  loaders_.emplace_back([this, name, path] {
    try {
      auto filter = std::make_shared<const BloomFilter>(BloomFilter::load(path));
      if (auto failure = self_check(*filter)) {
        finish(name, nullptr, "self-check failed: " + *failure);
      } else {
        finish(name, std::move(filter), {});
      }
    } catch (const std::exception& e) {
      finish(name, nullptr, e.what());
    }
  });
}

void PortraitRegistry::mount(std::string name, std::shared_ptr<const BloomFilter> filter) {
  std::lock_guard lock(mu_);
  if (entries_.contains(name)) throw Error(ErrorCode::kInvalidArgument, "portrait '" + name + "' mounted twice");
  entries_[name] = Entry{name, {}, State::kReady, std::move(filter), {}};
}

void PortraitRegistry::finish(const std::string& name, std::shared_ptr<const BloomFilter> filter, std::string error) {
  std::lock_guard lock(mu_);
  Entry& e = entries_.at(name);
  e.filter = std::move(filter);
  e.error = std::move(error);
  e.state = e.filter ? State::kReady : State::kFailed;
}

void PortraitRegistry::wait_until_loaded() {
  for (auto& t : loaders_) {
    if (t.joinable()) t.join();
  }
}

std::vector<PortraitRegistry::Entry> PortraitRegistry::snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<Entry> out;
  out.reserve(entries_.size());
  for (const auto& [_, e] : entries_) out.push_back(e);
  return out;
}

std::optional<PortraitRegistry::Entry> PortraitRegistry::find(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(name);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool PortraitRegistry::all_ready() const {
  std::lock_guard lock(mu_);
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const auto& kv) { return kv.second.state == State::kReady; });
}

std::optional<std::string> PortraitRegistry::first_failure() const {
  std::lock_guard lock(mu_);
  for (const auto& [name, e] : entries_) {
    if (e.state == State::kFailed) return name + ": " + e.error;
  }
  return std::nullopt;
}

PortraitService::PortraitService(PortraitRegistry& registry, ServiceConfig config)
    : registry_(registry), config_(config) {}

HttpResponse PortraitService::check(const std::string& body) const {
  const auto started = std::chrono::steady_clock::now();
  auto request = nlohmann::json::parse(body, nullptr, false);
  if (request.is_discarded() || !request.is_object()) return json_error(400, "request body must be a JSON object");
  auto doc = request.find("document");
  if (doc == request.end() || !doc->is_string()) return json_error(400, "'document' (string) is required");
  const auto& document = doc->get_ref<const std::string&>();
  if (document.size() > config_.max_doc_bytes) {
    return json_error(400, "document exceeds " + std::to_string(config_.max_doc_bytes) + " bytes");
  }
  bool include_flags = false;
  if (auto f = request.find("include_flags"); f != request.end() && !f->is_null()) {
    if (!f->is_boolean()) return json_error(400, "'include_flags' must be a boolean");
    include_flags = f->get<bool>();
  }

  std::string name;
  if (auto p = request.find("portrait"); p != request.end() && !p->is_null()) {
    if (!p->is_string()) return json_error(400, "'portrait' must be a string");
    name = p->get<std::string>();
  } else {
    const auto all = registry_.snapshot();
    if (all.empty()) return json_error(404, "no portraits mounted");
    if (all.size() > 1) return json_error(400, "several portraits mounted; 'portrait' is required");
    name = all.front().name;
  }

  const auto entry = registry_.find(name);
  if (!entry) return json_error(404, "unknown portrait '" + name + "'");
  if (entry->state != PortraitRegistry::State::kReady) {
    return json_error(503, "portrait '" + name + "' is not available");
  }

  const QueryReport report = check_document(*entry->filter, document);
  const double elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return {200, check_response_json(report, name, include_flags, elapsed_ms).dump()};
}

HttpResponse PortraitService::portraits() const {
  ordered_json list = ordered_json::array();
  for (const auto& e : registry_.snapshot()) {
    if (e.state != PortraitRegistry::State::kReady) continue;
    const FilterParams& p = e.filter->params();
    list.push_back(ordered_json{{"name", e.name},
                                {"ngram_width", p.ngram_width},
                                {"stride", p.stride},
                                {"m_bits", p.m_bits},
                                {"k_hashes", p.k_hashes},
                                {"inserted", e.filter->inserted()},
                                {"saturation", e.filter->saturation().fraction}});
  }
  return {200, list.dump()};
}

HttpResponse PortraitService::healthz() const {
  const auto all = registry_.snapshot();
  if (all.empty()) return json_error(503, "no portraits mounted");
  for (const auto& e : all) {
    if (e.state == PortraitRegistry::State::kLoading) return json_error(503, "portrait '" + e.name + "' loading");
    if (e.state == PortraitRegistry::State::kFailed) return json_error(503, e.name + ": " + e.error);
  }
  return {200, ordered_json{{"status", "ok"}, {"portraits", all.size()}}.dump()};
}

HttpServer::HttpServer(PortraitRegistry& registry, ServiceConfig config)
    : service_(registry, config), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  srv.set_payload_max_length(config.max_doc_bytes * 6 + (64 << 10));
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});

  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  srv.Post("/v1/check", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_.check(req.body));
  });
  srv.Get("/v1/portraits",
          [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, service_.portraits()); });
  srv.Get("/healthz", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, service_.healthz()); });
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() {
  listening_ = true;
  if (stop_requested_) {
    listening_ = false;
    return false;
  }
  const bool ok = server_->listen_after_bind();
  listening_ = false;
  return ok;
}

void HttpServer::stop() {
  stop_requested_ = true;
  // httplib ignores stop() until its accept loop runs.
  while (listening_ && !server_->is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  server_->stop();
}

bool HttpServer::running() const { return server_->is_running(); }

std::pair<std::string, int> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "address must be HOST:PORT");
  std::string host = addr.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::kInvalidArgument, "bad port in '" + addr + "'");
  return {host, port};
}

}  // namespace dataportrait
