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

#include <sys/stat.h>

#include <fstream>
#include <future>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include "dataportrait/error.hpp"
#include "dataportrait/ingest.hpp"
#include "dataportrait/service.hpp"
#include "test_util.hpp"

using namespace dataportrait;
using dataportrait::testing::random_text;
using dataportrait::testing::TempDir;
using json = nlohmann::json;

namespace {

struct Fixture {
  std::vector<std::string> docs;
  std::shared_ptr<const BloomFilter> filter;

  explicit Fixture(std::uint64_t seed = 1, std::uint32_t width = 50) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 40; ++i) docs.push_back(random_text(rng, 1100));
    FilterParams p = plan_parameters(20'000, 1e-3);
    p.ngram_width = width;
    p.stride = width;
    BloomFilter f(p);
    for (const auto& d : docs) ingest_document(f, d);
    filter = std::make_shared<const BloomFilter>(std::move(f));
  }
};

std::string check_body(const std::string& doc, const std::string& portrait = {}, bool flags = false) {
  json body{{"document", doc}};
  if (!portrait.empty()) body["portrait"] = portrait;
  if (flags) body["include_flags"] = true;
  return body.dump();
}

json without_elapsed(const std::string& body) {
  json j = json::parse(body);
  j.erase("elapsed_ms");
  return j;
}

}  // namespace

TEST_CASE("response schema") {
  Fixture fx;
  const QueryReport r = check_document(*fx.filter, fx.docs[0]);
  const auto j = check_response_json(r, "pile", true, 1.5);
  std::vector<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"portrait", "ngram_width", "doc_norm_length", "chains", "longest_chain",
                                         "overlap_ratio", "expected_matches", "is_member", "flags", "elapsed_ms"});
  CHECK(j["portrait"] == "pile");
  CHECK(j["ngram_width"] == 50);
  CHECK(j["is_member"] == true);
  CHECK(j["flags"].size() == r.flags.size());
  std::vector<std::string> chain_keys;
  for (const auto& [k, _] : j["longest_chain"].items()) chain_keys.push_back(k);
  CHECK(chain_keys == std::vector<std::string>{"start_orig", "end_orig", "start_norm", "count", "char_length", "text"});
  for (std::size_t i = 1; i < j["chains"].size(); ++i) {
    CHECK(j["chains"][i - 1]["char_length"] >= j["chains"][i]["char_length"]);
  }
  CHECK_FALSE(check_response_json(r, "pile", false, 0).contains("flags"));
  CHECK(check_response_json(QueryReport{}, "x", false, 0)["longest_chain"].is_null());
}

TEST_CASE("check handler") {
  Fixture fx;
  PortraitRegistry registry;
  registry.mount("fixture", fx.filter);
  PortraitService service(registry, ServiceConfig{4096});

  SUBCASE("member document") {
    const HttpResponse r = service.check(check_body(fx.docs[3]));
    REQUIRE(r.status == 200);
    const json j = json::parse(r.body);
    CHECK(j["is_member"] == true);
    CHECK_FALSE(j["longest_chain"].is_null());
    CHECK(j["portrait"] == "fixture");
    CHECK(j["longest_chain"]["end_orig"] <= 1100);
  }
  SUBCASE("novel document") {
    std::mt19937_64 rng(1234);
    const json j = json::parse(service.check(check_body(random_text(rng, 1100))).body);
    CHECK(j["is_member"] == false);
    for (const auto& c : j["chains"]) CHECK(c["count"] == 1);
  }
  SUBCASE("flags on request") {
    const json j = json::parse(service.check(check_body(fx.docs[0], "fixture", true)).body);
    CHECK(j["flags"].size() == 1100 - 50 + 1);
  }
  SUBCASE("identical requests give identical bodies apart from elapsed_ms") {
    const std::string body = check_body(fx.docs[7].substr(100, 400));
    CHECK(without_elapsed(service.check(body).body) == without_elapsed(service.check(body).body));
  }
  SUBCASE("1 KiB document answers well under 10 ms") {
    const json j = json::parse(service.check(check_body(fx.docs[1].substr(0, 1024))).body);
    CHECK(j["elapsed_ms"].get<double>() < 10.0);
  }
  SUBCASE("errors") {
    CHECK(service.check("{not json").status == 400);
    CHECK(service.check("[]").status == 400);
    CHECK(service.check(R"({"doc": "x"})").status == 400);
    CHECK(service.check(R"({"document": 5})").status == 400);
    CHECK(service.check(R"({"document": "x", "include_flags": "yes"})").status == 400);
    CHECK(service.check(check_body(std::string(4097, 'a'))).status == 400);
    CHECK(service.check(check_body(std::string(4096, 'a'))).status == 200);
    CHECK(service.check(check_body("x", "other")).status == 404);
    CHECK(json::parse(service.check(check_body("x", "other")).body).contains("error"));
  }
}

TEST_CASE("multiple portraits and listing") {
  Fixture pile(1), stack(2, 20);
  PortraitRegistry registry;
  registry.mount("pile", pile.filter);
  registry.mount("stack", stack.filter);
  CHECK_THROWS_AS(registry.mount("pile", pile.filter), Error);
  PortraitService service(registry, ServiceConfig{});

  CHECK(service.check(check_body(pile.docs[0])).status == 400);
  const json in_pile = json::parse(service.check(check_body(pile.docs[0], "pile")).body);
  const json in_stack = json::parse(service.check(check_body(pile.docs[0], "stack")).body);
  CHECK(in_pile["is_member"] == true);
  CHECK(in_stack["is_member"] == false);
  CHECK(in_stack["ngram_width"] == 20);

  const json list = json::parse(service.portraits().body);
  REQUIRE(list.size() == 2);
  CHECK(list[0]["name"] == "pile");
  CHECK(list[0]["ngram_width"] == 50);
  CHECK(list[0]["stride"] == 50);
  CHECK(list[0]["m_bits"] == pile.filter->params().m_bits);
  CHECK(list[0]["k_hashes"] == pile.filter->params().k_hashes);
  CHECK(list[0]["inserted"] == pile.filter->inserted());
  CHECK(list[0]["saturation"].get<double>() == doctest::Approx(pile.filter->saturation().fraction));
  CHECK(service.healthz().status == 200);
}

TEST_CASE("no portraits mounted") {
  PortraitRegistry registry;
  PortraitService service(registry, ServiceConfig{});
  CHECK(service.portraits().body == "[]");
  CHECK(service.check(check_body("hello")).status == 404);
  CHECK(service.healthz().status == 503);
}

TEST_CASE("loading state, then ready") {
  Fixture fx;
  TempDir dir;
  const auto fifo = dir / "slow.dpbf";
  REQUIRE(mkfifo(fifo.c_str(), 0600) == 0);
  PortraitRegistry registry;
  registry.mount_async("slow", fifo);
  PortraitService service(registry, ServiceConfig{});

  // The loader blocks opening the FIFO until a writer appears.
  CHECK(service.healthz().status == 503);
  CHECK(service.check(check_body(fx.docs[0])).status == 503);
  CHECK(service.portraits().body == "[]");
  {
    std::ofstream out(fifo, std::ios::binary);
    fx.filter->serialize(out);
  }
  registry.wait_until_loaded();
  CHECK(registry.all_ready());
  CHECK(service.healthz().status == 200);
  CHECK(json::parse(service.check(check_body(fx.docs[0])).body)["is_member"] == true);
}

TEST_CASE("corrupted portrait is refused") {
  Fixture fx;
  TempDir dir;
  fx.filter->save(dir / "bad.dpbf");
  {
    std::fstream f(dir / "bad.dpbf", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(100);
    f.put('\x7f');
  }
  PortraitRegistry registry;
  registry.mount_async("bad", dir / "bad.dpbf");
  registry.wait_until_loaded();
  REQUIRE(registry.first_failure());
  CHECK(registry.first_failure()->find("checksum-mismatch") != std::string::npos);
  PortraitService service(registry, ServiceConfig{});
  CHECK(service.healthz().status == 503);
  CHECK(service.check(check_body(fx.docs[0])).status == 503);
}

TEST_CASE("self_check passes on real portraits of any width") {
  for (std::uint32_t width : {1U, 4U, 50U, 400U}) {
    FilterParams p = plan_parameters(1000, 1e-3);
    p.ngram_width = width;
    p.stride = width;
    CHECK_FALSE(self_check(BloomFilter(p)));
  }
}

TEST_CASE("parse_address") {
  CHECK(parse_address("127.0.0.1:8080") == std::pair<std::string, int>{"127.0.0.1", 8080});
  CHECK(parse_address(":9000") == std::pair<std::string, int>{"0.0.0.0", 9000});
  CHECK_THROWS_AS(parse_address("localhost"), Error);
  CHECK_THROWS_AS(parse_address("localhost:http"), Error);
  CHECK_THROWS_AS(parse_address("localhost:70000"), Error);
}

TEST_CASE("HTTP transport") {
  Fixture fx;
  PortraitRegistry registry;
  registry.mount("fixture", fx.filter);
  HttpServer server(registry, ServiceConfig{});
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen_after_bind(); });
  while (!server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));

  httplib::Client client("127.0.0.1", port);
  SUBCASE("endpoints and CORS") {
    auto health = client.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    auto list = client.Get("/v1/portraits");
    REQUIRE(list);
    CHECK(json::parse(list->body).size() == 1);
    CHECK(list->get_header_value("Access-Control-Allow-Origin") == "*");
    auto res = client.Post("/v1/check", check_body(fx.docs[2]), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["is_member"] == true);
    auto bad = client.Post("/v1/check", "nope", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    auto preflight = client.Options("/v1/check");
    REQUIRE(preflight);
    CHECK(preflight->status == 204);
  }
  SUBCASE("64 concurrent identical requests") {
    const std::string body = check_body(fx.docs[5]);
    const json expected = without_elapsed(PortraitService(registry, ServiceConfig{}).check(body).body);
    std::vector<std::future<std::string>> replies;
    for (int i = 0; i < 64; ++i) {
      replies.push_back(std::async(std::launch::async, [&, port] {
        httplib::Client c("127.0.0.1", port);
        auto r = c.Post("/v1/check", body, "application/json");
        return r && r->status == 200 ? r->body : std::string("{}");
      }));
    }
    for (auto& f : replies) CHECK(without_elapsed(f.get()) == expected);
  }
  server.stop();
  loop.join();
}
