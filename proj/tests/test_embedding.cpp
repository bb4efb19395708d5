// Copyright 2026 The tabscout Authors
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

#include "tabscout/embedding.hpp"
#include "tabscout/error.hpp"
#include "tabscout/table.hpp"
#include "test_util.hpp"

#include <atomic>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

using namespace tabscout;

namespace {

HashingProvider hashing(std::size_t dim = 256, std::uint64_t seed = 0) {
    EmbeddingProviderConfig c;
    c.dim = dim;
    c.seed = seed;
    return HashingProvider(c);
}

ColumnData column(std::string name, std::vector<std::string> values) { return {std::move(name), std::move(values)}; }

}  // namespace

TEST_CASE("column serialization") {
    TableMetadata meta{"grades", ""};
    CHECK(serialize_column(column("math", {"90", "85"}), meta, 64) == "grades | math | 90, 85");
    CHECK(serialize_column(column("math", {"90", "85"}), {}, 64) == "| math | 90, 85");
    CHECK(serialize_column(column("math", {}), meta, 64) == "grades | math");
    CHECK(serialize_column(column("math", {"90", "", "90", "85"}), meta, 64) == "grades | math | 90, 85");

    std::vector<std::string> many;
    for (int i = 0; i < 200; ++i) many.push_back("v" + std::to_string(i));
    auto s = serialize_column(column("c", many), meta, 64);
    auto values = s.substr(s.rfind("| ") + 2);
    std::size_t commas = std::count(values.begin(), values.end(), ',');
    CHECK(commas + 1 == 64);
    CHECK(values.find("v63") != std::string::npos);
    CHECK(values.find("v64") == std::string::npos);
}

TEST_CASE("tokenizer") {
    CHECK(tokenize("Hello, World-2020!") == std::vector<std::string>{"hello", "world", "2020"});
    CHECK(tokenize("  ,,;").empty());
    CHECK(tokenize("caf\xC3\xA9 ok") == std::vector<std::string>{"caf\xC3\xA9", "ok"});
}

TEST_CASE("hashing provider basics") {
    auto p = hashing();
    Vector a = p.embed_text("abc");
    Vector b = p.embed_text("abc");
    CHECK(a == b);
    CHECK(a.size() == 256);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.embed_text("").isZero(0.0));
    CHECK(p.embed_text(" ,;").isZero(0.0));
    CHECK(p.embed_text("ABC") == a);

    auto other_seed = hashing(256, 9);
    CHECK(other_seed.embed_text("the quick brown fox") != p.embed_text("the quick brown fox"));

    auto batch = p.embed_batch({"abc", "", "x y"});
    REQUIRE(batch.size() == 3);
    CHECK(batch[0] == a);
    CHECK(batch[1].isZero(0.0));

    EmbeddingProviderConfig tiny;
    tiny.dim = 4;
    CHECK_THROWS_AS(HashingProvider{tiny}, Error);
}

TEST_CASE("hashing provider spreads squared mass") {
    auto p = hashing();
    std::mt19937_64 rng(11);
    std::string text;
    for (int i = 0; i < 1000; ++i) {
        std::string tok;
        for (int j = 0, n = 3 + static_cast<int>(rng() % 6); j < n; ++j) tok += static_cast<char>('a' + rng() % 26);
        text += tok + " ";
    }
    Vector v = p.embed_text(text);
    Vector sq = v.array().square();
    CHECK(sq.maxCoeff() / sq.sum() <= 0.20);
}

TEST_CASE("column embeddings") {
    auto p = hashing();
    TableMetadata grades{"grades", ""};
    auto a = column("math", {"90", "85"});
    CHECK(embed_column(p, a, grades) == embed_column(p, a, grades));
    CHECK(embed_column(p, a, grades) != embed_column(p, a, TableMetadata{"weather", ""}));
}

TEST_CASE("mean direction") {
    std::vector<Vector> v{Vector::Unit(2, 0), Vector::Unit(2, 1)};
    Vector m = mean_direction(v, 2);
    CHECK(m[0] == doctest::Approx(0.70710678).epsilon(1e-8));
    CHECK(m[1] == doctest::Approx(0.70710678).epsilon(1e-8));
    CHECK(mean_direction({Vector::Unit(3, 1)}, 3) == Vector::Unit(3, 1));
    CHECK(mean_direction({Vector::Unit(3, 1), Vector::Unit(3, 1)}, 3) == Vector::Unit(3, 1));
    CHECK(mean_direction({}, 3).isZero(0.0));
    CHECK(mean_direction({Vector::Zero(3)}, 3).isZero(0.0));
}

TEST_CASE("table embeddings") {
    auto p = hashing(64);
    auto t = parse_table_csv_text("name,math\nann,90\nbob,85\n", "t");
    auto pv = pool_vector(p, t);
    CHECK(pv.metadata.isZero(0.0));
    CHECK(pv.content.norm() == doctest::Approx(1.0));
    CHECK(pv.concatenated.size() == 128);
    CHECK(pv.concatenated.head(64) == pv.content);

    auto single = parse_table_csv_text("math\n90\n85\n", "s");
    CHECK(table_content_vector(p, single) == embed_column(p, single.columns[0], single.metadata));

    t.metadata = {"grades", "exam scores"};
    auto e = embed_table(p, t);
    CHECK(e.columns.size() == 2);
    CHECK(e.metadata == p.embed_text("grades exam scores"));
    CHECK(e.concatenated().tail(64) == e.metadata);
    CHECK(metadata_text({"", "only description"}) == "only description");
}

TEST_CASE("remote provider against a local encoder") {
    auto reference = hashing(16);
    std::atomic<int> in_flight{0}, peak{0}, calls{0};
    std::string mode = "ok";
    httplib::Server server;
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        ++calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json vectors = nlohmann::json::array();
        for (const auto& t : body.at("texts")) {
            Vector v = reference.embed_text(t.get<std::string>());
            std::vector<double> raw(v.data(), v.data() + v.size());
            vectors.push_back(raw);
        }
        nlohmann::json reply = {{"dim", mode == "bad-dim" ? 8 : 16}, {"vectors", vectors}};
        if (mode == "garbage") {
            res.set_content("{\"vectors\": \"nope\"}", "application/json");
        } else if (mode == "error") {
            res.status = 500;
        } else {
            res.set_content(reply.dump(), "application/json");
        }
        --in_flight;
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    EmbeddingProviderConfig c;
    c.kind = ProviderKind::kRemote;
    c.dim = 16;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port);
    c.max_in_flight = 2;
    c.timeout_seconds = 5;
    auto remote = make_provider(c);

    SUBCASE("vectors match the encoder and stay normalized") {
        Vector v = remote->embed_text("students grades");
        CHECK((v - reference.embed_text("students grades")).norm() < 1e-12);
        auto batch = remote->embed_batch({"a b", "", "c"});
        CHECK(batch[1].isZero(0.0));
        CHECK((batch[2] - reference.embed_text("c")).norm() < 1e-12);
        CHECK(remote->embed_text("  ").isZero(0.0));
    }
    SUBCASE("concurrent callers respect the in-flight cap") {
        std::vector<std::thread> callers;
        for (int i = 0; i < 8; ++i) callers.emplace_back([&, i] { remote->embed_text("text " + std::to_string(i)); });
        for (auto& t : callers) t.join();
        CHECK(calls.load() == 8);
        CHECK(peak.load() <= 2);
    }
    SUBCASE("wrong dimension") {
        mode = "bad-dim";
        CHECK_THROWS_WITH_AS(remote->embed_text("x"), doctest::Contains("DimMismatch"), Error);
    }
    SUBCASE("malformed reply") {
        mode = "garbage";
        CHECK_THROWS_WITH_AS(remote->embed_text("x"), doctest::Contains("ProviderUnavailable"), Error);
    }
    SUBCASE("server error") {
        mode = "error";
        CHECK_THROWS_WITH_AS(remote->embed_text("x"), doctest::Contains("ProviderUnavailable"), Error);
    }
    server.stop();
    th.join();

    SUBCASE("unreachable endpoint") {
        auto gone = make_provider(c);
        CHECK_THROWS_WITH_AS(gone->embed_text("x"), doctest::Contains("ProviderUnavailable"), Error);
    }
}
