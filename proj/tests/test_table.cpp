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

#include <doctest.h>

#include <random>

#include "tabscout/error.hpp"
#include "tabscout/table.hpp"
#include "test_util.hpp"

using namespace tabscout;
using tabscout::testing::TempDir;
using tabscout::testing::write_text;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected tabscout::Error");
    return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("three-row csv parses into two columns") {
    auto t = parse_table_csv_text("id,name\n1,ann\n2,bob\n3,cy\n", "people");
    CHECK(t.id == "people");
    REQUIRE(t.columns.size() == 2);
    CHECK(t.row_count == 3);
    CHECK(t.columns[0].name == "id");
    CHECK(t.columns[1].values == std::vector<std::string>{"ann", "bob", "cy"});
    CHECK(t.columns[0].inferred_kind == ColumnKind::kNumeric);
    CHECK(t.columns[1].inferred_kind == ColumnKind::kText);
}

TEST_CASE("ragged rows are rejected") {
    CHECK(code_of([] { parse_table_csv_text("a,b\n1,2\n3\n", "x"); }) == ErrorCode::kRaggedTable);
    CHECK(code_of([] { parse_table_csv_text("a,b\n1,2,3\n", "x"); }) == ErrorCode::kRaggedTable);
}

TEST_CASE("header-only csv gives an empty table") {
    auto t = parse_table_csv_text("a,b,c\n", "x");
    CHECK(t.row_count == 0);
    REQUIRE(t.columns.size() == 3);
    for (const auto& c : t.columns) CHECK(c.values.empty());
}

TEST_CASE("empty input is an error") {
    CHECK(code_of([] { parse_table_csv_text("", "x"); }) == ErrorCode::kEmptyTable);
    CHECK(code_of([] { parse_table_csv_text("\n\n", "x"); }) == ErrorCode::kEmptyTable);
}

TEST_CASE("quoting, CRLF and BOM") {
    auto rows = parse_csv("\xEF\xBB\xBFname,note\r\n\"Smith, J\",\"said \"\"hi\"\"\"\r\nx,\"multi\nline\"\r\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][0] == "name");
    CHECK(rows[1][0] == "Smith, J");
    CHECK(rows[1][1] == "said \"hi\"");
    CHECK(rows[2][1] == "multi\nline");
    CHECK(code_of([] { parse_csv("a,\"open\n"); }) == ErrorCode::kParseError);
}

TEST_CASE("duplicate and blank headers are renamed with a warning") {
    std::vector<std::string> warnings;
    auto t = parse_table_csv_text("a,a,,a\n1,2,3,4\n", "x", &warnings);
    CHECK(t.columns[0].name == "a");
    CHECK(t.columns[1].name == "a_2");
    CHECK(t.columns[2].name == "column_3");
    CHECK(t.columns[3].name == "a_3");
    CHECK(!warnings.empty());
}

TEST_CASE("csv writer round-trips arbitrary cells") {
    std::mt19937_64 rng(3);
    const std::string alphabet = "ab ,\"\n\r;x";
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t cols = 1 + rng() % 4, nrows = 1 + rng() % 5;
        std::vector<std::vector<std::string>> rows(nrows, std::vector<std::string>(cols));
        for (auto& r : rows) {
            for (auto& cell : r) {
                std::size_t len = rng() % 6;
                for (std::size_t i = 0; i < len; ++i) cell += alphabet[rng() % alphabet.size()];
            }
        }
        // a row of a single empty field is indistinguishable from a blank line unless quoted
        CHECK(parse_csv(write_csv(rows)) == rows);
    }
}

TEST_CASE("table csv round trip") {
    auto t = parse_table_csv_text("k,v\n1,\"a,b\"\n2,\n", "t");
    auto back = parse_table_csv_text(table_to_csv(t), "t");
    CHECK(back == t);
}

TEST_CASE("pool loading") {
    TempDir dir("pool");
    for (int i = 0; i < 5; ++i) write_text(dir / ("t" + std::to_string(i) + ".csv"), "a,b\n1,2\n");
    write_text(dir / "t0.meta.json", R"({"caption": "grades", "description": "exam results"})");
    write_text(dir / "notes.txt", "ignored");
    auto pool = load_pool(dir.path());
    CHECK(pool.size() == 5);
    CHECK(pool.at("t0").metadata.caption == "grades");
    CHECK(pool.at("t1").metadata.empty());
    CHECK(code_of([&] { pool.at("nope"); }) == ErrorCode::kUnknownTable);
    CHECK(code_of([&] { pool.add(pool.at("t0")); }) == ErrorCode::kDuplicateId);

    TempDir empty("empty");
    CHECK(code_of([&] { load_pool(empty.path()); }) == ErrorCode::kEmptyPool);

    TempDir copy("copy");
    write_pool(pool, copy.path());
    auto again = load_pool(copy.path());
    CHECK(again.tables == pool.tables);
}

TEST_CASE("benchmark loading and validation") {
    TempDir dir("bench");
    write_text(dir / "manifest.json", R"({"max_grade": 2})");
    write_text(dir / "tables/q1.csv", "name,math\nann,90\n");
    write_text(dir / "queries.jsonl",
               R"({"id": "q1", "mode": "nlc_union", "query_table": "tables/q1.csv", "condition": "grades above 80"})"
               "\n"
               R"({"id": "q2", "mode": "nl_only", "condition": "weather in 2020", "k": 5})"
               "\n");
    write_text(dir / "qrels.tsv", "# query table grade\nq1\ta\t2\nq1\tb\t0\nq1\tc\t1\nq2\ta\t1\nq2 d 0\nq2\te\t2\n");
    auto b = load_benchmark(dir.path());
    CHECK(b.queries.size() == 2);
    CHECK(b.qrels.size() == 6);
    CHECK(b.max_grade == 2);
    CHECK(b.queries[1].spec.k == 5);
    REQUIRE(b.queries[0].spec.query_table.has_value());
    CHECK(b.queries[0].spec.query_table->columns.size() == 2);
    CHECK(b.qrels_by_query()["q1"]["c"] == 1);

    SUBCASE("round trip") {
        TempDir out("bench-out");
        write_benchmark(b, out.path());
        auto again = load_benchmark(out.path());
        REQUIRE(again.queries.size() == b.queries.size());
        CHECK(again.qrels == b.qrels);
        CHECK(again.max_grade == b.max_grade);
        for (std::size_t i = 0; i < b.queries.size(); ++i) {
            CHECK(again.queries[i].id == b.queries[i].id);
            CHECK(again.queries[i].spec.mode == b.queries[i].spec.mode);
            CHECK(again.queries[i].spec.condition == b.queries[i].spec.condition);
            CHECK(again.queries[i].spec.k == b.queries[i].spec.k);
            CHECK(again.queries[i].spec.query_table.has_value() == b.queries[i].spec.query_table.has_value());
            if (b.queries[i].spec.query_table) {
                CHECK(again.queries[i].spec.query_table->columns == b.queries[i].spec.query_table->columns);
            }
        }
    }
    SUBCASE("grade above the manifest max") {
        write_text(dir / "qrels.tsv", "q1\ta\t3\n");
        CHECK(code_of([&] { load_benchmark(dir.path()); }) == ErrorCode::kGradeOutOfRange);
    }
    SUBCASE("qrel for an unknown query") {
        write_text(dir / "qrels.tsv", "q9\ta\t1\n");
        CHECK(code_of([&] { load_benchmark(dir.path()); }) == ErrorCode::kDanglingQrel);
    }
}

TEST_CASE("query validation") {
    auto table = parse_table_csv_text("name,math\nann,90\n", "q");
    QuerySpec q;
    q.mode = QueryMode::kNlcUnion;
    q.query_table = table;
    q.condition = "average grade above 80";
    CHECK_NOTHROW(validate_query(q));

    QuerySpec j = q;
    j.mode = QueryMode::kNlcJoin;
    CHECK(code_of([&] { validate_query(j); }) == ErrorCode::kMissingKeyColumn);
    j.key_column = "ID";
    CHECK(code_of([&] { validate_query(j); }) == ErrorCode::kUnknownColumn);
    j.key_column = "name";
    CHECK_NOTHROW(validate_query(j));

    QuerySpec nl;
    nl.mode = QueryMode::kNlOnly;
    nl.condition = "";
    CHECK(code_of([&] { validate_query(nl); }) == ErrorCode::kMissingCondition);
    nl.condition = "   ";
    CHECK(code_of([&] { validate_query(nl); }) == ErrorCode::kMissingCondition);

    QuerySpec u;
    u.mode = QueryMode::kNlcUnion;
    CHECK(code_of([&] { validate_query(u); }) == ErrorCode::kMissingQueryTable);

    QuerySpec zero = q;
    zero.k = 0;
    CHECK(code_of([&] { validate_query(zero); }) == ErrorCode::kInvalidQuery);

    CHECK(parse_query_mode("nlc_join") == QueryMode::kNlcJoin);
    CHECK(code_of([] { parse_query_mode("fuzzy"); }) == ErrorCode::kInvalidQuery);
}

TEST_CASE("column kind inference") {
    CHECK(infer_column_kind({"1", "2.5", "-3e2"}) == ColumnKind::kNumeric);
    CHECK(infer_column_kind({"2020-01-02", "1999-12-31"}) == ColumnKind::kDate);
    CHECK(infer_column_kind({"1", "x"}) == ColumnKind::kMixed);
    CHECK(infer_column_kind({"a", "b"}) == ColumnKind::kText);
}
