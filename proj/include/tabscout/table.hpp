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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tabscout {

enum class ColumnKind { kNumeric, kText, kDate, kMixed };

struct ColumnData {
    std::string name;
    std::vector<std::string> values;
    ColumnKind inferred_kind = ColumnKind::kText;  // advisory only

    bool operator==(const ColumnData&) const = default;
};

struct TableMetadata {
    std::string caption;
    std::string description;

    bool empty() const { return caption.empty() && description.empty(); }
    bool operator==(const TableMetadata&) const = default;
};

struct TableRecord {
    std::string id;
    std::vector<ColumnData> columns;
    std::size_t row_count = 0;
    TableMetadata metadata;

    /// Index of the column named `name`, if any.
    std::optional<std::size_t> column_index(const std::string& name) const;

    bool operator==(const TableRecord&) const = default;
};

/// Tables keyed by id. Treated as immutable once an index has been built over it.
struct TablePool {
    std::string pool_id;
    std::map<std::string, TableRecord> tables;

    std::size_t size() const { return tables.size(); }
    const TableRecord& at(const std::string& id) const;
    void add(TableRecord table);

    bool operator==(const TablePool&) const = default;
};

enum class QueryMode { kNlOnly, kNlcUnion, kNlcJoin };

std::string_view to_string(QueryMode mode);
QueryMode parse_query_mode(std::string_view text);

struct QuerySpec {
    QueryMode mode = QueryMode::kNlOnly;
    std::optional<TableRecord> query_table;
    std::optional<std::string> condition;
    std::optional<std::string> key_column;
    std::size_t k = 10;

    bool has_condition() const;
};

struct GoldLabel {
    std::string query_id;
    std::string table_id;
    int relevance = 0;

    bool operator==(const GoldLabel&) const = default;
};

/// A benchmark query: a QuerySpec plus the id qrels refer to and the
/// query-table file it was loaded from (relative to the benchmark dir).
struct BenchmarkQuery {
    std::string id;
    QuerySpec spec;
    std::optional<std::string> query_table_file;
};

struct Benchmark {
    std::vector<BenchmarkQuery> queries;
    std::vector<GoldLabel> qrels;
    int max_grade = 1;
    /// Pool directory named by the manifest, resolved against the benchmark dir.
    std::optional<std::filesystem::path> pool_dir;

    /// qrels grouped by query id: table id -> grade.
    std::map<std::string, std::map<std::string, int>> qrels_by_query() const;
};

// CSV ------------------------------------------------------------------

/// Parses RFC 4180-style CSV (comma, double-quote escaping, CRLF or LF).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string write_csv(const std::vector<std::vector<std::string>>& rows);

/// Builds a table from CSV text. Duplicate header names get an ordinal suffix.
TableRecord parse_table_csv_text(std::string_view text, std::string id,
                                 std::vector<std::string>* warnings = nullptr);
TableRecord parse_table_csv(const std::filesystem::path& path,
                            const std::optional<std::filesystem::path>& metadata_path = std::nullopt,
                            std::vector<std::string>* warnings = nullptr);
std::string table_to_csv(const TableRecord& table);

TableMetadata load_metadata(const std::filesystem::path& path);
void write_metadata(const TableMetadata& meta, const std::filesystem::path& path);

ColumnKind infer_column_kind(const std::vector<std::string>& values);

// Pools and benchmarks ---------------------------------------------------

/// Loads every `<stem>.csv` in `dir`; `<stem>.meta.json` is the optional sidecar.
TablePool load_pool(const std::filesystem::path& dir);
void write_pool(const TablePool& pool, const std::filesystem::path& dir);

Benchmark load_benchmark(const std::filesystem::path& dir);
void write_benchmark(const Benchmark& bench, const std::filesystem::path& dir);

/// Throws tabscout::Error when a QuerySpec invariant is violated.
void validate_query(const QuerySpec& q);

}  // namespace tabscout
