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

#include "tabscout/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tabscout/error.hpp"

namespace tabscout {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool is_number(std::string_view s) {
    auto t = trim(s);
    if (t.empty()) return false;
    double v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    return ec == std::errc() && ptr == t.data() + t.size();
}

}  // namespace

std::optional<std::size_t> TableRecord::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return i;
    }
    return std::nullopt;
}

const TableRecord& TablePool::at(const std::string& id) const {
    auto it = tables.find(id);
    if (it == tables.end()) throw Error(ErrorCode::kUnknownTable, "no table '" + id + "'");
    return it->second;
}

void TablePool::add(TableRecord table) {
    if (tables.count(table.id) != 0) {
        throw Error(ErrorCode::kDuplicateId, "duplicate table id '" + table.id + "'");
    }
    auto id = table.id;
    tables.emplace(std::move(id), std::move(table));
}

std::string_view to_string(QueryMode mode) {
    switch (mode) {
        case QueryMode::kNlOnly: return "nl_only";
        case QueryMode::kNlcUnion: return "nlc_union";
        case QueryMode::kNlcJoin: return "nlc_join";
    }
    return "nl_only";
}

QueryMode parse_query_mode(std::string_view text) {
    if (text == "nl_only") return QueryMode::kNlOnly;
    if (text == "nlc_union") return QueryMode::kNlcUnion;
    if (text == "nlc_join") return QueryMode::kNlcJoin;
    throw Error(ErrorCode::kInvalidQuery, "unknown mode '" + std::string(text) + "'");
}

bool QuerySpec::has_condition() const {
    return condition.has_value() && !trim(*condition).empty();
}

std::map<std::string, std::map<std::string, int>> Benchmark::qrels_by_query() const {
    std::map<std::string, std::map<std::string, int>> out;
    for (const auto& q : qrels) out[q.query_id][q.table_id] = q.relevance;
    return out;
}

// CSV ------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;

    auto end_row = [&] {
        if (row_has_content || !row.empty()) {
            row.push_back(std::move(field));
            rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        row_has_content = false;
    };

    // Skip a UTF-8 BOM.
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    for (std::size_t i = 0; i < text.size(); ++i) {
        char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case '"':
                in_quotes = true;
                row_has_content = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                row_has_content = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(ch);
                row_has_content = true;
        }
    }
    if (in_quotes) throw Error(ErrorCode::kParseError, "unterminated quoted field");
    end_row();
    return rows;
}

std::string write_csv(const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(',');
            const auto& f = row[i];
            bool quote = f.find_first_of(",\"\r\n") != std::string::npos ||
                         (row.size() == 1 && f.empty());
            if (quote) {
                out.push_back('"');
                for (char ch : f) {
                    if (ch == '"') out.push_back('"');
                    out.push_back(ch);
                }
                out.push_back('"');
            } else {
                out += f;
            }
        }
        out.push_back('\n');
    }
    return out;
}

ColumnKind infer_column_kind(const std::vector<std::string>& values) {
    static const std::regex kDate(R"(\d{4}-\d{2}-\d{2}.*)");
    std::size_t numeric = 0, date = 0, nonempty = 0;
    for (const auto& v : values) {
        auto t = trim(v);
        if (t.empty()) continue;
        ++nonempty;
        if (is_number(t)) {
            ++numeric;
        } else if (std::regex_match(t, kDate)) {
            ++date;
        }
    }
    if (nonempty == 0) return ColumnKind::kText;
    if (numeric == nonempty) return ColumnKind::kNumeric;
    if (date == nonempty) return ColumnKind::kDate;
    if (numeric == 0 && date == 0) return ColumnKind::kText;
    return ColumnKind::kMixed;
}

TableRecord parse_table_csv_text(std::string_view text, std::string id,
                                 std::vector<std::string>* warnings) {
    auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::kEmptyTable, "table '" + id + "' has no header");

    const auto& header = rows.front();
    TableRecord table;
    table.id = std::move(id);
    table.row_count = rows.size() - 1;

    std::set<std::string> seen;
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string name = trim(header[c]);
        if (name.empty()) {
            name = "column_" + std::to_string(c + 1);
            if (warnings) warnings->push_back("empty header at position " + std::to_string(c + 1));
        }
        if (seen.count(name)) {
            std::string base = name;
            int ordinal = 2;
            do {
                name = base + "_" + std::to_string(ordinal++);
            } while (seen.count(name));
            if (warnings) warnings->push_back("duplicate column '" + base + "' renamed to '" + name + "'");
        }
        seen.insert(name);
        ColumnData col;
        col.name = std::move(name);
        col.values.reserve(table.row_count);
        table.columns.push_back(std::move(col));
    }

    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw Error(ErrorCode::kRaggedTable,
                        "table '" + table.id + "' row " + std::to_string(r) + " has " +
                            std::to_string(rows[r].size()) + " fields, header has " +
                            std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < header.size(); ++c) {
            table.columns[c].values.push_back(std::move(rows[r][c]));
        }
    }
    for (auto& col : table.columns) col.inferred_kind = infer_column_kind(col.values);
    return table;
}

TableRecord parse_table_csv(const fs::path& path, const std::optional<fs::path>& metadata_path,
                            std::vector<std::string>* warnings) {
    auto table = parse_table_csv_text(read_file(path), path.stem().string(), warnings);
    if (metadata_path && fs::exists(*metadata_path)) table.metadata = load_metadata(*metadata_path);
    return table;
}

std::string table_to_csv(const TableRecord& table) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(table.row_count + 1);
    std::vector<std::string> header;
    for (const auto& c : table.columns) header.push_back(c.name);
    rows.push_back(std::move(header));
    for (std::size_t r = 0; r < table.row_count; ++r) {
        std::vector<std::string> row;
        for (const auto& c : table.columns) row.push_back(c.values[r]);
        rows.push_back(std::move(row));
    }
    return write_csv(rows);
}

TableMetadata load_metadata(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
    }
    TableMetadata meta;
    meta.caption = j.value("caption", "");
    meta.description = j.value("description", "");
    return meta;
}

void write_metadata(const TableMetadata& meta, const fs::path& path) {
    json j = {{"caption", meta.caption}, {"description", meta.description}};
    write_file(path, j.dump(2) + "\n");
}

// Pools and benchmarks ---------------------------------------------------

TablePool load_pool(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::kIoError, dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    if (files.empty()) throw Error(ErrorCode::kEmptyPool, "no .csv tables in " + dir.string());
    std::sort(files.begin(), files.end());

    TablePool pool;
    pool.pool_id = fs::absolute(dir).lexically_normal().filename().string();
    if (pool.pool_id.empty()) pool.pool_id = "pool";
    for (const auto& f : files) {
        auto meta = f.parent_path() / (f.stem().string() + ".meta.json");
        pool.add(parse_table_csv(f, meta));
    }
    return pool;
}

void write_pool(const TablePool& pool, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& [id, table] : pool.tables) {
        write_file(dir / (id + ".csv"), table_to_csv(table));
        if (!table.metadata.empty()) write_metadata(table.metadata, dir / (id + ".meta.json"));
    }
}

namespace {

std::optional<std::string> optional_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

}  // namespace

Benchmark load_benchmark(const fs::path& dir) {
    Benchmark bench;

    json manifest;
    try {
        manifest = json::parse(read_file(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParseError, "manifest: " + std::string(e.what()));
    }
    if (!manifest.contains("max_grade")) throw Error(ErrorCode::kParseError, "manifest lacks max_grade");
    bench.max_grade = manifest.at("max_grade").get<int>();
    if (auto pool = optional_string(manifest, "pool")) bench.pool_dir = (dir / *pool).lexically_normal();

    std::istringstream queries(read_file(dir / "queries.jsonl"));
    std::string line;
    std::set<std::string> ids;
    std::size_t lineno = 0;
    while (std::getline(queries, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kParseError, "queries.jsonl:" + std::to_string(lineno) + ": " + e.what());
        }
        BenchmarkQuery q;
        q.id = j.at("id").get<std::string>();
        if (!ids.insert(q.id).second) throw Error(ErrorCode::kDuplicateId, "duplicate query id '" + q.id + "'");
        q.spec.mode = parse_query_mode(j.at("mode").get<std::string>());
        q.spec.condition = optional_string(j, "condition");
        q.spec.key_column = optional_string(j, "key_column");
        q.spec.k = j.value("k", std::size_t{10});
        q.query_table_file = optional_string(j, "query_table");
        if (q.query_table_file) {
            fs::path p = dir / *q.query_table_file;
            fs::path meta = p.parent_path() / (p.stem().string() + ".meta.json");
            q.spec.query_table = parse_table_csv(p, meta);
        }
        bench.queries.push_back(std::move(q));
    }

    std::istringstream qrels(read_file(dir / "qrels.tsv"));
    lineno = 0;
    while (std::getline(qrels, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::istringstream fields(t);
        GoldLabel g;
        if (!(fields >> g.query_id >> g.table_id >> g.relevance)) {
            throw Error(ErrorCode::kParseError, "qrels.tsv:" + std::to_string(lineno) + ": malformed");
        }
        if (!ids.count(g.query_id)) {
            throw Error(ErrorCode::kDanglingQrel, "qrel references unknown query '" + g.query_id + "'");
        }
        if (g.relevance < 0 || g.relevance > bench.max_grade) {
            throw Error(ErrorCode::kGradeOutOfRange, "grade " + std::to_string(g.relevance) +
                                                         " outside [0, " + std::to_string(bench.max_grade) + "]");
        }
        bench.qrels.push_back(std::move(g));
    }
    return bench;
}

void write_benchmark(const Benchmark& bench, const fs::path& dir) {
    fs::create_directories(dir / "tables");
    json manifest = {{"max_grade", bench.max_grade}};
    if (bench.pool_dir) manifest["pool"] = fs::relative(*bench.pool_dir, dir).generic_string();
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::string queries;
    for (const auto& q : bench.queries) {
        json j = {{"id", q.id}, {"mode", std::string(to_string(q.spec.mode))}, {"k", q.spec.k}};
        j["condition"] = q.spec.condition ? json(*q.spec.condition) : json(nullptr);
        j["key_column"] = q.spec.key_column ? json(*q.spec.key_column) : json(nullptr);
        if (q.spec.query_table) {
            std::string file = q.query_table_file.value_or("tables/" + q.spec.query_table->id + ".csv");
            fs::path p = dir / file;
            fs::create_directories(p.parent_path());
            write_file(p, table_to_csv(*q.spec.query_table));
            if (!q.spec.query_table->metadata.empty()) {
                write_metadata(q.spec.query_table->metadata, p.parent_path() / (p.stem().string() + ".meta.json"));
            }
            j["query_table"] = file;
        } else {
            j["query_table"] = nullptr;
        }
        queries += j.dump() + "\n";
    }
    write_file(dir / "queries.jsonl", queries);

    std::string qrels;
    for (const auto& g : bench.qrels) {
        qrels += g.query_id + "\t" + g.table_id + "\t" + std::to_string(g.relevance) + "\n";
    }
    write_file(dir / "qrels.tsv", qrels);
}

void validate_query(const QuerySpec& q) {
    if (q.k == 0) throw Error(ErrorCode::kInvalidQuery, "k must be positive");
    switch (q.mode) {
        case QueryMode::kNlOnly:
            if (!q.has_condition()) throw Error(ErrorCode::kMissingCondition, "nl_only query needs a condition");
            return;
        case QueryMode::kNlcUnion:
        case QueryMode::kNlcJoin:
            break;
    }
    if (!q.query_table) {
        throw Error(ErrorCode::kMissingQueryTable, std::string(to_string(q.mode)) + " query needs a query table");
    }
    if (q.query_table->columns.empty()) throw Error(ErrorCode::kEmptyTable, "query table has no columns");
    if (q.mode == QueryMode::kNlcJoin) {
        if (!q.key_column || trim(*q.key_column).empty()) {
            throw Error(ErrorCode::kMissingKeyColumn, "nlc_join query needs key_column");
        }
        if (!q.query_table->column_index(*q.key_column)) {
            throw Error(ErrorCode::kUnknownColumn, "key column '" + *q.key_column + "' not in query table");
        }
    }
}

}  // namespace tabscout
