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

#include "tabscout/service.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <regex>

#include <httplib.h>

namespace tabscout {

using nlohmann::json;

// Assistant routing ------------------------------------------------------

std::string_view to_string(Intent intent) {
    switch (intent) {
        case Intent::kDiscovery: return "discovery";
        case Intent::kAnalysis: return "analysis";
        case Intent::kOther: return "other";
    }
    return "other";
}

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

bool contains_word(const std::vector<std::string>& tokens, std::string_view word) {
    return std::find(tokens.begin(), tokens.end(), word) != tokens.end();
}

bool contains_phrase(const std::string& lowered, std::string_view phrase) {
    return lowered.find(phrase) != std::string::npos;
}

constexpr std::string_view kDiscoveryWords[] = {"find", "search", "discover", "retrieve", "locate",
                                                "unionable", "joinable", "lookup"};
constexpr std::string_view kDiscoveryPhrases[] = {"look for", "tables containing", "tables with", "tables about",
                                                  "tables that", "datasets containing", "tables related"};
constexpr std::string_view kAnalysisWords[] = {"mean", "average", "sum", "count", "max", "maximum", "min",
                                               "minimum", "median", "column", "row", "rows", "plot", "chart",
                                               "analyze", "analyse", "compute", "calculate", "total", "group",
                                               "sort", "filter", "clean", "describe"};

const std::string kHelpReply =
    "I can find tables for you. Try: \"Find unionable tables containing students with an average grade above 80\".";

std::optional<std::string> extract_key_column(std::string_view text) {
    static const std::regex kKey(
        R"((?:key(?:\s+column)?|join(?:ed|able)?\s+on|on(?:\s+the)?(?:\s+key)?\s+column|using(?:\s+the)?\s+column)\s+["'`]?([A-Za-z_][A-Za-z0-9_]*))",
        std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(text.begin(), text.end(), m, kKey)) return m[1].str();
    return std::nullopt;
}

}  // namespace

std::string_view intent_prompt_template() {
    return R"(You route messages for a table assistant that can search a table repository.
Decide whether the user's message asks to discover tables.
Reply with a single JSON object and nothing else:
{"intent": "discovery" | "analysis" | "other",
 "mode": "nl_only" | "nlc_union" | "nlc_join" | null,
 "condition": "<the natural-language condition tables must satisfy>" | null,
 "key_column": "<join key column name>" | null}
Use "nlc_union" when the user wants rows to add to their table (unionable),
"nlc_join" when they want columns to attach via a key (joinable), and
"nl_only" when they describe tables without referring to a table of their own.
Use "analysis" for questions about data already in the workspace.)";
}

AssistantTurn route_intent_rules(std::string_view text) {
    AssistantTurn turn;
    turn.user_text = std::string(text);
    turn.source = "rules";
    const auto tokens = tokenize(text);
    const auto lowered = lowercase(text);

    bool discovery = false;
    for (auto w : kDiscoveryWords) discovery = discovery || contains_word(tokens, w);
    for (auto p : kDiscoveryPhrases) discovery = discovery || contains_phrase(lowered, p);

    if (discovery) {
        ExtractedQuery q;
        bool join = contains_word(tokens, "joinable") || contains_word(tokens, "join");
        bool uni = contains_word(tokens, "unionable") || contains_word(tokens, "union");
        q.mode = join ? QueryMode::kNlcJoin : (uni ? QueryMode::kNlcUnion : QueryMode::kNlOnly);
        q.condition = std::string(text);
        if (q.mode == QueryMode::kNlcJoin) q.key_column = extract_key_column(text);
        turn.detected_intent = Intent::kDiscovery;
        turn.reply = "Searching for " + std::string(to_string(q.mode)) + " tables matching your condition.";
        turn.extracted = std::move(q);
        return turn;
    }

    bool analysis = false;
    for (auto w : kAnalysisWords) analysis = analysis || contains_word(tokens, w);
    if (analysis) {
        turn.detected_intent = Intent::kAnalysis;
        turn.reply = "That looks like an analysis question about your current table; run it from the processing panel.";
    } else {
        turn.detected_intent = Intent::kOther;
        turn.reply = kHelpReply;
    }
    return turn;
}

std::optional<AssistantTurn> parse_llm_reply(std::string_view content, std::string_view user_text) {
    std::string body(content);
    // Tolerate a fenced code block around the JSON.
    auto open = body.find('{');
    auto close = body.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    body = body.substr(open, close - open + 1);

    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!j.is_object() || !j.contains("intent") || !j["intent"].is_string()) return std::nullopt;

    AssistantTurn turn;
    turn.user_text = std::string(user_text);
    turn.source = "llm";
    auto intent = j["intent"].get<std::string>();
    if (intent == "discovery") {
        if (!j.contains("mode") || !j["mode"].is_string()) return std::nullopt;
        ExtractedQuery q;
        try {
            q.mode = parse_query_mode(j["mode"].get<std::string>());
        } catch (const Error&) {
            return std::nullopt;
        }
        q.condition = (j.contains("condition") && j["condition"].is_string()) ? j["condition"].get<std::string>()
                                                                              : std::string(user_text);
        if (j.contains("key_column") && j["key_column"].is_string()) q.key_column = j["key_column"].get<std::string>();
        turn.detected_intent = Intent::kDiscovery;
        turn.reply = "Searching for " + std::string(to_string(q.mode)) + " tables matching your condition.";
        turn.extracted = std::move(q);
    } else if (intent == "analysis") {
        turn.detected_intent = Intent::kAnalysis;
        turn.reply = "That looks like an analysis question about your current table; run it from the processing panel.";
    } else if (intent == "other") {
        turn.detected_intent = Intent::kOther;
        turn.reply = kHelpReply;
    } else {
        return std::nullopt;
    }
    return turn;
}

AssistantTurn route_intent(std::string_view text, const std::optional<LlmConfig>& llm) {
    if (llm && !llm->endpoint.empty()) {
        try {
            httplib::Client client(llm->endpoint);
            client.set_connection_timeout(llm->timeout_seconds);
            client.set_read_timeout(llm->timeout_seconds);
            httplib::Headers headers;
            if (!llm->api_key.empty()) headers.emplace("Authorization", "Bearer " + llm->api_key);
            json request = {{"model", llm->model},
                            {"temperature", 0},
                            {"messages",
                             json::array({{{"role", "system"}, {"content", std::string(intent_prompt_template())}},
                                          {{"role", "user"}, {"content", std::string(text)}}})}};
            auto res = client.Post(llm->path, headers, request.dump(), "application/json");
            if (res && res->status == 200) {
                auto reply = json::parse(res->body);
                const auto& content = reply.at("choices").at(0).at("message").at("content");
                if (content.is_string()) {
                    if (auto turn = parse_llm_reply(content.get<std::string>(), text)) return *turn;
                }
            }
        } catch (const std::exception&) {
            // fall through to rules
        }
    }
    return route_intent_rules(text);
}

// Processing previews ----------------------------------------------------

namespace {

std::string trim_copy(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

TableRecord union_preview(const TableRecord& left, const TableRecord& right, const std::vector<ColumnMatch>& alignment,
                          std::size_t max_rows) {
    TableRecord out;
    out.id = left.id + "+" + right.id;
    out.metadata = left.metadata;
    for (const auto& c : left.columns) out.columns.push_back({c.name, {}, c.inferred_kind});

    // left column index -> right column index
    std::vector<std::optional<std::size_t>> source(left.columns.size());
    for (const auto& m : alignment) {
        auto li = left.column_index(m.query_column);
        auto ri = right.column_index(m.candidate_column);
        if (!li || !ri) throw Error(ErrorCode::kUnknownColumn, "alignment names unknown columns");
        source[*li] = *ri;
    }

    auto emit = [&](auto&& cell) {
        if (out.row_count >= max_rows) return false;
        for (std::size_t c = 0; c < out.columns.size(); ++c) out.columns[c].values.push_back(cell(c));
        ++out.row_count;
        return true;
    };
    for (std::size_t r = 0; r < left.row_count; ++r) {
        if (!emit([&](std::size_t c) { return left.columns[c].values[r]; })) return out;
    }
    for (std::size_t r = 0; r < right.row_count; ++r) {
        bool compatible = false;
        for (const auto& s : source) compatible = compatible || (s && !trim_copy(right.columns[*s].values[r]).empty());
        if (!compatible) continue;
        if (!emit([&](std::size_t c) { return source[c] ? right.columns[*source[c]].values[r] : std::string(); })) {
            return out;
        }
    }
    return out;
}

TableRecord join_preview(const TableRecord& left, const TableRecord& right, const std::string& left_key,
                         const std::string& right_key, std::size_t max_rows) {
    auto lk = left.column_index(left_key);
    if (!lk) throw Error(ErrorCode::kUnknownColumn, "left key '" + left_key + "' not in " + left.id);
    auto rk = right.column_index(right_key);
    if (!rk) throw Error(ErrorCode::kUnknownColumn, "right key '" + right_key + "' not in " + right.id);

    TableRecord out;
    out.id = left.id + "*" + right.id;
    out.metadata = left.metadata;
    for (const auto& c : left.columns) out.columns.push_back({c.name, {}, c.inferred_kind});
    std::vector<std::size_t> appended;
    for (std::size_t c = 0; c < right.columns.size(); ++c) {
        if (c == *rk) continue;
        std::string name = right.columns[c].name;
        while (out.column_index(name)) name += "_right";
        out.columns.push_back({name, {}, right.columns[c].inferred_kind});
        appended.push_back(c);
    }

    std::multimap<std::string, std::size_t> by_key;
    for (std::size_t r = 0; r < right.row_count; ++r) by_key.emplace(trim_copy(right.columns[*rk].values[r]), r);

    auto emit = [&](std::size_t lr, std::optional<std::size_t> rr) {
        if (out.row_count >= max_rows) return false;
        std::size_t c = 0;
        for (; c < left.columns.size(); ++c) out.columns[c].values.push_back(left.columns[c].values[lr]);
        for (auto src : appended) out.columns[c++].values.push_back(rr ? right.columns[src].values[*rr] : "");
        ++out.row_count;
        return true;
    };
    for (std::size_t r = 0; r < left.row_count; ++r) {
        auto [b, e] = by_key.equal_range(trim_copy(left.columns[*lk].values[r]));
        if (b == e) {
            if (!emit(r, std::nullopt)) return out;
        }
        for (auto it = b; it != e; ++it) {
            if (!emit(r, it->second)) return out;
        }
    }
    return out;
}

std::vector<ColumnMatch> align_columns(const EmbeddingProvider& provider, const TableRecord& left,
                                       const TableRecord& right) {
    auto le = embed_table(provider, left);
    auto re = embed_table(provider, right);
    auto us = union_score(le.columns, re.columns);
    std::vector<ColumnMatch> out;
    for (auto [i, j] : us.matching.pairs) {
        out.push_back({left.columns[i].name, right.columns[j].name,
                       us.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    }
    return out;
}

// Wire format ------------------------------------------------------------

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const ScoredTable& s) {
    return {{"table_id", s.table_id},
            {"rho", s.rho},
            {"rho_t", optional_number(s.rho_t)},
            {"rho_c", optional_number(s.rho_c)},
            {"join_column", s.join_column ? json(*s.join_column) : json(nullptr)}};
}

json to_json(const Explanation& e) {
    json j = to_json(e.scored);
    j["caption"] = e.caption;
    j["matches"] = json::array();
    for (const auto& m : e.matches) {
        j["matches"].push_back(
            {{"query_column", m.query_column}, {"candidate_column", m.candidate_column}, {"weight", m.weight}});
    }
    return j;
}

json to_json(const AssistantTurn& t) {
    json j = {{"user_text", t.user_text},
              {"detected_intent", std::string(to_string(t.detected_intent))},
              {"reply", t.reply},
              {"source", t.source},
              {"extracted", nullptr}};
    if (t.extracted) {
        j["extracted"] = {{"mode", std::string(to_string(t.extracted->mode))},
                          {"condition", t.extracted->condition},
                          {"key_column", t.extracted->key_column ? json(*t.extracted->key_column) : json(nullptr)}};
    }
    return j;
}

json table_preview_json(const TableRecord& t, std::size_t max_rows) {
    json cols = json::array();
    for (const auto& c : t.columns) cols.push_back(c.name);
    json rows = json::array();
    for (std::size_t r = 0; r < std::min(max_rows, t.row_count); ++r) {
        json row = json::array();
        for (const auto& c : t.columns) row.push_back(c.values[r]);
        rows.push_back(std::move(row));
    }
    return {{"id", t.id},
            {"caption", t.metadata.caption},
            {"description", t.metadata.description},
            {"columns", std::move(cols)},
            {"rows", std::move(rows)},
            {"row_count", t.row_count}};
}

QuerySpec query_from_json(const json& body, std::size_t default_k) {
    if (!body.is_object()) throw Error(ErrorCode::kInvalidQuery, "request body must be a JSON object");
    QuerySpec q;
    if (!body.contains("mode") || !body["mode"].is_string()) throw Error(ErrorCode::kInvalidQuery, "mode is required");
    q.mode = parse_query_mode(body["mode"].get<std::string>());
    auto str = [&](const char* key) -> std::optional<std::string> {
        if (!body.contains(key) || body[key].is_null()) return std::nullopt;
        if (!body[key].is_string()) throw Error(ErrorCode::kInvalidQuery, std::string(key) + " must be a string");
        return body[key].get<std::string>();
    };
    q.condition = str("condition");
    q.key_column = str("key_column");
    if (auto csv = str("query_table")) q.query_table = parse_table_csv_text(*csv, "query");
    q.k = default_k;
    if (body.contains("k") && !body["k"].is_null()) {
        if (!body["k"].is_number_integer() || body["k"].get<long long>() < 1) {
            throw Error(ErrorCode::kInvalidQuery, "k must be a positive integer");
        }
        q.k = body["k"].get<std::size_t>();
    }
    validate_query(q);
    return q;
}

const json& search_response_schema() {
    static const json schema = json::parse(R"({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "SearchResponse",
  "type": "object",
  "required": ["pool_id", "mode", "k", "latency_ms", "results"],
  "additionalProperties": false,
  "properties": {
    "pool_id": {"type": "string"},
    "mode": {"enum": ["nl_only", "nlc_union", "nlc_join"]},
    "k": {"type": "integer", "minimum": 1},
    "latency_ms": {"type": "number", "minimum": 0},
    "results": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["table_id", "caption", "rho", "rho_t", "rho_c", "join_column"],
        "additionalProperties": false,
        "properties": {
          "table_id": {"type": "string"},
          "caption": {"type": "string"},
          "rho": {"type": "number"},
          "rho_t": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
          "rho_c": {"type": ["number", "null"]},
          "join_column": {"type": ["string", "null"]}
        }
      }
    }
  }
})");
    return schema;
}

int http_status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::kRaggedTable:
        case ErrorCode::kEmptyTable:
        case ErrorCode::kMissingKeyColumn:
        case ErrorCode::kUnknownColumn:
        case ErrorCode::kMissingCondition:
        case ErrorCode::kMissingQueryTable:
        case ErrorCode::kInvalidQuery:
        case ErrorCode::kParseError:
        case ErrorCode::kInvalidArgument:
        case ErrorCode::kDuplicateId:
        case ErrorCode::kEmptyPool:
        case ErrorCode::kDanglingQrel:
        case ErrorCode::kGradeOutOfRange:
        case ErrorCode::kEmptyCandidate:
        case ErrorCode::kEmptyBatch:
            return 400;
        case ErrorCode::kUnknownTable:
        case ErrorCode::kNotFound:
        case ErrorCode::kIoError:
            return 404;
        case ErrorCode::kIndexNotReady:
        case ErrorCode::kConflict:
            return 409;
        case ErrorCode::kProviderUnavailable:
            return 503;
        default:
            return 500;
    }
}

int exit_code_for(ErrorCode code) {
    switch (http_status_for(code)) {
        case 400: return 3;
        case 404: return 4;
        case 409: return 5;
        case 503: return 6;
        default: break;
    }
    switch (code) {
        case ErrorCode::kCorruptIndex:
        case ErrorCode::kCorruptCheckpoint:
        case ErrorCode::kUnsupportedVersion:
            return 7;
        case ErrorCode::kDivergenceDetected: return 8;
        default: return 1;
    }
}

// On-disk index bundle ---------------------------------------------------

namespace {

json provider_json(const EmbeddingProviderConfig& c) {
    return {{"kind", c.kind == ProviderKind::kHashing ? "hashing" : "remote"},
            {"dim", c.dim},
            {"max_cells_per_column", c.max_cells_per_column},
            {"seed", c.kind == ProviderKind::kHashing ? json(c.seed) : json(nullptr)},
            {"endpoint", c.kind == ProviderKind::kRemote ? json(c.endpoint) : json(nullptr)}};
}

}  // namespace

void save_index_bundle(const IndexedPool& pool, const EmbeddingProviderConfig& provider,
                       const std::filesystem::path& dir) {
    pool.save(dir);
    std::ofstream out(dir / "provider.json", std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write provider.json in " + dir.string());
    out << provider_json(provider).dump(2) << "\n";
}

IndexedPool load_index_bundle(TablePool pool, const EmbeddingProviderConfig& provider,
                              const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "index.bin")) {
        throw Error(ErrorCode::kIndexNotReady, "no index in " + dir.string() + "; run the index command first");
    }
    std::ifstream in(dir / "provider.json");
    if (!in) throw Error(ErrorCode::kCorruptIndex, "missing provider.json in " + dir.string());
    json stored;
    try {
        stored = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kCorruptIndex, std::string("provider.json: ") + e.what());
    }
    if (stored != provider_json(provider)) {
        throw Error(ErrorCode::kDimMismatch, "index was built with provider " + stored.dump() + ", requested " +
                                                 provider_json(provider).dump());
    }
    return IndexedPool::load(std::move(pool), dir);
}

// HTTP service -----------------------------------------------------------

Service::Service(ServiceOptions options) : options_(std::move(options)), provider_(make_provider(options_.provider)) {
    if (options_.model_path) {
        model_ = std::make_shared<const CrossFusionModel>(load_checkpoint(*options_.model_path));
    } else {
        auto shape = options_.model_shape;
        shape.d = provider_->dim();
        model_ = std::make_shared<const CrossFusionModel>(CrossFusionModel::init(shape, options_.model_seed));
    }
    if (model_->d != provider_->dim()) {
        throw Error(ErrorCode::kDimMismatch, "model dim " + std::to_string(model_->d) + " does not match provider dim " +
                                                 std::to_string(provider_->dim()));
    }
}

Service::~Service() { wait_for_jobs(); }

void Service::wait_for_jobs() {
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mu_);
        workers.swap(workers_);
    }
    for (auto& t : workers) {
        if (t.joinable()) t.join();
    }
}

std::shared_ptr<Service::PoolState> Service::pool_state(const std::string& pool_id) const {
    std::lock_guard lock(mu_);
    auto it = pools_.find(pool_id);
    if (it == pools_.end()) throw Error(ErrorCode::kNotFound, "no pool '" + pool_id + "'");
    return it->second;
}

std::shared_ptr<const CrossFusionModel> Service::model() const {
    std::lock_guard lock(mu_);
    return model_;
}

std::string Service::add_pool(TablePool pool, std::optional<std::string> pool_id) {
    if (pool.tables.empty()) throw Error(ErrorCode::kEmptyPool, "pool has no tables");
    std::lock_guard lock(mu_);
    std::string id = pool_id.value_or("pool-" + std::to_string(next_pool_++));
    if (pools_.count(id)) throw Error(ErrorCode::kConflict, "pool '" + id + "' already exists");
    pool.pool_id = id;
    auto state = std::make_shared<PoolState>();
    state->indexed = std::make_shared<IndexedPool>(std::move(pool));
    pools_.emplace(id, std::move(state));
    return id;
}

void Service::index_pool(const std::string& pool_id) {
    auto state = pool_state(pool_id);
    bool expected = false;
    if (!state->busy.compare_exchange_strong(expected, true)) {
        throw Error(ErrorCode::kConflict, "pool '" + pool_id + "' is already being indexed or trained");
    }
    try {
        TablePool copy;
        {
            std::shared_lock read(state->lock);
            copy = state->indexed->pool();
        }
        auto fresh = std::make_shared<IndexedPool>(std::move(copy));
        fresh->build_index(*provider_, options_.hnsw);
        std::unique_lock write(state->lock);
        state->indexed = std::move(fresh);
    } catch (...) {
        state->busy = false;
        throw;
    }
    state->busy = false;
}

std::vector<ScoredTable> Service::search(const std::string& pool_id, const json& body) const {
    auto state = pool_state(pool_id);
    auto spec = query_from_json(body, options_.engine.k);
    EngineConfig config = options_.engine;
    if (body.contains("lambda") && !body["lambda"].is_null()) config.lambda = body["lambda"].get<double>();
    if (body.contains("n_candidates") && !body["n_candidates"].is_null()) {
        config.candidate_pool_size = body["n_candidates"].get<std::size_t>();
    }
    auto m = model();
    std::shared_lock read(state->lock);
    return execute(spec, *state->indexed, *m, *provider_, config);
}

json Service::search_response(const std::string& pool_id, const json& body) const {
    auto spec = query_from_json(body, options_.engine.k);
    auto start = std::chrono::steady_clock::now();
    auto results = search(pool_id, body);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    auto state = pool_state(pool_id);
    std::shared_lock read(state->lock);
    json items = json::array();
    for (const auto& r : results) {
        auto j = to_json(r);
        j["caption"] = state->indexed->pool().at(r.table_id).metadata.caption;
        items.push_back(std::move(j));
    }
    return {{"pool_id", pool_id},
            {"mode", std::string(to_string(spec.mode))},
            {"k", spec.k},
            {"latency_ms", ms},
            {"results", std::move(items)}};
}

std::string Service::start_job(const std::string& pool_id, std::function<json()> work) {
    std::string id;
    {
        std::lock_guard lock(mu_);
        id = "job-" + std::to_string(next_job_++);
        jobs_[id] = Job{};
    }
    auto runner = [this, id, work = std::move(work)] {
        {
            std::lock_guard lock(mu_);
            jobs_[id].status = "running";
        }
        Job done;
        try {
            done.result = work();
            done.status = "done";
        } catch (const std::exception& e) {
            done.status = "failed";
            done.error = e.what();
        }
        std::lock_guard lock(mu_);
        jobs_[id] = std::move(done);
    };
    (void)pool_id;
    std::lock_guard lock(mu_);
    workers_.emplace_back(std::move(runner));
    return id;
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, {{"error", std::string(code)}, {"message", message}}, status);
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, http_status_for(e.code()), error_code_name(e.code()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "BadRequest", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "Internal", e.what());
        }
    };
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
}

}  // namespace

void Service::register_routes(httplib::Server& server) {
    server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
                   send_json(res, {{"status", "ok"}});
               }));

    server.Get("/schema/search", guarded([](const httplib::Request&, httplib::Response& res) {
                   send_json(res, search_response_schema());
               }));

    server.Get("/pools", guarded([this](const httplib::Request&, httplib::Response& res) {
                   json out = json::array();
                   std::lock_guard lock(mu_);
                   for (const auto& [id, state] : pools_) {
                       std::shared_lock read(state->lock);
                       out.push_back(
                           {{"pool_id", id}, {"tables", state->indexed->pool().size()}, {"indexed", state->indexed->ready()}});
                   }
                   send_json(res, out);
               }));

    server.Post("/pools", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    TablePool pool;
                    if (req.is_multipart_form_data()) {
                        // one part per CSV; "<stem>.meta.json" parts carry metadata
                        std::map<std::string, TableMetadata> meta;
                        for (const auto& [name, part] : req.files) {
                            std::filesystem::path fname(part.filename.empty() ? name : part.filename);
                            auto fn = fname.filename().string();
                            if (fn.size() > 10 && fn.ends_with(".meta.json")) {
                                auto j = json::parse(part.content);
                                meta[fn.substr(0, fn.size() - 10)] = {j.value("caption", ""), j.value("description", "")};
                            }
                        }
                        for (const auto& [name, part] : req.files) {
                            std::filesystem::path fname(part.filename.empty() ? name : part.filename);
                            if (fname.extension() != ".csv") continue;
                            auto table = parse_table_csv_text(part.content, fname.stem().string());
                            if (auto it = meta.find(table.id); it != meta.end()) table.metadata = it->second;
                            pool.add(std::move(table));
                        }
                        std::optional<std::string> id;
                        if (req.has_file("pool_id")) id = req.get_file_value("pool_id").content;
                        auto n = pool.size();
                        auto pid = add_pool(std::move(pool), id);
                        send_json(res, {{"pool_id", pid}, {"tables", n}}, 201);
                        return;
                    }
                    auto body = parse_body(req);
                    if (body.contains("path")) {
                        pool = load_pool(body["path"].get<std::string>());
                    } else if (body.contains("tables")) {
                        for (const auto& t : body["tables"]) {
                            auto table = parse_table_csv_text(t.at("csv").get<std::string>(), t.at("id").get<std::string>());
                            table.metadata.caption = t.value("caption", "");
                            table.metadata.description = t.value("description", "");
                            pool.add(std::move(table));
                        }
                    } else {
                        throw Error(ErrorCode::kInvalidArgument, "body needs 'path' or 'tables'");
                    }
                    std::optional<std::string> id;
                    if (body.contains("pool_id")) id = body["pool_id"].get<std::string>();
                    auto n = pool.size();
                    auto pid = add_pool(std::move(pool), id);
                    send_json(res, {{"pool_id", pid}, {"tables", n}}, 201);
                }));

    server.Post(R"(/pools/([^/]+)/index)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    auto start = std::chrono::steady_clock::now();
                    index_pool(req.matches[1]);
                    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    auto state = pool_state(req.matches[1]);
                    std::shared_lock read(state->lock);
                    send_json(res, {{"pool_id", std::string(req.matches[1])},
                                    {"status", "ready"},
                                    {"tables", state->indexed->pool().size()},
                                    {"seconds", secs}});
                }));

    server.Get(R"(/pools/([^/]+)/tables/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   auto state = pool_state(req.matches[1]);
                   std::shared_lock read(state->lock);
                   send_json(res, table_preview_json(state->indexed->pool().at(req.matches[2]), kTablePreviewRows));
               }));

    server.Post(R"(/pools/([^/]+)/search)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    send_json(res, search_response(req.matches[1], parse_body(req)));
                }));

    server.Post(R"(/pools/([^/]+)/explain/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    auto body = parse_body(req);
                    auto state = pool_state(req.matches[1]);
                    auto spec = query_from_json(body, options_.engine.k);
                    EngineConfig config = options_.engine;
                    if (body.contains("lambda") && !body["lambda"].is_null()) config.lambda = body["lambda"].get<double>();
                    auto m = model();
                    std::shared_lock read(state->lock);
                    send_json(res, to_json(explain(spec, req.matches[2], *state->indexed, *m, *provider_, config)));
                }));

    server.Post("/assistant/message", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    auto body = parse_body(req);
                    auto text = body.value("text", std::string());
                    send_json(res, to_json(route_intent(text, options_.llm)));
                }));

    server.Post("/process", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    auto body = parse_body(req);
                    auto op = body.at("op").get<std::string>();
                    auto state = pool_state(body.at("pool_id").get<std::string>());
                    std::shared_lock read(state->lock);
                    const auto& pool = state->indexed->pool();
                    TableRecord left = body.contains("left_csv")
                                           ? parse_table_csv_text(body["left_csv"].get<std::string>(), "query")
                                           : pool.at(body.at("left_table_id").get<std::string>());
                    const auto& right = pool.at(body.at("right_table_id").get<std::string>());
                    TableRecord out;
                    json extra = json::object();
                    if (op == "union_preview") {
                        auto alignment = align_columns(*provider_, left, right);
                        out = union_preview(left, right, alignment);
                        extra = json::array();
                        for (const auto& m : alignment) {
                            extra.push_back({{"left", m.query_column}, {"right", m.candidate_column}, {"weight", m.weight}});
                        }
                    } else if (op == "join_preview") {
                        if (!body.contains("left_key") || !body.contains("right_key")) {
                            throw Error(ErrorCode::kMissingKeyColumn, "join_preview needs left_key and right_key");
                        }
                        out = join_preview(left, right, body["left_key"].get<std::string>(),
                                           body["right_key"].get<std::string>());
                    } else {
                        throw Error(ErrorCode::kInvalidArgument, "unknown op '" + op + "'");
                    }
                    auto j = table_preview_json(out, kPreviewRows);
                    j["op"] = op;
                    j["alignment"] = extra;
                    send_json(res, j);
                }));

    server.Post("/train", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    auto body = parse_body(req);
                    auto pool_id = body.at("pool_id").get<std::string>();
                    auto state = pool_state(pool_id);
                    auto bench = load_benchmark(body.at("benchmark").get<std::string>());
                    TrainConfig config;
                    config.learning_rate = body.value("learning_rate", config.learning_rate);
                    config.epochs = body.value("epochs", config.epochs);
                    config.batch_size = body.value("batch_size", config.batch_size);
                    config.negatives_per_query = body.value("negatives_per_query", config.negatives_per_query);
                    config.seed = body.value("seed", config.seed);
                    config.optimize_lambda = body.value("optimize_lambda", config.optimize_lambda);
                    std::optional<std::string> save_to;
                    if (body.contains("save_to")) save_to = body["save_to"].get<std::string>();

                    bool expected = false;
                    if (!state->busy.compare_exchange_strong(expected, true)) {
                        throw Error(ErrorCode::kConflict, "pool '" + pool_id + "' is busy");
                    }
                    auto id = start_job(pool_id, [this, state, bench = std::move(bench), config, save_to]() {
                        struct Release {
                            std::shared_ptr<PoolState> s;
                            ~Release() { s->busy = false; }
                        } release{state};
                        std::shared_ptr<IndexedPool> indexed;
                        {
                            std::shared_lock read(state->lock);
                            indexed = state->indexed;
                        }
                        auto examples = make_training_examples(bench, *indexed, *provider_, config,
                                                               options_.engine.candidate_pool_size);
                        auto trained = *model();
                        auto curve = train(trained, examples, config).loss_curve;
                        if (save_to) save_checkpoint(trained, *save_to);
                        {
                            std::lock_guard lock(mu_);
                            model_ = std::make_shared<const CrossFusionModel>(std::move(trained));
                        }
                        return json{{"examples", examples.size()}, {"loss_curve", curve}};
                    });
                    send_json(res, {{"job_id", id}}, 202);
                }));

    server.Post("/evaluate", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    auto body = parse_body(req);
                    auto state = pool_state(body.at("pool_id").get<std::string>());
                    auto bench = load_benchmark(body.at("benchmark").get<std::string>());
                    auto id = start_job("", [this, state, bench = std::move(bench)]() {
                        std::shared_ptr<IndexedPool> indexed;
                        {
                            std::shared_lock read(state->lock);
                            indexed = state->indexed;
                        }
                        auto m = model();
                        auto result = evaluate_run(engine_ranker(*indexed, *m, *provider_, options_.engine), bench);
                        return json::parse(result_json(result));
                    });
                    send_json(res, {{"job_id", id}}, 202);
                }));

    server.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   std::lock_guard lock(mu_);
                   auto it = jobs_.find(req.matches[1]);
                   if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "no job '" + std::string(req.matches[1]) + "'");
                   json j = {{"job_id", it->first}, {"status", it->second.status}};
                   if (it->second.status == "done") j["result"] = it->second.result;
                   if (it->second.status == "failed") j["error"] = it->second.error;
                   send_json(res, j);
               }));
}

}  // namespace tabscout
