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

#include "tabscout/engine.hpp"

#include <algorithm>

#include "binary_io.hpp"
#include "tabscout/error.hpp"

namespace tabscout {

namespace {

constexpr std::uint32_t kEmbeddingMagic = 0x4D454854;  // "THEM"
constexpr std::uint32_t kEmbeddingVersion = 1;

void write_vector(detail::BinaryWriter& w, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
}

Vector read_vector(detail::BinaryReader& r, std::size_t dim) {
    Vector v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = r.f64();
    return v;
}

}  // namespace

// IndexedPool --------------------------------------------------------------

void IndexedPool::build_index(const EmbeddingProvider& provider, const HnswParams& params) {
    embeddings_.clear();
    ready_ = false;
    dim_ = provider.dim();
    std::vector<IndexEntry> entries;
    entries.reserve(pool_.size());
    for (const auto& [id, table] : pool_.tables) {
        auto emb = std::make_shared<const TableEmbedding>(embed_table(provider, table));
        entries.push_back({id, emb->concatenated()});
        embeddings_.emplace(id, std::move(emb));
    }
    index_ = HnswIndex::build(entries, params);
    ready_ = true;
}

const TableEmbedding& IndexedPool::embedding(const std::string& table_id) const {
    return *shared_embedding(table_id);
}

std::shared_ptr<const TableEmbedding> IndexedPool::shared_embedding(const std::string& table_id) const {
    auto it = embeddings_.find(table_id);
    if (it == embeddings_.end()) throw Error(ErrorCode::kUnknownTable, "no embedding for table '" + table_id + "'");
    return it->second;
}

void IndexedPool::save(const std::filesystem::path& dir) const {
    if (!ready_) throw Error(ErrorCode::kIndexNotReady, "pool is not indexed");
    std::filesystem::create_directories(dir);
    index_.save(dir / "index.bin");

    detail::BinaryWriter w;
    w.u32(kEmbeddingMagic);
    w.u32(kEmbeddingVersion);
    w.u64(dim_);
    w.u64(pool_.size());
    for (const auto& [id, table] : pool_.tables) {
        const auto& e = embedding(id);
        w.str(id);
        w.u64(e.columns.size());
        for (const auto& c : e.columns) write_vector(w, c);
        write_vector(w, e.content);
        write_vector(w, e.metadata);
    }
    w.write_to(dir / "embeddings.bin");
}

IndexedPool IndexedPool::load(TablePool pool, const std::filesystem::path& dir) {
    IndexedPool out(std::move(pool));
    out.index_ = HnswIndex::load(dir / "index.bin");

    auto r = detail::BinaryReader::from_file(dir / "embeddings.bin", ErrorCode::kCorruptIndex);
    if (r.u32() != kEmbeddingMagic) r.fail("bad embeddings magic");
    auto version = r.u32();
    if (version != kEmbeddingVersion) {
        throw Error(ErrorCode::kUnsupportedVersion, "embeddings version " + std::to_string(version));
    }
    out.dim_ = r.u64();
    auto count = r.u64();
    if (count != out.pool_.size()) r.fail("embedding count does not match pool");
    for (std::uint64_t i = 0; i < count; ++i) {
        auto id = r.str();
        if (!out.pool_.tables.count(id)) r.fail("embedding for unknown table '" + id + "'");
        TableEmbedding e;
        auto ncols = r.u64();
        if (ncols != out.pool_.at(id).columns.size()) r.fail("column count mismatch for '" + id + "'");
        for (std::uint64_t c = 0; c < ncols; ++c) e.columns.push_back(read_vector(r, out.dim_));
        e.content = read_vector(r, out.dim_);
        e.metadata = read_vector(r, out.dim_);
        out.embeddings_.emplace(id, std::make_shared<const TableEmbedding>(std::move(e)));
    }
    if (out.index_.size() != count || (count > 0 && out.index_.dim() != 2 * out.dim_)) {
        throw Error(ErrorCode::kCorruptIndex, "index does not match embeddings");
    }
    out.ready_ = true;
    return out;
}

// Query path -----------------------------------------------------------------

QueryEmbedding embed_query(const QuerySpec& spec, const EmbeddingProvider& provider) {
    validate_query(spec);
    const auto d = static_cast<Eigen::Index>(provider.dim());
    QueryEmbedding q;
    Vector content = Vector::Zero(d);
    Vector meta = Vector::Zero(d);

    if (spec.mode != QueryMode::kNlOnly) {
        const auto& table = *spec.query_table;
        auto emb = embed_table(provider, table);
        q.columns = std::move(emb.columns);
        if (spec.mode == QueryMode::kNlcJoin) {
            q.key = q.columns[*table.column_index(*spec.key_column)];
            content = *q.key;
        } else {
            content = emb.content;
        }
    }
    if (spec.has_condition()) {
        q.condition = provider.embed_text(*spec.condition);
        meta = *q.condition;
    }
    q.vector = concat_blocks(content, meta);
    return q;
}

Vector build_query_vector(const QuerySpec& spec, const EmbeddingProvider& provider) {
    return embed_query(spec, provider).vector;
}

std::optional<double> table_score(QueryMode mode, const QueryEmbedding& query, const TableEmbedding& candidate,
                                  std::size_t* join_column) {
    switch (mode) {
        case QueryMode::kNlcJoin: {
            auto js = join_score(*query.key, candidate.columns);
            if (join_column) *join_column = js.column;
            return js.score.value;
        }
        case QueryMode::kNlcUnion:
            return union_score(query.columns, candidate.columns).score.value;
        case QueryMode::kNlOnly:
            break;
    }
    return std::nullopt;
}

CandidateScore score_candidate(QueryMode mode, const QueryEmbedding& query, const TableEmbedding& candidate,
                               const CrossFusionModel& model) {
    CandidateScore s;
    std::size_t join_column = 0;
    s.rho_t = table_score(mode, query, candidate, &join_column);
    if (mode == QueryMode::kNlcJoin) s.join_column = join_column;
    if (query.condition) {
        s.rho_c = condition_score(model, candidate.columns, candidate.metadata, *query.condition).value;
    }
    return s;
}

double fuse(const CandidateScore& s, double lambda) {
    return s.rho_c.value_or(0.0) + lambda * s.rho_t.value_or(0.0);
}

void sort_scored(std::vector<ScoredTable>& results) {
    std::sort(results.begin(), results.end(), [](const ScoredTable& a, const ScoredTable& b) {
        if (a.rho != b.rho) return a.rho > b.rho;
        return a.table_id < b.table_id;
    });
}

namespace {

void check_ready(const IndexedPool& pool, const CrossFusionModel& model, const EmbeddingProvider& provider) {
    if (!pool.ready()) throw Error(ErrorCode::kIndexNotReady, "pool '" + pool.pool().pool_id + "' is not indexed");
    if (pool.embedding_dim() != provider.dim()) {
        throw Error(ErrorCode::kDimMismatch, "pool embedded at dim " + std::to_string(pool.embedding_dim()) +
                                                 ", provider dim " + std::to_string(provider.dim()));
    }
    if (model.d != provider.dim()) {
        throw Error(ErrorCode::kDimMismatch,
                    "model dim " + std::to_string(model.d) + ", provider dim " + std::to_string(provider.dim()));
    }
}

ScoredTable to_scored(const std::string& id, const TableRecord& table, const CandidateScore& s, double lambda) {
    ScoredTable out;
    out.table_id = id;
    out.rho_t = s.rho_t;
    out.rho_c = s.rho_c;
    out.rho = fuse(s, lambda);
    if (s.join_column) out.join_column = table.columns[*s.join_column].name;
    return out;
}

}  // namespace

std::vector<ScoredTable> execute(const QuerySpec& spec, const IndexedPool& pool, const CrossFusionModel& model,
                                 const EmbeddingProvider& provider, const EngineConfig& config) {
    check_ready(pool, model, provider);
    auto query = embed_query(spec, provider);
    const double lambda = config.lambda.value_or(model.lambda);
    if (lambda < 0.0) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");

    const std::size_t n = std::max(config.candidate_pool_size, spec.k);
    auto hits = pool.index().search(query.vector, n);

    std::vector<ScoredTable> results;
    results.reserve(hits.size());
    for (const auto& hit : hits) {
        auto s = score_candidate(spec.mode, query, pool.embedding(hit.table_id), model);
        results.push_back(to_scored(hit.table_id, pool.pool().at(hit.table_id), s, lambda));
    }
    sort_scored(results);
    if (results.size() > spec.k) results.resize(spec.k);
    return results;
}

Explanation explain(const QuerySpec& spec, const std::string& table_id, const IndexedPool& pool,
                    const CrossFusionModel& model, const EmbeddingProvider& provider, const EngineConfig& config) {
    check_ready(pool, model, provider);
    if (!pool.pool().tables.count(table_id)) throw Error(ErrorCode::kUnknownTable, "no table '" + table_id + "'");
    const auto& table = pool.pool().at(table_id);
    const auto& cand = pool.embedding(table_id);
    auto query = embed_query(spec, provider);
    const double lambda = config.lambda.value_or(model.lambda);

    Explanation out;
    auto s = score_candidate(spec.mode, query, cand, model);
    out.scored = to_scored(table_id, table, s, lambda);
    out.caption = table.metadata.caption;

    if (spec.mode == QueryMode::kNlcUnion) {
        auto us = union_score(query.columns, cand.columns);
        for (auto [i, j] : us.matching.pairs) {
            out.matches.push_back({spec.query_table->columns[i].name, table.columns[j].name,
                                   us.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
        }
    } else if (spec.mode == QueryMode::kNlcJoin && s.join_column) {
        out.matches.push_back({*spec.key_column, table.columns[*s.join_column].name, *s.rho_t});
    }
    return out;
}

}  // namespace tabscout
