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
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tabscout/embedding.hpp"
#include "tabscout/hnsw.hpp"
#include "tabscout/nlc_model.hpp"
#include "tabscout/table.hpp"
#include "tabscout/table_scorer.hpp"

namespace tabscout {

struct EngineConfig {
    std::size_t candidate_pool_size = 100;
    std::optional<double> lambda;  // overrides the model's lambda
    std::size_t k = 10;  // default result count for queries built by callers
};

struct ScoredTable {
    std::string table_id;
    std::optional<double> rho_t;
    std::optional<double> rho_c;
    double rho = 0.0;
    std::optional<std::string> join_column;
};

/// A pool together with its per-table embeddings and ANN index.
class IndexedPool {
public:
    IndexedPool() = default;
    explicit IndexedPool(TablePool pool) : pool_(std::move(pool)) {}

    /// Embeds every table and builds the index over the concatenated pool vectors.
    void build_index(const EmbeddingProvider& provider, const HnswParams& params);
    bool ready() const { return ready_; }

    const TablePool& pool() const { return pool_; }
    const HnswIndex& index() const { return index_; }
    const TableEmbedding& embedding(const std::string& table_id) const;
    std::shared_ptr<const TableEmbedding> shared_embedding(const std::string& table_id) const;
    std::size_t embedding_dim() const { return dim_; }

    /// Writes index.bin and embeddings.bin into `dir`.
    void save(const std::filesystem::path& dir) const;
    static IndexedPool load(TablePool pool, const std::filesystem::path& dir);

private:
    TablePool pool_;
    std::unordered_map<std::string, std::shared_ptr<const TableEmbedding>> embeddings_;
    HnswIndex index_;
    std::size_t dim_ = 0;
    bool ready_ = false;
};

struct QueryEmbedding {
    std::vector<Vector> columns;        // query-table columns (empty for nl_only)
    std::optional<Vector> key;          // join key column
    std::optional<Vector> condition;    // NL condition
    Vector vector;                      // [content | condition] with zero-filled absent blocks
};

QueryEmbedding embed_query(const QuerySpec& spec, const EmbeddingProvider& provider);

/// Content block: key-column embedding (join), mean table direction (union) or
/// zeros (nl_only). Metadata block: condition embedding or zeros.
Vector build_query_vector(const QuerySpec& spec, const EmbeddingProvider& provider);

struct CandidateScore {
    std::optional<double> rho_t;
    std::optional<double> rho_c;
    std::optional<std::size_t> join_column;
};

/// rho_t alone: join or union score by mode, nullopt for nl_only.
std::optional<double> table_score(QueryMode mode, const QueryEmbedding& query, const TableEmbedding& candidate,
                                  std::size_t* join_column = nullptr);

/// rho_t by mode and rho_c when a condition is present.
CandidateScore score_candidate(QueryMode mode, const QueryEmbedding& query, const TableEmbedding& candidate,
                               const CrossFusionModel& model);

/// rho = (rho_c or 0) + lambda * (rho_t or 0).
double fuse(const CandidateScore& s, double lambda);

/// Orders by rho descending, table id ascending.
void sort_scored(std::vector<ScoredTable>& results);

std::vector<ScoredTable> execute(const QuerySpec& spec, const IndexedPool& pool, const CrossFusionModel& model,
                                 const EmbeddingProvider& provider, const EngineConfig& config);

struct ColumnMatch {
    std::string query_column;
    std::string candidate_column;
    double weight = 0.0;
};

struct Explanation {
    ScoredTable scored;
    std::string caption;
    std::vector<ColumnMatch> matches;  // union: matched edges; join: the argmax column
};

Explanation explain(const QuerySpec& spec, const std::string& table_id, const IndexedPool& pool,
                    const CrossFusionModel& model, const EmbeddingProvider& provider, const EngineConfig& config);

}  // namespace tabscout
