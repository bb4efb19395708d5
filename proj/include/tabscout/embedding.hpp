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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tabscout/table.hpp"

namespace tabscout {

using Vector = Eigen::VectorXd;

enum class ProviderKind { kHashing, kRemote };

struct EmbeddingProviderConfig {
    ProviderKind kind = ProviderKind::kHashing;
    std::size_t dim = 256;
    std::size_t max_cells_per_column = 64;
    std::uint64_t seed = 0;
    std::string endpoint;          // remote only, e.g. "http://127.0.0.1:9000"
    std::size_t max_in_flight = 8;  // remote only
    int timeout_seconds = 30;       // remote only
};

/// Turns text into a unit vector of fixed dimension (or the zero vector for
/// text with no content). Implementations are stateless after construction
/// and safe to call concurrently.
class EmbeddingProvider {
public:
    explicit EmbeddingProvider(EmbeddingProviderConfig config);
    virtual ~EmbeddingProvider() = default;

    const EmbeddingProviderConfig& config() const { return config_; }
    std::size_t dim() const { return config_.dim; }

    virtual Vector embed_text(std::string_view text) const = 0;
    virtual std::vector<Vector> embed_batch(const std::vector<std::string>& texts) const;

private:
    EmbeddingProviderConfig config_;
};

/// Signed feature hashing over lowercase alphanumeric tokens.
class HashingProvider final : public EmbeddingProvider {
public:
    explicit HashingProvider(EmbeddingProviderConfig config);
    Vector embed_text(std::string_view text) const override;
};

/// Client for an encoder service speaking POST /embed {"texts": [...]} ->
/// {"dim": n, "vectors": [[...], ...]}.
class RemoteProvider final : public EmbeddingProvider {
public:
    explicit RemoteProvider(EmbeddingProviderConfig config);
    ~RemoteProvider() override;

    Vector embed_text(std::string_view text) const override;
    std::vector<Vector> embed_batch(const std::vector<std::string>& texts) const override;

private:
    struct Limiter;
    std::unique_ptr<Limiter> limiter_;
};

std::unique_ptr<EmbeddingProvider> make_provider(const EmbeddingProviderConfig& config);

/// Lowercased tokens split on non-alphanumeric bytes (bytes >= 0x80 are kept).
std::vector<std::string> tokenize(std::string_view text);

/// Two independent 64-bit token hashes used by the hashing provider.
std::uint64_t token_hash_index(std::string_view token, std::uint64_t seed);
std::uint64_t token_hash_sign(std::string_view token, std::uint64_t seed);

/// "caption | name | v1, v2, ..." over the first `max_cells` distinct
/// non-empty cells; the values field is omitted for an empty column.
std::string serialize_column(const ColumnData& col, const TableMetadata& meta, std::size_t max_cells);

Vector embed_column(const EmbeddingProvider& provider, const ColumnData& col, const TableMetadata& meta);

/// L2-normalized mean of the column embeddings (zero if every column is zero).
Vector mean_direction(const std::vector<Vector>& vectors, std::size_t dim);
Vector table_content_vector(const EmbeddingProvider& provider, const TableRecord& table);

/// Normalizes in place; leaves the zero vector untouched.
void normalize(Vector& v);

struct PoolVector {
    Vector content;
    Vector metadata;
    Vector concatenated;
};

Vector concat_blocks(const Vector& content, const Vector& metadata);
std::string metadata_text(const TableMetadata& meta);
PoolVector pool_vector(const EmbeddingProvider& provider, const TableRecord& table);

/// Every embedding the engine needs for one table, computed once at index time.
struct TableEmbedding {
    std::vector<Vector> columns;
    Vector content;
    Vector metadata;

    Vector concatenated() const { return concat_blocks(content, metadata); }
};

TableEmbedding embed_table(const EmbeddingProvider& provider, const TableRecord& table);

}  // namespace tabscout
