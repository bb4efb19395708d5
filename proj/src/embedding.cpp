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

#include <cmath>
#include <condition_variable>
#include <mutex>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "tabscout/error.hpp"

namespace tabscout {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= kFnvPrime;
    }
    return h;
}

bool is_token_byte(unsigned char ch) { return std::isalnum(ch) || ch >= 0x80; }

std::string trim_copy(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

EmbeddingProvider::EmbeddingProvider(EmbeddingProviderConfig config) : config_(std::move(config)) {
    if (config_.dim < 8) throw Error(ErrorCode::kInvalidArgument, "embedding dim must be >= 8");
    if (config_.max_cells_per_column == 0) {
        throw Error(ErrorCode::kInvalidArgument, "max_cells_per_column must be positive");
    }
}

std::vector<Vector> EmbeddingProvider::embed_batch(const std::vector<std::string>& texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char ch : text) {
        if (is_token_byte(ch)) {
            current.push_back(static_cast<char>(ch < 0x80 ? std::tolower(ch) : ch));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::uint64_t token_hash_index(std::string_view token, std::uint64_t seed) {
    return splitmix64(fnv1a(token, kFnvOffset) ^ splitmix64(seed));
}

std::uint64_t token_hash_sign(std::string_view token, std::uint64_t seed) {
    // Distinct offset basis and seed stream keep this independent of the index hash.
    return splitmix64(fnv1a(token, 0x84222325cbf29ce4ULL) ^ splitmix64(~seed));
}

void normalize(Vector& v) {
    double n = v.norm();
    if (n > 0.0) v /= n;
}

// Hashing provider -------------------------------------------------------

HashingProvider::HashingProvider(EmbeddingProviderConfig config) : EmbeddingProvider(std::move(config)) {}

Vector HashingProvider::embed_text(std::string_view text) const {
    const auto d = dim();
    const auto seed = config().seed;
    Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
    for (const auto& tok : tokenize(text)) {
        auto idx = static_cast<Eigen::Index>(token_hash_index(tok, seed) % d);
        v[idx] += (token_hash_sign(tok, seed) % 2 == 0) ? 1.0 : -1.0;
    }
    normalize(v);
    return v;
}

// Remote provider --------------------------------------------------------

struct RemoteProvider::Limiter {
    explicit Limiter(std::size_t limit) : available(limit) {}

    void acquire() {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return available > 0; });
        --available;
    }
    void release() {
        {
            std::lock_guard lock(mu);
            ++available;
        }
        cv.notify_one();
    }

    std::mutex mu;
    std::condition_variable cv;
    std::size_t available;
};

RemoteProvider::RemoteProvider(EmbeddingProviderConfig config)
    : EmbeddingProvider(std::move(config)),
      limiter_(std::make_unique<Limiter>(std::max<std::size_t>(1, this->config().max_in_flight))) {
    if (this->config().endpoint.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "remote provider needs an endpoint");
    }
}

RemoteProvider::~RemoteProvider() = default;

Vector RemoteProvider::embed_text(std::string_view text) const {
    return embed_batch({std::string(text)}).front();
}

std::vector<Vector> RemoteProvider::embed_batch(const std::vector<std::string>& texts) const {
    // Texts without tokens embed to zero locally, as with the hashing provider.
    std::vector<Vector> out(texts.size(), Vector::Zero(static_cast<Eigen::Index>(dim())));
    std::vector<std::size_t> slots;
    std::vector<std::string> payload;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (tokenize(texts[i]).empty()) continue;
        slots.push_back(i);
        payload.push_back(texts[i]);
    }
    if (payload.empty()) return out;
    nlohmann::json body = {{"texts", payload}};

    httplib::Result res;
    {
        limiter_->acquire();
        struct Release {
            Limiter* l;
            ~Release() { l->release(); }
        } release{limiter_.get()};
        httplib::Client client(config().endpoint);
        client.set_connection_timeout(config().timeout_seconds);
        client.set_read_timeout(config().timeout_seconds);
        res = client.Post("/embed", body.dump(), "application/json");
    }

    if (!res) {
        throw Error(ErrorCode::kProviderUnavailable,
                    config().endpoint + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::kProviderUnavailable,
                    config().endpoint + " returned HTTP " + std::to_string(res->status));
    }

    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kProviderUnavailable, std::string("malformed embed response: ") + e.what());
    }
    if (!reply.is_object() || !reply.contains("vectors")) {
        throw Error(ErrorCode::kProviderUnavailable, "embed response lacks 'vectors'");
    }
    const auto& vectors = reply.at("vectors");
    if (!vectors.is_array() || vectors.size() != payload.size()) {
        throw Error(ErrorCode::kProviderUnavailable, "embed response has wrong vector count");
    }
    try {
        std::size_t reported = reply.value("dim", dim());
        if (reported != dim()) {
            throw Error(ErrorCode::kDimMismatch,
                        "provider returned dim " + std::to_string(reported) + ", expected " + std::to_string(dim()));
        }
        for (std::size_t r = 0; r < payload.size(); ++r) {
            const auto& row = vectors[r];
            if (!row.is_array()) throw Error(ErrorCode::kProviderUnavailable, "embed response row is not an array");
            if (row.size() != dim()) {
                throw Error(ErrorCode::kDimMismatch, "provider returned a vector of dim " + std::to_string(row.size()));
            }
            Vector v(static_cast<Eigen::Index>(dim()));
            for (std::size_t i = 0; i < dim(); ++i) v[static_cast<Eigen::Index>(i)] = row[i].get<double>();
            if (!v.allFinite()) throw Error(ErrorCode::kProviderUnavailable, "embed response has non-finite values");
            normalize(v);
            out[slots[r]] = std::move(v);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kProviderUnavailable, std::string("malformed embed response: ") + e.what());
    }
    return out;
}

std::unique_ptr<EmbeddingProvider> make_provider(const EmbeddingProviderConfig& config) {
    switch (config.kind) {
        case ProviderKind::kHashing: return std::make_unique<HashingProvider>(config);
        case ProviderKind::kRemote: return std::make_unique<RemoteProvider>(config);
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown provider kind");
}

// Column and table embeddings --------------------------------------------

std::string serialize_column(const ColumnData& col, const TableMetadata& meta, std::size_t max_cells) {
    std::string values;
    std::unordered_set<std::string> seen;
    for (const auto& cell : col.values) {
        if (seen.size() >= max_cells) break;
        auto t = trim_copy(cell);
        if (t.empty() || !seen.insert(t).second) continue;
        if (!values.empty()) values += ", ";
        values += t;
    }
    std::string text = meta.caption + " | " + col.name;
    if (!values.empty()) text += " | " + values;
    return trim_copy(text);
}

Vector embed_column(const EmbeddingProvider& provider, const ColumnData& col, const TableMetadata& meta) {
    return provider.embed_text(serialize_column(col, meta, provider.config().max_cells_per_column));
}

Vector mean_direction(const std::vector<Vector>& vectors, std::size_t dim) {
    Vector mean = Vector::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& v : vectors) mean += v;
    if (!vectors.empty()) mean /= static_cast<double>(vectors.size());
    normalize(mean);
    return mean;
}

Vector table_content_vector(const EmbeddingProvider& provider, const TableRecord& table) {
    if (table.columns.empty()) throw Error(ErrorCode::kEmptyTable, "table '" + table.id + "' has no columns");
    std::vector<Vector> cols;
    cols.reserve(table.columns.size());
    for (const auto& c : table.columns) cols.push_back(embed_column(provider, c, table.metadata));
    return mean_direction(cols, provider.dim());
}

Vector concat_blocks(const Vector& content, const Vector& metadata) {
    Vector out(content.size() + metadata.size());
    out << content, metadata;
    return out;
}

std::string metadata_text(const TableMetadata& meta) { return trim_copy(meta.caption + " " + meta.description); }

PoolVector pool_vector(const EmbeddingProvider& provider, const TableRecord& table) {
    PoolVector pv;
    pv.content = table_content_vector(provider, table);
    pv.metadata = provider.embed_text(metadata_text(table.metadata));
    pv.concatenated = concat_blocks(pv.content, pv.metadata);
    return pv;
}

TableEmbedding embed_table(const EmbeddingProvider& provider, const TableRecord& table) {
    if (table.columns.empty()) throw Error(ErrorCode::kEmptyTable, "table '" + table.id + "' has no columns");
    std::vector<std::string> texts;
    texts.reserve(table.columns.size() + 1);
    for (const auto& c : table.columns) {
        texts.push_back(serialize_column(c, table.metadata, provider.config().max_cells_per_column));
    }
    texts.push_back(metadata_text(table.metadata));
    auto vecs = provider.embed_batch(texts);

    TableEmbedding out;
    out.metadata = std::move(vecs.back());
    vecs.pop_back();
    out.columns = std::move(vecs);
    out.content = mean_direction(out.columns, provider.dim());
    return out;
}

}  // namespace tabscout
