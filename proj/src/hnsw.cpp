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

#include "tabscout/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <unordered_set>

#include "binary_io.hpp"
#include "tabscout/error.hpp"

namespace tabscout {

namespace {

constexpr std::uint32_t kIndexMagic = 0x574E4854;  // "THNW"
constexpr std::uint32_t kIndexVersion = 1;

using ConstMap = Eigen::Map<const Vector>;

}  // namespace

void sort_hits(std::vector<SearchHit>& hits) {
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.table_id < b.table_id;
    });
}

double HnswIndex::distance(const double* q, std::size_t node) const {
    auto d = static_cast<Eigen::Index>(dim_);
    return -ConstMap(q, d).dot(ConstMap(data(node), d));
}

const std::vector<std::uint32_t>& HnswIndex::neighbors(std::size_t node, int layer) const {
    return links_.at(node).at(static_cast<std::size_t>(layer));
}

HnswIndex HnswIndex::build(const std::vector<IndexEntry>& entries, const HnswParams& params) {
    if (params.M < 2) throw Error(ErrorCode::kInvalidArgument, "M must be >= 2");
    if (params.ef_construction == 0 || params.ef_search == 0) {
        throw Error(ErrorCode::kInvalidArgument, "ef parameters must be positive");
    }

    HnswIndex index;
    index.params_ = params;
    if (entries.empty()) return index;

    index.dim_ = static_cast<std::size_t>(entries.front().vector.size());
    if (index.dim_ == 0) throw Error(ErrorCode::kDimMismatch, "zero-dimensional entries");
    std::unordered_set<std::string> seen;
    index.vectors_.reserve(entries.size() * index.dim_);
    for (const auto& e : entries) {
        if (static_cast<std::size_t>(e.vector.size()) != index.dim_) {
            throw Error(ErrorCode::kDimMismatch, "entry '" + e.table_id + "' has dim " +
                                                     std::to_string(e.vector.size()) + ", expected " +
                                                     std::to_string(index.dim_));
        }
        if (!seen.insert(e.table_id).second) throw Error(ErrorCode::kDuplicateId, "duplicate id '" + e.table_id + "'");
        index.vectors_.insert(index.vectors_.end(), e.vector.data(), e.vector.data() + e.vector.size());
        index.ids_.push_back(e.table_id);
    }

    // Levels follow floor(-ln(U) / ln(M)), drawn in insertion order.
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double ml = 1.0 / std::log(static_cast<double>(params.M));
    index.levels_.resize(entries.size());
    for (auto& lvl : index.levels_) lvl = static_cast<int>(std::floor(-std::log(1.0 - uniform(rng)) * ml));

    index.links_.resize(entries.size());
    for (std::uint32_t node = 0; node < entries.size(); ++node) index.insert(node);
    return index;
}

void HnswIndex::insert(std::uint32_t node) {
    const int level = levels_[node];
    links_[node].assign(static_cast<std::size_t>(level) + 1, {});
    if (entry_point_ < 0) {
        entry_point_ = node;
        max_level_ = level;
        return;
    }

    const double* q = data(node);
    auto ep = static_cast<std::uint32_t>(entry_point_);
    std::vector<Candidate> eps{{distance(q, ep), ep}};
    for (int layer = max_level_; layer > level; --layer) eps = search_layer(q, eps, 1, layer);

    for (int layer = std::min(level, max_level_); layer >= 0; --layer) {
        eps = search_layer(q, eps, params_.ef_construction, layer);
        auto chosen = select_neighbors(eps, params_.M);
        auto& own = links_[node][static_cast<std::size_t>(layer)];
        for (const auto& c : chosen) own.push_back(c.node);

        const std::size_t cap = max_degree(layer);
        for (const auto& c : chosen) {
            auto& theirs = links_[c.node][static_cast<std::size_t>(layer)];
            theirs.push_back(node);
            if (theirs.size() <= cap) continue;
            std::vector<Candidate> pool;
            pool.reserve(theirs.size());
            for (auto nb : theirs) pool.push_back({distance(c.node, nb), nb});
            auto kept = select_neighbors(std::move(pool), cap);
            theirs.clear();
            for (const auto& k : kept) theirs.push_back(k.node);
        }
    }
    if (level > max_level_) {
        max_level_ = level;
        entry_point_ = node;
    }
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(const double* q, std::vector<Candidate> entry,
                                                          std::size_t ef, int layer) const {
    std::vector<std::uint8_t> visited(size(), 0);
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
    std::priority_queue<Candidate> best;  // top() is the furthest kept result
    for (const auto& e : entry) {
        if (visited[e.node]) continue;
        visited[e.node] = 1;
        frontier.push(e);
        best.push(e);
        if (best.size() > ef) best.pop();
    }

    while (!frontier.empty()) {
        Candidate c = frontier.top();
        if (best.size() >= ef && c.distance > best.top().distance) break;
        frontier.pop();
        for (auto nb : links_[c.node][static_cast<std::size_t>(layer)]) {
            if (visited[nb]) continue;
            visited[nb] = 1;
            Candidate cand{distance(q, nb), nb};
            if (best.size() < ef || cand.distance < best.top().distance) {
                frontier.push(cand);
                best.push(cand);
                if (best.size() > ef) best.pop();
            }
        }
    }

    std::vector<Candidate> out(best.size());
    for (auto i = out.size(); i-- > 0;) {
        out[i] = best.top();
        best.pop();
    }
    return out;
}

std::vector<HnswIndex::Candidate> HnswIndex::select_neighbors(std::vector<Candidate> candidates,
                                                              std::size_t m) const {
    std::sort(candidates.begin(), candidates.end());
    if (candidates.size() <= m) return candidates;

    // Keep a candidate only if it is closer to the base than to every kept neighbor.
    std::vector<Candidate> kept;
    kept.reserve(m);
    for (const auto& c : candidates) {
        if (kept.size() >= m) break;
        bool diverse = true;
        for (const auto& k : kept) {
            if (distance(c.node, k.node) < c.distance) {
                diverse = false;
                break;
            }
        }
        if (diverse) kept.push_back(c);
    }
    return kept;
}

std::vector<SearchHit> HnswIndex::search(const Vector& query, std::size_t n) const {
    return search(query, n, params_.ef_search);
}

std::vector<SearchHit> HnswIndex::search(const Vector& query, std::size_t n, std::size_t ef) const {
    if (n == 0) throw Error(ErrorCode::kInvalidArgument, "n must be positive");
    if (size() == 0) return {};
    if (static_cast<std::size_t>(query.size()) != dim_) {
        throw Error(ErrorCode::kDimMismatch,
                    "query dim " + std::to_string(query.size()) + ", index dim " + std::to_string(dim_));
    }
    if (n >= size()) return exhaustive(query, n);

    ef = std::max(ef, n);
    const double* q = query.data();
    auto ep = static_cast<std::uint32_t>(entry_point_);
    std::vector<Candidate> eps{{distance(q, ep), ep}};
    for (int layer = max_level_; layer > 0; --layer) eps = search_layer(q, eps, 1, layer);
    eps = search_layer(q, eps, ef, 0);

    std::vector<SearchHit> hits;
    hits.reserve(eps.size());
    for (const auto& c : eps) hits.push_back({ids_[c.node], -c.distance});
    sort_hits(hits);
    if (hits.size() > n) hits.resize(n);
    return hits;
}

std::vector<SearchHit> HnswIndex::exhaustive(const Vector& query, std::size_t n) const {
    std::vector<SearchHit> hits;
    hits.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) hits.push_back({ids_[i], -distance(query.data(), i)});
    sort_hits(hits);
    if (hits.size() > n) hits.resize(n);
    return hits;
}

void HnswIndex::save(const std::filesystem::path& path) const {
    detail::BinaryWriter w;
    w.u32(kIndexMagic);
    w.u32(kIndexVersion);
    w.u64(dim_);
    w.u64(params_.M);
    w.u64(size());
    w.u64(params_.seed);
    w.u64(params_.ef_construction);
    w.u64(params_.ef_search);
    w.i64(entry_point_);
    w.i64(max_level_);
    for (int lvl : levels_) w.u32(static_cast<std::uint32_t>(lvl));
    for (const auto& layers : links_) {
        for (const auto& adj : layers) {
            w.u32(static_cast<std::uint32_t>(adj.size()));
            for (auto nb : adj) w.u32(nb);
        }
    }
    for (const auto& id : ids_) w.str(id);
    for (double v : vectors_) w.f64(v);
    w.write_to(path);
}

HnswIndex HnswIndex::load(const std::filesystem::path& path) {
    auto r = detail::BinaryReader::from_file(path, ErrorCode::kCorruptIndex);
    if (r.remaining() < 8) r.fail("file too short for header");
    if (r.u32() != kIndexMagic) r.fail("bad magic");
    auto version = r.u32();
    if (version != kIndexVersion) {
        throw Error(ErrorCode::kUnsupportedVersion, "index version " + std::to_string(version) +
                                                        " (supported: " + std::to_string(kIndexVersion) + ")");
    }
    HnswIndex index;
    index.dim_ = r.u64();
    index.params_.M = r.u64();
    auto count = r.u64();
    index.params_.seed = r.u64();
    index.params_.ef_construction = r.u64();
    index.params_.ef_search = r.u64();
    index.entry_point_ = r.i64();
    index.max_level_ = static_cast<int>(r.i64());
    if (index.params_.M < 2 || count > (1ULL << 32)) r.fail("implausible header");
    if ((count == 0) != (index.entry_point_ < 0) || index.entry_point_ >= static_cast<std::int64_t>(count)) {
        r.fail("entry point out of range");
    }

    index.levels_.resize(count);
    for (auto& lvl : index.levels_) {
        lvl = static_cast<int>(r.u32());
        if (lvl > index.max_level_) r.fail("node level above max level");
    }
    index.links_.resize(count);
    for (std::size_t node = 0; node < count; ++node) {
        index.links_[node].resize(static_cast<std::size_t>(index.levels_[node]) + 1);
        for (std::size_t layer = 0; layer < index.links_[node].size(); ++layer) {
            auto n = r.u32();
            if (n > index.max_degree(static_cast<int>(layer))) r.fail("neighbor list exceeds degree bound");
            auto& adj = index.links_[node][layer];
            adj.resize(n);
            for (auto& nb : adj) {
                nb = r.u32();
                if (nb >= count) r.fail("neighbor id out of range");
            }
        }
    }
    index.ids_.resize(count);
    for (auto& id : index.ids_) id = r.str();
    if (r.remaining() != count * index.dim_ * 8) r.fail("vector block size mismatch");
    index.vectors_.resize(count * index.dim_);
    for (auto& v : index.vectors_) v = r.f64();
    return index;
}

std::vector<SearchHit> brute_force_search(const std::vector<IndexEntry>& entries, const Vector& query,
                                          std::size_t n) {
    std::vector<SearchHit> hits;
    hits.reserve(entries.size());
    for (const auto& e : entries) {
        if (e.vector.size() != query.size()) throw Error(ErrorCode::kDimMismatch, "entry/query dim mismatch");
        hits.push_back({e.table_id, query.dot(e.vector)});
    }
    sort_hits(hits);
    if (hits.size() > n) hits.resize(n);
    return hits;
}

}  // namespace tabscout
