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
#include <string>
#include <vector>

#include "tabscout/embedding.hpp"

namespace tabscout {

struct HnswParams {
    std::size_t M = 16;
    std::size_t ef_construction = 200;
    std::size_t ef_search = 64;
    std::uint64_t seed = 42;
};

struct IndexEntry {
    std::string table_id;
    Vector vector;
};

struct SearchHit {
    std::string table_id;
    double score = 0.0;
};

/// Orders hits by score descending, then table id ascending.
void sort_hits(std::vector<SearchHit>& hits);

/// Hierarchical navigable small-world graph under inner-product similarity.
///
/// Node levels come from a seeded generator, so two builds over the same
/// entries with the same params produce the same graph. The index is frozen
/// after build: concurrent searches are safe, mutation means rebuilding.
class HnswIndex {
public:
    HnswIndex() = default;

    static HnswIndex build(const std::vector<IndexEntry>& entries, const HnswParams& params);

    /// Top-n by inner product with beam width max(ef_search, n).
    std::vector<SearchHit> search(const Vector& query, std::size_t n) const;
    std::vector<SearchHit> search(const Vector& query, std::size_t n, std::size_t ef) const;

    void save(const std::filesystem::path& path) const;
    static HnswIndex load(const std::filesystem::path& path);

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const HnswParams& params() const { return params_; }
    void set_ef_search(std::size_t ef) { params_.ef_search = ef; }

    // Graph inspection.
    int max_level() const { return max_level_; }
    int level(std::size_t node) const { return levels_[node]; }
    const std::vector<std::uint32_t>& neighbors(std::size_t node, int layer) const;
    const std::string& table_id(std::size_t node) const { return ids_[node]; }

private:
    struct Candidate {
        double distance;  // negated inner product
        std::uint32_t node;
        bool operator<(const Candidate& o) const {
            return distance < o.distance || (distance == o.distance && node < o.node);
        }
        bool operator>(const Candidate& o) const { return o < *this; }
    };

    const double* data(std::size_t node) const { return vectors_.data() + node * dim_; }
    double distance(const double* q, std::size_t node) const;
    double distance(std::size_t a, std::size_t b) const { return distance(data(a), b); }
    std::size_t max_degree(int layer) const { return layer == 0 ? 2 * params_.M : params_.M; }

    void insert(std::uint32_t node);
    std::vector<Candidate> search_layer(const double* q, std::vector<Candidate> entry, std::size_t ef,
                                        int layer) const;
    std::vector<Candidate> select_neighbors(std::vector<Candidate> candidates, std::size_t m) const;
    std::vector<SearchHit> exhaustive(const Vector& query, std::size_t n) const;

    HnswParams params_;
    std::size_t dim_ = 0;
    std::vector<double> vectors_;
    std::vector<std::string> ids_;
    std::vector<int> levels_;
    // links_[node][layer] for layer in [0, levels_[node]]
    std::vector<std::vector<std::vector<std::uint32_t>>> links_;
    std::int64_t entry_point_ = -1;
    int max_level_ = -1;
};

/// Exact top-n by inner product with the same ordering as HnswIndex::search.
std::vector<SearchHit> brute_force_search(const std::vector<IndexEntry>& entries, const Vector& query,
                                          std::size_t n);

}  // namespace tabscout
