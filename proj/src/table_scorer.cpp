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

#include "tabscout/table_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tabscout/error.hpp"

namespace tabscout {

double cosine(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) {
        throw Error(ErrorCode::kDimMismatch,
                    "cosine of dims " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    }
    double nu = u.norm();
    double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return u.dot(v) / (nu * nv);
}

Eigen::MatrixXd bipartite_weights(const std::vector<Vector>& left, const std::vector<Vector>& right) {
    Eigen::MatrixXd w(static_cast<Eigen::Index>(left.size()), static_cast<Eigen::Index>(right.size()));
    for (std::size_t i = 0; i < left.size(); ++i) {
        for (std::size_t j = 0; j < right.size(); ++j) {
            w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::clamp(cosine(left[i], right[j]), 0.0, 1.0);
        }
    }
    return w;
}

Matching hungarian(const Eigen::MatrixXd& weights) {
    const auto rows = static_cast<std::size_t>(weights.rows());
    const auto cols = static_cast<std::size_t>(weights.cols());
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        double w = weights.data()[i];
        if (!std::isfinite(w)) throw Error(ErrorCode::kInvalidWeight, "non-finite weight");
        if (w < 0.0) throw Error(ErrorCode::kInvalidWeight, "negative weight");
    }
    Matching result;
    const std::size_t n = std::max(rows, cols);
    if (n == 0) return result;

    // Shortest augmenting paths with potentials, minimizing cost = -weight.
    // Indices are 1-based; padding cells cost 0.
    auto cost = [&](std::size_t i, std::size_t j) {
        return (i <= rows && j <= cols) ? -weights(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1))
                                        : 0.0;
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match_col(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match_col[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            std::size_t i0 = match_col[j0], j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match_col[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    for (std::size_t j = 1; j <= cols; ++j) {
        std::size_t i = match_col[j];
        if (i == 0 || i > rows) continue;
        double w = weights(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
        if (w > 0.0) result.pairs.emplace_back(i - 1, j - 1);
    }
    std::sort(result.pairs.begin(), result.pairs.end());
    for (auto [i, j] : result.pairs) result.total += weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return result;
}

JoinScore join_score(const Vector& key, const std::vector<Vector>& candidate_columns) {
    if (candidate_columns.empty()) throw Error(ErrorCode::kEmptyCandidate, "candidate has no columns");
    JoinScore out;
    out.score.kind = TableScoreKind::kJoin;
    double best = -1.0;
    for (std::size_t j = 0; j < candidate_columns.size(); ++j) {
        double s = std::clamp(cosine(key, candidate_columns[j]), 0.0, 1.0);
        if (s > best) {
            best = s;
            out.column = j;
        }
    }
    out.score.value = best;
    return out;
}

UnionScore union_score(const std::vector<Vector>& query_columns, const std::vector<Vector>& candidate_columns) {
    if (query_columns.empty()) throw Error(ErrorCode::kEmptyCandidate, "query has no columns");
    if (candidate_columns.empty()) throw Error(ErrorCode::kEmptyCandidate, "candidate has no columns");
    UnionScore out;
    out.weights = bipartite_weights(query_columns, candidate_columns);
    out.matching = hungarian(out.weights);
    out.score.kind = TableScoreKind::kUnion;
    out.score.value = std::clamp(out.matching.total / static_cast<double>(query_columns.size()), 0.0, 1.0);
    return out;
}

}  // namespace tabscout
