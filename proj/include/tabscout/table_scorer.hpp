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
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tabscout/embedding.hpp"

namespace tabscout {

enum class TableScoreKind { kJoin, kUnion };

struct TableScore {
    double value = 0.0;
    TableScoreKind kind = TableScoreKind::kUnion;
};

struct Matching {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col), positive-weight edges only
    double total = 0.0;
};

struct JoinScore {
    TableScore score;
    std::size_t column = 0;  // argmax candidate column (lowest index on ties)
};

struct UnionScore {
    TableScore score;
    Matching matching;
    Eigen::MatrixXd weights;
};

/// u.v / (|u||v|), 0 when either norm is zero.
double cosine(const Vector& u, const Vector& v);

/// |left| x |right| matrix of cosines clamped to [0, 1].
Eigen::MatrixXd bipartite_weights(const std::vector<Vector>& left, const std::vector<Vector>& right);

/// Exact maximum-weight bipartite matching (Kuhn-Munkres on the padded square matrix).
Matching hungarian(const Eigen::MatrixXd& weights);

JoinScore join_score(const Vector& key, const std::vector<Vector>& candidate_columns);

/// Matching total divided by the number of query columns.
UnionScore union_score(const std::vector<Vector>& query_columns, const std::vector<Vector>& candidate_columns);

}  // namespace tabscout
