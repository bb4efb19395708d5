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

#include "tabscout/error.hpp"
#include "tabscout/table_scorer.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include <doctest.h>

using namespace tabscout;
using tabscout::testing::random_vector;

namespace {

// Best total over every injection of the smaller side into the larger.
double exhaustive_best(const Eigen::MatrixXd& w) {
    const bool transpose = w.rows() > w.cols();
    Eigen::MatrixXd m = transpose ? Eigen::MatrixXd(w.transpose()) : w;
    std::vector<int> cols(static_cast<std::size_t>(m.cols()));
    std::iota(cols.begin(), cols.end(), 0);
    double best = 0.0;
    do {
        double total = 0.0;
        for (Eigen::Index r = 0; r < m.rows(); ++r) total += m(r, cols[static_cast<std::size_t>(r)]);
        best = std::max(best, total);
    } while (std::next_permutation(cols.begin(), cols.end()));
    return best;
}

double greedy_total(const Eigen::MatrixXd& w) {
    std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> edges;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) edges.emplace_back(w(r, c), r, c);
    std::sort(edges.rbegin(), edges.rend());
    std::vector<bool> ru(static_cast<std::size_t>(w.rows())), cu(static_cast<std::size_t>(w.cols()));
    double total = 0.0;
    for (auto [v, r, c] : edges) {
        if (ru[static_cast<std::size_t>(r)] || cu[static_cast<std::size_t>(c)]) continue;
        ru[static_cast<std::size_t>(r)] = cu[static_cast<std::size_t>(c)] = true;
        total += v;
    }
    return total;
}

Eigen::MatrixXd random_weights(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        // sprinkle exact zeros and exact ties
        double x = u(rng);
        w.data()[i] = x < 0.15 ? 0.0 : (x < 0.25 ? 0.5 : x);
    }
    return w;
}

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

}  // namespace

TEST_CASE("cosine") {
    CHECK(cosine(v2(1, 0), v2(2, 0)) == doctest::Approx(1.0));
    CHECK(cosine(v2(1, 0), v2(0, 3)) == 0.0);
    CHECK(cosine(v2(0, 0), v2(0, 3)) == 0.0);
    CHECK(cosine(v2(1, 0), v2(-1, 0)) == doctest::Approx(-1.0));
    CHECK_THROWS_WITH(cosine(v2(1, 0), Vector::Zero(3)), doctest::Contains("DimMismatch"));
}

TEST_CASE("join score") {
    Vector key = v2(1, 0);
    CHECK(join_score(key, {v2(0, 1), key}).score.value == doctest::Approx(1.0));
    CHECK(join_score(key, {v2(0, 1), v2(0, -2)}).score.value == 0.0);
    auto js = join_score(key, {v2(0.6, 0.8), v2(3, 0)});
    CHECK(js.score.value == doctest::Approx(1.0));
    CHECK(js.column == 1);
    CHECK(js.score.kind == TableScoreKind::kJoin);
    // ties resolve to the lowest index
    CHECK(join_score(key, {v2(0, 1), v2(2, 0), v2(1, 0)}).column == 1);
    CHECK_THROWS_WITH(join_score(key, {}), doctest::Contains("EmptyCandidate"));
}

TEST_CASE("hungarian worked examples") {
    Eigen::MatrixXd a(2, 2);
    a << 0.9, 0.1, 0.2, 0.8;
    auto m = hungarian(a);
    CHECK(m.total == doctest::Approx(1.7).epsilon(1e-12));
    CHECK(m.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});

    CHECK(hungarian(Eigen::MatrixXd::Identity(2, 2)).total == doctest::Approx(2.0));

    Eigen::MatrixXd row(1, 3);
    row << 0.2, 0.7, 0.4;
    auto r = hungarian(row);
    CHECK(r.total == doctest::Approx(0.7));
    CHECK(r.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});

    auto zero = hungarian(Eigen::MatrixXd::Zero(3, 2));
    CHECK(zero.total == 0.0);
    CHECK(zero.pairs.empty());

    Eigen::MatrixXd bad(1, 2);
    bad << 0.5, -0.1;
    CHECK_THROWS_WITH(hungarian(bad), doctest::Contains("InvalidWeight"));
    bad << 0.5, std::nan("");
    CHECK_THROWS_WITH(hungarian(bad), doctest::Contains("InvalidWeight"));
}

TEST_CASE("hungarian matches exhaustive enumeration up to 6x6") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 600; ++trial) {
        Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng() % 6);
        Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng() % 6);
        auto w = random_weights(rng, rows, cols);
        auto m = hungarian(w);
        CHECK(std::abs(m.total - exhaustive_best(w)) <= 1e-9);
        CHECK(m.total >= greedy_total(w) - 1e-12);

        // reported pairs form a matching whose weights sum to the total
        std::set<std::size_t> rs, cs;
        double sum = 0.0;
        for (auto [r, c] : m.pairs) {
            CHECK(rs.insert(r).second);
            CHECK(cs.insert(c).second);
            CHECK(w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) > 0.0);
            sum += w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
        CHECK(sum == doctest::Approx(m.total).epsilon(1e-12));
    }
}

TEST_CASE("union score") {
    std::mt19937_64 rng(5);
    std::vector<Vector> q{random_vector(rng, 8), random_vector(rng, 8), random_vector(rng, 8)};
    auto self = union_score(q, q);
    CHECK(self.score.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(self.score.kind == TableScoreKind::kUnion);
    CHECK(self.matching.pairs.size() == 3);

    std::vector<Vector> two{Vector::Unit(4, 0), Vector::Unit(4, 1)};
    std::vector<Vector> one_shared{Vector::Unit(4, 0), Vector::Unit(4, 2), Vector::Unit(4, 3)};
    CHECK(union_score(two, one_shared).score.value == doctest::Approx(0.5));

    // negative cosines are clamped rather than rewarded or penalised
    std::vector<Vector> opposite{-Vector::Unit(4, 0), -Vector::Unit(4, 1)};
    CHECK(union_score(two, opposite).score.value == 0.0);
    CHECK((bipartite_weights(two, opposite).array() == 0.0).all());

    CHECK_THROWS_WITH(union_score(two, {}), doctest::Contains("EmptyCandidate"));
}

TEST_CASE("union score properties on random instances") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t nq = 1 + rng() % 5, nc = 1 + rng() % 5;
        std::vector<Vector> q, c;
        for (std::size_t i = 0; i < nq; ++i) q.push_back(random_vector(rng, 6));
        for (std::size_t i = 0; i < nc; ++i) c.push_back(random_vector(rng, 6));
        auto s = union_score(q, c).score.value;
        CHECK(s >= 0.0);
        CHECK(s <= 1.0 + 1e-12);
        auto w = bipartite_weights(q, c);
        CHECK(s == doctest::Approx(exhaustive_best(w) / static_cast<double>(nq)).epsilon(1e-12));
        // candidate column order does not matter
        auto shuffled = c;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(union_score(q, shuffled).score.value == doctest::Approx(s).epsilon(1e-12));
    }
}
