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

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "tabscout/trainer.hpp"
#include "test_util.hpp"

namespace tabscout::testing {

inline std::vector<TrainExample> random_examples(std::mt19937_64& rng, std::size_t d, std::size_t queries) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TrainExample> out;
    for (std::size_t q = 0; q < queries; ++q) {
        TrainExample ex;
        ex.query_id = "q" + std::to_string(q);
        ex.condition = random_unit(rng, d);
        for (std::size_t k = 0, n = 1 + rng() % 4; k < n; ++k) {
            auto t = std::make_shared<TableEmbedding>();
            for (std::size_t j = 0, m = 1 + rng() % 4; j < m; ++j) t->columns.push_back(random_unit(rng, d));
            t->metadata = random_unit(rng, d);
            t->content = t->columns.front();
            TrainCandidate c;
            c.table_id = "t" + std::to_string(k);
            c.table = t;
            c.rho_t = u(rng);
            c.label = (rng() % 3) / 2.0;
            ex.candidates.push_back(std::move(c));
        }
        out.push_back(std::move(ex));
    }
    return out;
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over every
/// parameter (and lambda when requested), with central differences of step eps.
inline double max_gradient_error(const CrossFusionModel& model, const std::vector<TrainExample>& batch,
                                 bool with_lambda, double eps = 1e-5, double floor = 1e-7) {
    auto analytic = backward(model, batch, with_lambda).gradients;
    std::vector<double> grads;
    analytic.for_each_tensor([&](const std::string&, const double* p, std::size_t n) { grads.insert(grads.end(), p, p + n); });

    CrossFusionModel probe = model;
    std::vector<double*> params;
    probe.for_each_tensor([&](const std::string&, double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) params.push_back(p + i);
    });
    if (with_lambda) {
        params.push_back(&probe.lambda);
        grads.push_back(analytic.lambda);
    }

    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i];
        const double saved = *p;
        *p = saved + eps;
        const double up = loss(probe, batch);
        *p = saved - eps;
        const double down = loss(probe, batch);
        *p = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({std::abs(grads[i]), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(grads[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace tabscout::testing
