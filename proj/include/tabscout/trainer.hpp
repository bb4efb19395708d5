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
#include <memory>
#include <string>
#include <vector>

#include "tabscout/engine.hpp"
#include "tabscout/nlc_model.hpp"
#include "tabscout/table.hpp"

namespace tabscout {

struct TrainCandidate {
    std::string table_id;
    std::shared_ptr<const TableEmbedding> table;
    double rho_t = 0.0;   // 0 when the query has no table
    double label = 0.0;   // grade / max_grade
};

struct TrainExample {
    std::string query_id;
    Vector condition;
    std::vector<TrainCandidate> candidates;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 50;
    std::size_t batch_size = 8;  // queries per step
    std::size_t negatives_per_query = 32;
    std::uint64_t seed = 0;
    bool optimize_lambda = false;
};

/// Mean over queries of the mean squared residual (MLP(h_c) + lambda*rho_t - y)
/// over each query's candidates.
double loss(const CrossFusionModel& model, const std::vector<TrainExample>& batch);

struct LossAndGradients {
    double loss = 0.0;
    CrossFusionModel gradients;  // same shapes as the model
};

/// Analytic gradients of `loss`. Max-pooling routes each component's gradient
/// to its winning column (lowest index on ties). The lambda gradient is filled
/// only when `with_lambda` is set.
LossAndGradients backward(const CrossFusionModel& model, const std::vector<TrainExample>& batch,
                          bool with_lambda = false);

/// One plain SGD update; lambda is clamped at 0 when optimized.
void sgd_step(CrossFusionModel& model, const CrossFusionModel& gradients, double learning_rate,
              bool with_lambda);

struct TrainResult {
    /// Full-set loss before training followed by the loss after each epoch.
    std::vector<double> loss_curve;
};

/// Seeded shuffling into query batches; throws DivergenceDetected on a
/// non-finite loss.
TrainResult train(CrossFusionModel& model, const std::vector<TrainExample>& examples, const TrainConfig& config);

/// Builds one example per benchmark query that has a condition: every
/// positive qrel plus up to `negatives_per_query` negatives sampled from the
/// labeled negatives and the query's retrieved candidates.
std::vector<TrainExample> make_training_examples(const Benchmark& bench, const IndexedPool& pool,
                                                 const EmbeddingProvider& provider, const TrainConfig& config,
                                                 std::size_t candidate_pool_size = 100);

void save_checkpoint(const CrossFusionModel& model, const std::filesystem::path& path);
CrossFusionModel load_checkpoint(const std::filesystem::path& path);

}  // namespace tabscout
