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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tabscout/engine.hpp"
#include "tabscout/table.hpp"

namespace tabscout {

/// DCG@k with gain 2^rel - 1 and discount log2(i + 1), normalized by the
/// ideal DCG of the query's qrels. 0 when the query has no positive qrel.
double ndcg_at_k(const std::vector<std::string>& ranked_ids, const std::map<std::string, int>& qrels,
                 std::size_t k);

struct QueryRun {
    double ndcg5 = 0.0;
    double ndcg10 = 0.0;
    double latency_ms = 0.0;
    std::vector<std::string> ranked;
    std::optional<std::string> error;
};

struct RunResult {
    std::map<std::string, QueryRun> per_query;
    double mean_ndcg5 = 0.0;
    double mean_ndcg10 = 0.0;
    double latency_p50_ms = 0.0;
    double latency_p95_ms = 0.0;
    double latency_mean_ms = 0.0;
    std::size_t failures = 0;
};

/// Anything that ranks table ids for a benchmark query.
using Ranker = std::function<std::vector<std::string>(const BenchmarkQuery&)>;

/// Runs every query sequentially, timing each call to `ranker`. Failed
/// queries are recorded with NDCG 0 and kept in the means; the run throws
/// only if every query fails.
RunResult evaluate_run(const Ranker& ranker, const Benchmark& bench);

/// Ranker over the engine; asks for max(k, 10) results so NDCG@10 is defined.
Ranker engine_ranker(const IndexedPool& pool, const CrossFusionModel& model, const EmbeddingProvider& provider,
                     const EngineConfig& config);

/// Nearest-rank percentile of `values` (q in [0, 100]).
double percentile(std::vector<double> values, double q);

std::string format_report(const RunResult& result);
std::string result_json(const RunResult& result);

}  // namespace tabscout
