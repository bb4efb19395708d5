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

#include "tabscout/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "tabscout/error.hpp"

namespace tabscout {

namespace {

double dcg(const std::vector<int>& grades, std::size_t k) {
    double total = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
        total += (std::exp2(grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    return total;
}

}  // namespace

double ndcg_at_k(const std::vector<std::string>& ranked_ids, const std::map<std::string, int>& qrels,
                 std::size_t k) {
    if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    std::vector<int> ideal;
    for (const auto& [id, grade] : qrels) {
        if (grade > 0) ideal.push_back(grade);
    }
    if (ideal.empty()) return 0.0;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());

    std::vector<int> got;
    got.reserve(std::min(k, ranked_ids.size()));
    for (std::size_t i = 0; i < std::min(k, ranked_ids.size()); ++i) {
        auto it = qrels.find(ranked_ids[i]);
        got.push_back(it == qrels.end() ? 0 : std::max(0, it->second));
    }
    return dcg(got, k) / dcg(ideal, k);
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

RunResult evaluate_run(const Ranker& ranker, const Benchmark& bench) {
    RunResult result;
    const auto qrels = bench.qrels_by_query();
    const std::map<std::string, int> none;
    std::vector<double> latencies;

    for (const auto& q : bench.queries) {
        QueryRun run;
        auto start = std::chrono::steady_clock::now();
        try {
            run.ranked = ranker(q);
            run.latency_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            latencies.push_back(run.latency_ms);
            auto it = qrels.find(q.id);
            const auto& labels = it == qrels.end() ? none : it->second;
            run.ndcg5 = ndcg_at_k(run.ranked, labels, 5);
            run.ndcg10 = ndcg_at_k(run.ranked, labels, 10);
        } catch (const std::exception& e) {
            run.error = e.what();
            ++result.failures;
        }
        result.per_query.emplace(q.id, std::move(run));
    }
    if (!bench.queries.empty() && result.failures == bench.queries.size()) {
        throw Error(ErrorCode::kInvalidQuery, "every benchmark query failed; first error: " +
                                                  result.per_query.begin()->second.error.value_or(""));
    }

    if (!result.per_query.empty()) {
        double s5 = 0.0, s10 = 0.0;
        for (const auto& [id, run] : result.per_query) {
            s5 += run.ndcg5;
            s10 += run.ndcg10;
        }
        result.mean_ndcg5 = s5 / static_cast<double>(result.per_query.size());
        result.mean_ndcg10 = s10 / static_cast<double>(result.per_query.size());
    }
    if (!latencies.empty()) {
        result.latency_mean_ms =
            std::accumulate(latencies.begin(), latencies.end(), 0.0) / static_cast<double>(latencies.size());
        result.latency_p50_ms = percentile(latencies, 50);
        result.latency_p95_ms = percentile(latencies, 95);
    }
    return result;
}

Ranker engine_ranker(const IndexedPool& pool, const CrossFusionModel& model, const EmbeddingProvider& provider,
                     const EngineConfig& config) {
    return [&pool, &model, &provider, config](const BenchmarkQuery& q) {
        QuerySpec spec = q.spec;
        spec.k = std::max<std::size_t>(spec.k, 10);
        std::vector<std::string> ids;
        for (const auto& r : execute(spec, pool, model, provider, config)) ids.push_back(r.table_id);
        return ids;
    };
}

std::string format_report(const RunResult& result) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-24s %9s %9s %12s\n", "query", "ndcg@5", "ndcg@10", "latency_ms");
    out += line;
    for (const auto& [id, run] : result.per_query) {
        if (run.error) {
            std::snprintf(line, sizeof line, "%-24s %9s %9s %12s  %s\n", id.c_str(), "-", "-", "-",
                          run.error->c_str());
        } else {
            std::snprintf(line, sizeof line, "%-24s %9.4f %9.4f %12.3f\n", id.c_str(), run.ndcg5, run.ndcg10,
                          run.latency_ms);
        }
        out += line;
    }
    out += "\n";
    std::snprintf(line, sizeof line,
                  "queries %zu  failures %zu\nmean NDCG@5  %.4f\nmean NDCG@10 %.4f\n"
                  "latency ms   mean %.3f  p50 %.3f  p95 %.3f\n",
                  result.per_query.size(), result.failures, result.mean_ndcg5, result.mean_ndcg10,
                  result.latency_mean_ms, result.latency_p50_ms, result.latency_p95_ms);
    out += line;
    return out;
}

std::string result_json(const RunResult& result) {
    nlohmann::json j;
    j["mean_ndcg5"] = result.mean_ndcg5;
    j["mean_ndcg10"] = result.mean_ndcg10;
    j["latency_ms"] = {{"mean", result.latency_mean_ms}, {"p50", result.latency_p50_ms}, {"p95", result.latency_p95_ms}};
    j["failures"] = result.failures;
    auto& per = j["queries"];
    per = nlohmann::json::object();
    for (const auto& [id, run] : result.per_query) {
        nlohmann::json q = {{"ndcg5", run.ndcg5}, {"ndcg10", run.ndcg10}, {"latency_ms", run.latency_ms},
                            {"ranked", run.ranked}};
        if (run.error) q["error"] = *run.error;
        per[id] = std::move(q);
    }
    return j.dump(2);
}

}  // namespace tabscout
