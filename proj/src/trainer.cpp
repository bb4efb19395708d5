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

#include "tabscout/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "binary_io.hpp"
#include "tabscout/error.hpp"

namespace tabscout {

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4B434854;  // "THCK"
constexpr std::uint32_t kCheckpointVersion = 1;

using ExampleRefs = std::vector<const TrainExample*>;

ExampleRefs refs_of(const std::vector<TrainExample>& batch) {
    ExampleRefs out;
    out.reserve(batch.size());
    for (const auto& e : batch) out.push_back(&e);
    return out;
}

void check_batch(const ExampleRefs& batch) {
    if (batch.empty()) throw Error(ErrorCode::kEmptyBatch, "batch has no examples");
    for (const auto* e : batch) {
        if (e->candidates.empty()) {
            throw Error(ErrorCode::kEmptyCandidate, "training example '" + e->query_id + "' has no candidates");
        }
    }
}

double loss_impl(const CrossFusionModel& model, const ExampleRefs& batch) {
    check_batch(batch);
    double total = 0.0;
    for (const auto* ex : batch) {
        double per_query = 0.0;
        for (const auto& c : ex->candidates) {
            double s = condition_score(model, c.table->columns, c.table->metadata, ex->condition).value;
            double r = s + model.lambda * c.rho_t - c.label;
            per_query += r * r;
        }
        total += per_query / static_cast<double>(ex->candidates.size());
    }
    return total / static_cast<double>(batch.size());
}

LossAndGradients backward_impl(const CrossFusionModel& model, const ExampleRefs& batch, bool with_lambda) {
    check_batch(batch);
    LossAndGradients out;
    out.gradients = model.zeros_like();
    auto& g = out.gradients;
    const auto dh = static_cast<Eigen::Index>(model.d_h);
    const std::size_t n_layers = model.head.layers.size();

    double total = 0.0;
    for (const auto* ex : batch) {
        const double weight = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(ex->candidates.size()));
        for (const auto& c : ex->candidates) {
            auto tr = trace_candidate(model, c.table->columns, c.table->metadata, ex->condition);
            const double r = tr.value + model.lambda * c.rho_t - c.label;
            total += weight * r * r;
            const double dvalue = 2.0 * weight * r;
            if (with_lambda) g.lambda += dvalue * c.rho_t;

            // Fusion head, last layer linear.
            Vector upstream = Vector::Constant(1, dvalue);
            for (std::size_t i = n_layers; i-- > 0;) {
                const Vector& in = tr.head_activations[i];
                const Vector& act = tr.head_activations[i + 1];
                Vector dz = (i + 1 == n_layers) ? upstream
                                                : Vector(upstream.array() * (1.0 - act.array().square()));
                g.head.layers[i].weight.noalias() += dz * in.transpose();
                g.head.layers[i].bias += dz;
                upstream = model.head.layers[i].weight.transpose() * dz;
            }

            // Metadata branch.
            Vector dz_cm = upstream.tail(dh).array() * (1.0 - tr.h_cm.array().square());
            g.metadata.W2.noalias() += dz_cm * tr.metadata_features.transpose();
            g.metadata.b2 += dz_cm;

            // Condition-table branch: each component flows to its argmax column only.
            for (Eigen::Index row = 0; row < dh; ++row) {
                const Eigen::Index col = tr.argmax[static_cast<std::size_t>(row)];
                const double h = tr.column_hidden(row, col);
                const double dz = upstream[row] * (1.0 - h * h);
                if (dz == 0.0) continue;
                g.interaction.W1.row(row).noalias() += dz * tr.features.col(col).transpose();
                g.interaction.b1[row] += dz;
            }
        }
    }
    out.loss = total;
    return out;
}

}  // namespace

double loss(const CrossFusionModel& model, const std::vector<TrainExample>& batch) {
    return loss_impl(model, refs_of(batch));
}

LossAndGradients backward(const CrossFusionModel& model, const std::vector<TrainExample>& batch, bool with_lambda) {
    return backward_impl(model, refs_of(batch), with_lambda);
}

void sgd_step(CrossFusionModel& model, const CrossFusionModel& gradients, double learning_rate, bool with_lambda) {
    std::vector<const double*> grads;
    gradients.for_each_tensor([&](const std::string&, const double* p, std::size_t) { grads.push_back(p); });
    std::size_t t = 0;
    model.for_each_tensor([&](const std::string&, double* p, std::size_t n) {
        const double* gp = grads[t++];
        for (std::size_t i = 0; i < n; ++i) p[i] -= learning_rate * gp[i];
    });
    if (with_lambda) model.lambda = std::max(0.0, model.lambda - learning_rate * gradients.lambda);
}

TrainResult train(CrossFusionModel& model, const std::vector<TrainExample>& examples, const TrainConfig& config) {
    if (examples.empty()) throw Error(ErrorCode::kEmptyBatch, "no training examples");
    if (config.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be positive");
    if (!(config.learning_rate >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be >= 0");
    model.validate();

    const auto all = refs_of(examples);
    TrainResult result;
    result.loss_curve.push_back(loss_impl(model, all));
    if (!std::isfinite(result.loss_curve.back())) {
        throw Error(ErrorCode::kDivergenceDetected, "non-finite loss before epoch 1");
    }

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            ExampleRefs batch;
            for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
                batch.push_back(&examples[order[i]]);
            }
            auto step = backward_impl(model, batch, config.optimize_lambda);
            if (!std::isfinite(step.loss)) {
                throw Error(ErrorCode::kDivergenceDetected, "non-finite loss in epoch " + std::to_string(epoch));
            }
            sgd_step(model, step.gradients, config.learning_rate, config.optimize_lambda);
        }
        double epoch_loss = loss_impl(model, all);
        if (!std::isfinite(epoch_loss)) {
            throw Error(ErrorCode::kDivergenceDetected, "non-finite loss after epoch " + std::to_string(epoch));
        }
        result.loss_curve.push_back(epoch_loss);
    }
    return result;
}

std::vector<TrainExample> make_training_examples(const Benchmark& bench, const IndexedPool& pool,
                                                 const EmbeddingProvider& provider, const TrainConfig& config,
                                                 std::size_t candidate_pool_size) {
    if (!pool.ready()) throw Error(ErrorCode::kIndexNotReady, "pool is not indexed");
    if (bench.max_grade <= 0) throw Error(ErrorCode::kGradeOutOfRange, "max_grade must be positive");
    const auto qrels = bench.qrels_by_query();
    std::mt19937_64 rng(config.seed);
    std::vector<TrainExample> out;

    for (const auto& bq : bench.queries) {
        if (!bq.spec.has_condition()) continue;
        auto query = embed_query(bq.spec, provider);
        auto it = qrels.find(bq.id);
        std::map<std::string, int> labels = it == qrels.end() ? std::map<std::string, int>{} : it->second;

        std::vector<std::string> chosen;
        std::vector<std::string> labeled_neg;  // judged irrelevant, taken first
        for (const auto& [tid, grade] : labels) {
            if (!pool.pool().tables.count(tid)) {
                throw Error(ErrorCode::kUnknownTable, "qrel for '" + bq.id + "' names unknown table '" + tid + "'");
            }
            (grade > 0 ? chosen : labeled_neg).push_back(tid);
        }
        std::set<std::string> retrieved;
        for (const auto& hit : pool.index().search(query.vector, candidate_pool_size)) {
            if (!labels.count(hit.table_id)) retrieved.insert(hit.table_id);
        }
        std::vector<std::string> neg(retrieved.begin(), retrieved.end());
        std::shuffle(labeled_neg.begin(), labeled_neg.end(), rng);
        std::shuffle(neg.begin(), neg.end(), rng);
        neg.insert(neg.begin(), labeled_neg.begin(), labeled_neg.end());
        if (neg.size() > config.negatives_per_query) neg.resize(config.negatives_per_query);
        chosen.insert(chosen.end(), neg.begin(), neg.end());
        if (chosen.empty()) continue;

        TrainExample ex;
        ex.query_id = bq.id;
        ex.condition = *query.condition;
        for (const auto& tid : chosen) {
            TrainCandidate c;
            c.table_id = tid;
            c.table = pool.shared_embedding(tid);
            c.rho_t = table_score(bq.spec.mode, query, *c.table).value_or(0.0);
            auto l = labels.find(tid);
            c.label = l == labels.end() ? 0.0 : static_cast<double>(l->second) / bench.max_grade;
            ex.candidates.push_back(std::move(c));
        }
        out.push_back(std::move(ex));
    }
    return out;
}

void save_checkpoint(const CrossFusionModel& model, const std::filesystem::path& path) {
    model.validate();
    detail::BinaryWriter w;
    w.u32(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u64(model.d);
    w.u64(model.d_h);
    w.u64(model.head.layers.size());
    for (const auto& l : model.head.layers) {
        w.u64(static_cast<std::uint64_t>(l.weight.rows()));
        w.u64(static_cast<std::uint64_t>(l.weight.cols()));
    }
    w.f64(model.lambda);
    model.for_each_tensor([&](const std::string&, const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) w.f64(p[i]);
    });
    w.write_to(path);
}

CrossFusionModel load_checkpoint(const std::filesystem::path& path) {
    auto r = detail::BinaryReader::from_file(path, ErrorCode::kCorruptCheckpoint);
    if (r.remaining() < 8 || r.u32() != kCheckpointMagic) r.fail("bad checkpoint magic");
    auto version = r.u32();
    if (version != kCheckpointVersion) {
        throw Error(ErrorCode::kCorruptCheckpoint, "unsupported checkpoint version " + std::to_string(version));
    }
    CrossFusionModel m;
    m.d = r.u64();
    m.d_h = r.u64();
    auto n_layers = r.u64();
    constexpr std::uint64_t kMaxDim = 1u << 20;
    if (m.d == 0 || m.d_h == 0 || m.d > kMaxDim || m.d_h > kMaxDim || n_layers == 0 || n_layers > 64) {
        r.fail("implausible checkpoint header");
    }
    const auto d4 = static_cast<Eigen::Index>(4 * m.d);
    const auto dh = static_cast<Eigen::Index>(m.d_h);
    m.interaction.W1.resize(dh, d4);
    m.interaction.b1.resize(dh);
    m.metadata.W2.resize(dh, d4);
    m.metadata.b2.resize(dh);
    for (std::uint64_t i = 0; i < n_layers; ++i) {
        auto rows = r.u64();
        auto cols = r.u64();
        if (rows == 0 || cols == 0 || rows > kMaxDim || cols > kMaxDim) r.fail("implausible head layer shape");
        DenseLayer l;
        l.weight.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        l.bias.resize(static_cast<Eigen::Index>(rows));
        m.head.layers.push_back(std::move(l));
    }
    m.lambda = r.f64();
    try {
        m.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::kCorruptCheckpoint, e.what());
    }
    if (r.remaining() != m.parameter_count() * 8) r.fail("parameter block size mismatch");
    m.for_each_tensor([&](const std::string&, double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) p[i] = r.f64();
    });
    return m;
}

}  // namespace tabscout
