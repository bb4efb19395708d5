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

#include "tabscout/nlc_model.hpp"

#include <cmath>
#include <random>

#include "tabscout/error.hpp"

namespace tabscout {

namespace {

void require_dim(const Vector& v, std::size_t d, const char* what) {
    if (static_cast<std::size_t>(v.size()) != d) {
        throw Error(ErrorCode::kDimMismatch,
                    std::string(what) + " has dim " + std::to_string(v.size()) + ", expected " + std::to_string(d));
    }
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
    if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
        throw Error(ErrorCode::kDimMismatch, what + " is " + std::to_string(m.rows()) + "x" +
                                                 std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                                                 "x" + std::to_string(cols));
    }
}

void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

void fill_uniform(Vector& v, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
}

}  // namespace

double FusionHead::forward(const Vector& input) const {
    Vector a = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Vector z = layers[i].weight * a + layers[i].bias;
        a = (i + 1 == layers.size()) ? z : Vector(z.array().tanh());
    }
    return a(0);
}

CrossFusionModel CrossFusionModel::init(const ModelShape& shape, std::uint64_t seed) {
    if (shape.d == 0 || shape.d_h == 0) throw Error(ErrorCode::kInvalidArgument, "model dims must be positive");
    std::mt19937_64 rng(seed);
    CrossFusionModel m;
    m.d = shape.d;
    m.d_h = shape.d_h;
    const auto d4 = static_cast<Eigen::Index>(4 * shape.d);
    const auto dh = static_cast<Eigen::Index>(shape.d_h);
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(d4));

    m.interaction.W1.resize(dh, d4);
    m.interaction.b1.resize(dh);
    fill_uniform(m.interaction.W1, in_bound, rng);
    fill_uniform(m.interaction.b1, in_bound, rng);
    m.metadata.W2.resize(dh, d4);
    m.metadata.b2.resize(dh);
    fill_uniform(m.metadata.W2, in_bound, rng);
    fill_uniform(m.metadata.b2, in_bound, rng);

    auto fan_in = static_cast<Eigen::Index>(2 * shape.d_h);
    std::vector<std::size_t> widths = shape.head_hidden;
    widths.push_back(1);
    for (auto w : widths) {
        DenseLayer layer;
        layer.weight.resize(static_cast<Eigen::Index>(w), fan_in);
        layer.bias.resize(static_cast<Eigen::Index>(w));
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        fill_uniform(layer.weight, bound, rng);
        fill_uniform(layer.bias, bound, rng);
        m.head.layers.push_back(std::move(layer));
        fan_in = static_cast<Eigen::Index>(w);
    }
    m.lambda = 1.0;
    return m;
}

CrossFusionModel CrossFusionModel::zeros_like() const {
    CrossFusionModel z = *this;
    z.for_each_tensor([](const std::string&, double* p, std::size_t n) { std::fill(p, p + n, 0.0); });
    z.lambda = 0.0;
    return z;
}

void CrossFusionModel::validate() const {
    if (d == 0 || d_h == 0) throw Error(ErrorCode::kDimMismatch, "model dims must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
    require_shape(interaction.W1, d_h, 4 * d, "W1");
    require_dim(interaction.b1, d_h, "b1");
    require_shape(metadata.W2, d_h, 4 * d, "W2");
    require_dim(metadata.b2, d_h, "b2");
    if (head.layers.empty()) throw Error(ErrorCode::kDimMismatch, "fusion head has no layers");
    std::size_t fan_in = 2 * d_h;
    for (std::size_t i = 0; i < head.layers.size(); ++i) {
        const auto& l = head.layers[i];
        auto out = static_cast<std::size_t>(l.weight.rows());
        require_shape(l.weight, out, fan_in, "head layer " + std::to_string(i) + " weight");
        require_dim(l.bias, out, "head layer bias");
        fan_in = out;
    }
    if (fan_in != 1) throw Error(ErrorCode::kDimMismatch, "fusion head must end in a scalar");
}

void CrossFusionModel::for_each_tensor(const std::function<void(const std::string&, double*, std::size_t)>& fn) {
    auto visit = [&](const std::string& name, auto& t) { fn(name, t.data(), static_cast<std::size_t>(t.size())); };
    visit("W1", interaction.W1);
    visit("b1", interaction.b1);
    visit("W2", metadata.W2);
    visit("b2", metadata.b2);
    for (std::size_t i = 0; i < head.layers.size(); ++i) {
        visit("head" + std::to_string(i) + ".weight", head.layers[i].weight);
        visit("head" + std::to_string(i) + ".bias", head.layers[i].bias);
    }
}

void CrossFusionModel::for_each_tensor(
    const std::function<void(const std::string&, const double*, std::size_t)>& fn) const {
    const_cast<CrossFusionModel*>(this)->for_each_tensor(
        [&](const std::string& name, double* p, std::size_t n) { fn(name, p, n); });
}

std::size_t CrossFusionModel::parameter_count() const {
    std::size_t total = 0;
    for_each_tensor([&](const std::string&, const double*, std::size_t n) { total += n; });
    return total;
}

Vector interaction_features(const Vector& t, const Vector& c) {
    if (t.size() != c.size()) {
        throw Error(ErrorCode::kDimMismatch,
                    "interaction of dims " + std::to_string(t.size()) + " and " + std::to_string(c.size()));
    }
    const auto d = t.size();
    Vector out(4 * d);
    out.segment(0, d) = t;
    out.segment(d, d) = c;
    out.segment(2 * d, d) = t - c;
    out.segment(3 * d, d) = t.cwiseProduct(c);
    return out;
}

Vector hidden(const InteractionLayer& layer, const Vector& x) {
    if (layer.W1.cols() != x.size() || layer.W1.rows() != layer.b1.size()) {
        throw Error(ErrorCode::kDimMismatch, "interaction layer does not fit input of dim " + std::to_string(x.size()));
    }
    return (layer.W1 * x + layer.b1).array().tanh();
}

Vector max_pool(const std::vector<Vector>& vectors) {
    if (vectors.empty()) throw Error(ErrorCode::kEmptyPool, "max_pool over no vectors");
    Vector out = vectors.front();
    for (std::size_t i = 1; i < vectors.size(); ++i) {
        if (vectors[i].size() != out.size()) throw Error(ErrorCode::kDimMismatch, "max_pool over unequal dims");
        out = out.cwiseMax(vectors[i]);
    }
    return out;
}

CandidateTrace trace_candidate(const CrossFusionModel& model, const std::vector<Vector>& candidate_columns,
                               const Vector& metadata_embedding, const Vector& condition) {
    if (candidate_columns.empty()) throw Error(ErrorCode::kEmptyCandidate, "candidate has no columns");
    const auto d = static_cast<Eigen::Index>(model.d);
    const auto dh = static_cast<Eigen::Index>(model.d_h);
    require_dim(condition, model.d, "condition embedding");
    require_dim(metadata_embedding, model.d, "metadata embedding");
    model.validate();

    CandidateTrace tr;
    const auto m = static_cast<Eigen::Index>(candidate_columns.size());
    tr.features.resize(4 * d, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& a = candidate_columns[static_cast<std::size_t>(j)];
        require_dim(a, model.d, "column embedding");
        tr.features.block(0, j, d, 1) = a;
        tr.features.block(d, j, d, 1) = condition;
        tr.features.block(2 * d, j, d, 1) = a - condition;
        tr.features.block(3 * d, j, d, 1) = a.cwiseProduct(condition);
    }
    tr.column_hidden.noalias() = model.interaction.W1 * tr.features;
    tr.column_hidden.colwise() += model.interaction.b1;
    tr.column_hidden = tr.column_hidden.array().tanh();

    tr.h_ct.resize(dh);
    tr.argmax.assign(static_cast<std::size_t>(dh), 0);
    for (Eigen::Index r = 0; r < dh; ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < m; ++j) {
            if (tr.column_hidden(r, j) > tr.column_hidden(r, best)) best = j;
        }
        tr.argmax[static_cast<std::size_t>(r)] = best;
        tr.h_ct[r] = tr.column_hidden(r, best);
    }

    tr.metadata_features = interaction_features(metadata_embedding, condition);
    tr.h_cm = (model.metadata.W2 * tr.metadata_features + model.metadata.b2).array().tanh();

    Vector a(2 * dh);
    a << tr.h_ct, tr.h_cm;
    tr.head_activations.push_back(a);
    const auto& layers = model.head.layers;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Vector z = layers[i].weight * a + layers[i].bias;
        a = (i + 1 == layers.size()) ? z : Vector(z.array().tanh());
        tr.head_activations.push_back(a);
    }
    tr.value = a(0);
    return tr;
}

Vector condition_table_vector(const CrossFusionModel& model, const std::vector<Vector>& candidate_columns,
                              const Vector& condition) {
    if (candidate_columns.empty()) throw Error(ErrorCode::kEmptyCandidate, "candidate has no columns");
    require_dim(condition, model.d, "condition embedding");
    std::vector<Vector> per_column;
    per_column.reserve(candidate_columns.size());
    for (const auto& a : candidate_columns) {
        require_dim(a, model.d, "column embedding");
        per_column.push_back(hidden(model.interaction, interaction_features(a, condition)));
    }
    return max_pool(per_column);
}

Vector condition_metadata_vector(const CrossFusionModel& model, const Vector& metadata_embedding,
                                 const Vector& condition) {
    require_dim(condition, model.d, "condition embedding");
    require_dim(metadata_embedding, model.d, "metadata embedding");
    const auto& layer = model.metadata;
    if (layer.W2.cols() != static_cast<Eigen::Index>(4 * model.d) || layer.W2.rows() != layer.b2.size()) {
        throw Error(ErrorCode::kDimMismatch, "metadata layer shape mismatch");
    }
    return (layer.W2 * interaction_features(metadata_embedding, condition) + layer.b2).array().tanh();
}

ConditionScore condition_score(const CrossFusionModel& model, const std::vector<Vector>& candidate_columns,
                               const Vector& metadata_embedding, const Vector& condition) {
    auto tr = trace_candidate(model, candidate_columns, metadata_embedding, condition);
    return {tr.value, std::move(tr.h_ct), std::move(tr.h_cm)};
}

}  // namespace tabscout
