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
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tabscout/embedding.hpp"

namespace tabscout {

using Matrix = Eigen::MatrixXd;

struct DenseLayer {
    Matrix weight;
    Vector bias;
};

/// Condition-table interaction: h = tanh(W1 x + b1) over 4d interaction features.
struct InteractionLayer {
    Matrix W1;
    Vector b1;
};

/// Condition-metadata branch, same shape discipline as InteractionLayer.
struct MetadataLayer {
    Matrix W2;
    Vector b2;
};

/// MLP over [h_ct; h_cm]: tanh on hidden layers, linear scalar output.
struct FusionHead {
    std::vector<DenseLayer> layers;

    double forward(const Vector& input) const;
};

struct ModelShape {
    std::size_t d = 256;
    std::size_t d_h = 128;
    std::vector<std::size_t> head_hidden{64};
};

/// Learned parameters of the cross-fusion scorer plus the fusion weight lambda.
/// The same type doubles as the gradient container during training.
struct CrossFusionModel {
    InteractionLayer interaction;
    MetadataLayer metadata;
    FusionHead head;
    double lambda = 1.0;
    std::size_t d = 0;
    std::size_t d_h = 0;

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, seeded.
    static CrossFusionModel init(const ModelShape& shape, std::uint64_t seed);
    /// Same shapes, all parameters zero (lambda included).
    CrossFusionModel zeros_like() const;

    /// Throws DimMismatch unless every shape chains.
    void validate() const;

    /// Parameter tensors in declaration order: W1, b1, W2, b2, head W/b pairs.
    void for_each_tensor(const std::function<void(const std::string&, double*, std::size_t)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const double*, std::size_t)>& fn) const;
    std::size_t parameter_count() const;
};

/// concat(t, c, t - c, t * c).
Vector interaction_features(const Vector& t, const Vector& c);

Vector hidden(const InteractionLayer& layer, const Vector& x);

/// Componentwise maximum of a non-empty list.
Vector max_pool(const std::vector<Vector>& vectors);

/// Max over the candidate's columns of tanh(W1 interaction(a_j, c) + b1).
Vector condition_table_vector(const CrossFusionModel& model, const std::vector<Vector>& candidate_columns,
                              const Vector& condition);

Vector condition_metadata_vector(const CrossFusionModel& model, const Vector& metadata_embedding,
                                 const Vector& condition);

struct ConditionScore {
    double value = 0.0;
    Vector h_ct;
    Vector h_cm;
};

ConditionScore condition_score(const CrossFusionModel& model, const std::vector<Vector>& candidate_columns,
                               const Vector& metadata_embedding, const Vector& condition);

/// Intermediate values of one candidate's forward pass, kept for backprop.
struct CandidateTrace {
    Matrix features;                     // 4d x m, one column per candidate column
    Matrix column_hidden;                // d_h x m
    std::vector<Eigen::Index> argmax;    // d_h, winning column per component
    Vector h_ct;
    Vector metadata_features;            // 4d
    Vector h_cm;
    std::vector<Vector> head_activations;  // input, then each layer's output
    double value = 0.0;
};

CandidateTrace trace_candidate(const CrossFusionModel& model, const std::vector<Vector>& candidate_columns,
                               const Vector& metadata_embedding, const Vector& condition);

}  // namespace tabscout
