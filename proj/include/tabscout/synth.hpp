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

#include "tabscout/table.hpp"

namespace tabscout {

/// Planted-relevance corpus: each query group owns a query table, one planted
/// table that is unionable/joinable with it and whose metadata matches the
/// condition, and distractors that are equally unionable/joinable but carry
/// unrelated metadata. Noise tables fill the rest of the pool.
struct SynthConfig {
    std::size_t groups = 100;
    std::size_t distractors_per_group = 3;
    std::size_t noise_tables = 100;
    std::size_t rows = 20;
    double join_fraction = 0.5;     // of groups, nlc_join instead of nlc_union
    double nl_only_fraction = 0.0;  // of groups, query issued without its table
    std::size_t k = 10;
    std::uint64_t seed = 7;
};

struct SynthCorpus {
    TablePool pool;
    Benchmark bench;  // planted table grade 1, distractors grade 0
};

/// Pool size is groups * (1 + distractors_per_group) + noise_tables.
SynthCorpus generate_corpus(const SynthConfig& config);

}  // namespace tabscout
