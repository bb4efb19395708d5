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

#include "tabscout/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <unordered_set>

namespace tabscout {

namespace {

class Generator {
public:
    explicit Generator(std::uint64_t seed) : rng_(seed) {}

    std::size_t uniform(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

    /// Pronounceable pseudo-word, unique within this generator.
    std::string word() {
        static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                                  "br", "dr", "kr", "st", "tr"};
        static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
        for (;;) {
            std::string w;
            auto syllables = uniform(2, 3);
            for (std::size_t s = 0; s < syllables; ++s) {
                w += kOnsets[uniform(0, std::size(kOnsets) - 1)];
                w += kVowels[uniform(0, std::size(kVowels) - 1)];
            }
            if (used_.insert(w).second) return w;
        }
    }

    std::vector<std::string> words(std::size_t n) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(word());
        return out;
    }

    std::string table_id() {
        for (;;) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "t%08llx", static_cast<unsigned long long>(rng_() & 0xffffffffULL));
            if (used_.insert(buf).second) return buf;
        }
    }

    const std::string& pick(const std::vector<std::string>& v) { return v[uniform(0, v.size() - 1)]; }

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
    std::unordered_set<std::string> used_;
};

struct ColumnSpec {
    std::string name;
    std::vector<std::string> vocab;
};

ColumnSpec make_column(Generator& g, std::size_t vocab_size) { return {g.word(), g.words(vocab_size)}; }

ColumnSpec make_key_column(Generator& g, const std::string& domain, std::size_t vocab_size) {
    ColumnSpec c{domain + "_id", {}};
    for (std::size_t i = 0; i < vocab_size; ++i) c.vocab.push_back("k" + std::to_string(g.uniform(100000, 999999)));
    return c;
}

TableRecord make_table(Generator& g, std::string id, const std::vector<ColumnSpec>& cols, std::size_t rows,
                       TableMetadata meta, bool shuffle_columns) {
    TableRecord t;
    t.id = std::move(id);
    t.row_count = rows;
    t.metadata = std::move(meta);
    for (const auto& spec : cols) {
        ColumnData c;
        c.name = spec.name;
        for (std::size_t r = 0; r < rows; ++r) c.values.push_back(g.pick(spec.vocab));
        t.columns.push_back(std::move(c));
    }
    if (shuffle_columns) std::shuffle(t.columns.begin(), t.columns.end(), g.rng());
    return t;
}

// Conditions qualify a domain with attributes drawn from this shared list.
constexpr const char* kAttributes[] = {
    "annual",   "monthly",  "weekly",   "daily",     "regional", "national", "municipal", "global",
    "urban",    "rural",    "public",   "private",   "retail",   "wholesale", "clinical", "academic",
    "historic", "seasonal", "domestic", "overseas",  "coastal",  "northern", "southern",  "audited"};

/// Two distinct attributes, avoiding `exclude`.
std::pair<std::string, std::string> pick_attributes(Generator& g, const std::vector<std::string>& exclude = {}) {
    std::vector<std::string> pool;
    for (const char* a : kAttributes) {
        if (std::find(exclude.begin(), exclude.end(), a) == exclude.end()) pool.emplace_back(a);
    }
    std::shuffle(pool.begin(), pool.end(), g.rng());
    return {pool[0], pool[1]};
}

TableMetadata describe(const std::string& domain, const std::string& q1, const std::string& q2,
                       const std::string& filler) {
    return {domain + " " + q1 + " " + q2, "records of " + domain + " " + q1 + " " + q2 + " " + filler};
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& config) {
    Generator g(config.seed);
    SynthCorpus out;
    out.pool.pool_id = "synthetic";
    out.bench.max_grade = 1;

    for (std::size_t grp = 0; grp < config.groups; ++grp) {
        const std::string domain = g.word();
        const auto [q1, q2] = pick_attributes(g);
        const double draw = g.unit();
        QueryMode mode = QueryMode::kNlcUnion;
        if (draw < config.join_fraction) {
            mode = QueryMode::kNlcJoin;
        } else if (draw < config.join_fraction + config.nl_only_fraction) {
            mode = QueryMode::kNlOnly;
        }
        const bool join = mode == QueryMode::kNlcJoin;

        // Union groups share one schema; join groups share only the key column.
        std::vector<ColumnSpec> schema;
        if (join) schema.push_back(make_key_column(g, domain, 40));
        for (std::size_t c = 0, n = g.uniform(join ? 1 : 3, join ? 2 : 5); c < n; ++c) {
            schema.push_back(make_column(g, 30));
        }

        auto candidate_schema = [&] {
            if (!join) return schema;
            std::vector<ColumnSpec> s{schema.front()};
            for (std::size_t c = 0, n = g.uniform(2, 3); c < n; ++c) s.push_back(make_column(g, 30));
            return s;
        };

        BenchmarkQuery q;
        q.id = "q" + std::to_string(grp + 1);
        q.spec.mode = mode;
        q.spec.k = config.k;
        const char* verb = join ? "joinable " : (mode == QueryMode::kNlcUnion ? "unionable " : "");
        q.spec.condition = std::string("Find ") + verb + "tables containing " + domain + " with " + q1 + " " + q2;
        if (mode != QueryMode::kNlOnly) {
            q.spec.query_table = make_table(g, q.id, schema, config.rows, {}, false);
            if (join) q.spec.key_column = schema.front().name;
        }

        auto planted = make_table(g, g.table_id(), candidate_schema(), config.rows,
                                  describe(domain, q1, q2, g.word()), true);
        out.bench.qrels.push_back({q.id, planted.id, 1});
        out.pool.add(std::move(planted));
        for (std::size_t j = 0; j < config.distractors_per_group; ++j) {
            auto [a1, a2] = pick_attributes(g, {q1, q2});
            auto d = make_table(g, g.table_id(), candidate_schema(), config.rows, describe(domain, a1, a2, g.word()),
                                true);
            out.bench.qrels.push_back({q.id, d.id, 0});
            out.pool.add(std::move(d));
        }
        out.bench.queries.push_back(std::move(q));
    }

    for (std::size_t i = 0; i < config.noise_tables; ++i) {
        std::vector<ColumnSpec> schema;
        for (std::size_t c = 0, n = g.uniform(2, 5); c < n; ++c) schema.push_back(make_column(g, 30));
        auto domain = g.word();
        auto [a1, a2] = pick_attributes(g);
        out.pool.add(make_table(g, g.table_id(), schema, config.rows, describe(domain, a1, a2, g.word()), false));
    }
    return out;
}

}  // namespace tabscout
