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

#include "tabscout/engine.hpp"
#include "tabscout/error.hpp"
#include "tabscout/synth.hpp"
#include "tabscout/trainer.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

#include <fstream>

#include <doctest.h>

using namespace tabscout;
using namespace tabscout::testing;

namespace {

CrossFusionModel small_model(std::uint64_t seed, std::size_t d = 4, std::size_t dh = 6) {
    return CrossFusionModel::init({d, dh, {5}}, seed);
}

std::vector<double> flatten(const CrossFusionModel& m) {
    std::vector<double> out;
    m.for_each_tensor([&](const std::string&, const double* p, std::size_t n) { out.insert(out.end(), p, p + n); });
    out.push_back(m.lambda);
    return out;
}

// Model whose head is the single linear layer (w, b) over [h_ct; h_cm].
CrossFusionModel linear_head_model(std::size_t d, std::size_t dh, double bias) {
    auto m = CrossFusionModel::init({d, dh, {}}, 1);
    m.head.layers[0].weight.setZero();
    m.head.layers[0].bias.setConstant(bias);
    return m;
}

}  // namespace

TEST_CASE("loss worked examples") {
    std::mt19937_64 rng(1);
    auto batch = random_examples(rng, 4, 1);
    batch[0].candidates.resize(1);
    auto& c = batch[0].candidates[0];

    auto m = linear_head_model(4, 3, 0.5);
    m.lambda = 0.0;
    c.label = 1.0;
    CHECK(loss(m, batch) == doctest::Approx(0.25).epsilon(1e-15));

    // prediction + lambda * rho_t hits the label exactly
    m.lambda = 1.0;
    c.rho_t = 0.3;
    c.label = 0.8;
    CHECK(loss(m, batch) == doctest::Approx(0.0).epsilon(1e-15));
    auto g = backward(m, batch, true);
    CHECK(g.loss == doctest::Approx(0.0));
    g.gradients.for_each_tensor([](const std::string& name, const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) CHECK_MESSAGE(p[i] == doctest::Approx(0.0), name);
    });
    CHECK(g.gradients.lambda == doctest::Approx(0.0));

    CHECK_THROWS_WITH(loss(m, {}), doctest::Contains("EmptyBatch"));
}

TEST_CASE("batch loss is the mean of per-query losses") {
    std::mt19937_64 rng(2);
    auto batch = random_examples(rng, 4, 5);
    auto m = small_model(3);
    double sum = 0.0;
    for (const auto& ex : batch) sum += loss(m, {ex});
    CHECK(loss(m, batch) == doctest::Approx(sum / 5.0).epsilon(1e-13));
    CHECK(backward(m, batch).loss == doctest::Approx(loss(m, batch)).epsilon(1e-13));
}

TEST_CASE("lambda gradient follows the chain rule") {
    std::mt19937_64 rng(3);
    auto batch = random_examples(rng, 4, 3);
    auto m = small_model(4);
    m.lambda = 0.7;
    double expect = 0.0;
    for (const auto& ex : batch) {
        for (const auto& c : ex.candidates) {
            double s = condition_score(m, c.table->columns, c.table->metadata, ex.condition).value;
            expect += 2.0 * (s + m.lambda * c.rho_t - c.label) * c.rho_t /
                      (static_cast<double>(batch.size()) * static_cast<double>(ex.candidates.size()));
        }
    }
    CHECK(backward(m, batch, true).gradients.lambda == doctest::Approx(expect).epsilon(1e-12));
    CHECK(backward(m, batch, false).gradients.lambda == 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        auto m = small_model(100 + trial);
        m.lambda = 0.5 + 0.1 * trial;
        auto batch = random_examples(rng, 4, 1 + rng() % 3);
        CHECK(max_gradient_error(m, batch, true) < 1e-4);
    }
    // deeper head
    auto deep = CrossFusionModel::init({3, 4, {5, 3}}, 7);
    auto batch = random_examples(rng, 3, 2);
    CHECK(max_gradient_error(deep, batch, true) < 1e-4);
}

TEST_CASE("a tiny step never increases a single example's loss") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto m = small_model(200 + trial);
        auto batch = random_examples(rng, 4, 1);
        double before = loss(m, batch);
        auto g = backward(m, batch, true);
        sgd_step(m, g.gradients, 1e-6, true);
        CHECK(loss(m, batch) <= before);
    }
}

TEST_CASE("train: learning rate zero, determinism, divergence") {
    std::mt19937_64 rng(6);
    auto examples = random_examples(rng, 4, 12);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 9;

    auto frozen = small_model(1);
    cfg.learning_rate = 0.0;
    auto r0 = train(frozen, examples, cfg);
    CHECK(flatten(frozen) == flatten(small_model(1)));
    for (double l : r0.loss_curve) CHECK(l == r0.loss_curve.front());
    CHECK(r0.loss_curve.size() == 4);

    cfg.learning_rate = 0.05;
    auto a = small_model(1), b = small_model(1);
    auto ra = train(a, examples, cfg), rb = train(b, examples, cfg);
    CHECK(ra.loss_curve == rb.loss_curve);
    CHECK(flatten(a) == flatten(b));

    auto wild = small_model(1);
    cfg.learning_rate = 1e200;
    CHECK_THROWS_WITH(train(wild, examples, cfg), doctest::Contains("DivergenceDetected"));
    CHECK_THROWS_WITH(train(wild, {}, cfg), doctest::Contains("EmptyBatch"));
}

TEST_CASE("optimizing lambda keeps it non-negative") {
    std::mt19937_64 rng(7);
    auto examples = random_examples(rng, 4, 6);
    for (auto& ex : examples)
        for (auto& c : ex.candidates) c.label = 0.0;  // pushes lambda down
    auto m = linear_head_model(4, 6, 1.0);  // residuals start positive
    m.lambda = 0.05;
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 20;
    cfg.optimize_lambda = true;
    train(m, examples, cfg);
    CHECK(m.lambda >= 0.0);
    CHECK(m.lambda < 0.05);
}

TEST_CASE("checkpoint round trip") {
    TempDir dir("ckpt");
    auto m = CrossFusionModel::init({6, 5, {4, 3}}, 11);
    m.lambda = 0.625;
    save_checkpoint(m, dir / "m.bin");
    auto back = load_checkpoint(dir / "m.bin");
    CHECK(flatten(back) == flatten(m));
    CHECK(back.d == 6);
    CHECK(back.d_h == 5);
    std::mt19937_64 rng(12);
    for (int i = 0; i < 100; ++i) {
        std::vector<Vector> cols{random_vector(rng, 6), random_vector(rng, 6)};
        Vector meta = random_vector(rng, 6), cond = random_vector(rng, 6);
        CHECK(condition_score(back, cols, meta, cond).value == condition_score(m, cols, meta, cond).value);
    }

    SUBCASE("truncated") {
        std::filesystem::resize_file(dir / "m.bin", std::filesystem::file_size(dir / "m.bin") - 9);
        CHECK_THROWS_WITH(load_checkpoint(dir / "m.bin"), doctest::Contains("CorruptCheckpoint"));
    }
    SUBCASE("trailing bytes") {
        std::ofstream(dir / "m.bin", std::ios::app | std::ios::binary) << "xx";
        CHECK_THROWS_WITH(load_checkpoint(dir / "m.bin"), doctest::Contains("CorruptCheckpoint"));
    }
    SUBCASE("wrong magic") {
        write_text(dir / "m.bin", "definitely not a checkpoint file");
        CHECK_THROWS_WITH(load_checkpoint(dir / "m.bin"), doctest::Contains("CorruptCheckpoint"));
    }
}

TEST_CASE("training examples from a benchmark") {
    SynthConfig sc;
    sc.groups = 6;
    sc.noise_tables = 10;
    auto corpus = generate_corpus(sc);
    HashingProvider provider({});
    IndexedPool pool(corpus.pool);
    pool.build_index(provider, {});
    TrainConfig cfg;
    cfg.negatives_per_query = 5;
    cfg.seed = 3;
    auto ex = make_training_examples(corpus.bench, pool, provider, cfg);
    REQUIRE(ex.size() == 6);
    auto qrels = corpus.bench.qrels_by_query();
    for (const auto& e : ex) {
        CHECK(e.candidates.size() == 1 + 5);
        std::size_t positives = 0, labeled_negatives = 0;
        for (const auto& c : e.candidates) {
            CHECK(c.label >= 0.0);
            CHECK(c.label <= 1.0);
            CHECK(c.rho_t >= 0.0);
            CHECK(c.rho_t <= 1.0 + 1e-12);
            auto it = qrels[e.query_id].find(c.table_id);
            if (it != qrels[e.query_id].end()) (it->second > 0 ? positives : labeled_negatives)++;
        }
        CHECK(positives == 1);
        CHECK(labeled_negatives == sc.distractors_per_group);
    }
    auto again = make_training_examples(corpus.bench, pool, provider, cfg);
    for (std::size_t i = 0; i < ex.size(); ++i) {
        for (std::size_t k = 0; k < ex[i].candidates.size(); ++k) {
            CHECK(ex[i].candidates[k].table_id == again[i].candidates[k].table_id);
        }
    }
}

TEST_CASE("fifty epochs on a small synthetic set lower the loss") {
    SynthConfig sc;
    sc.groups = 20;
    sc.noise_tables = 20;
    sc.seed = 21;
    auto corpus = generate_corpus(sc);
    HashingProvider provider({});
    IndexedPool pool(corpus.pool);
    pool.build_index(provider, {});
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 1;
    cfg.negatives_per_query = 16;
    cfg.epochs = 50;
    cfg.seed = 1;
    auto examples = make_training_examples(corpus.bench, pool, provider, cfg);
    REQUIRE(examples.size() == 20);
    auto model = CrossFusionModel::init({provider.dim(), 32, {64}}, 0);
    auto result = train(model, examples, cfg);
    MESSAGE("loss " << result.loss_curve.front() << " -> " << result.loss_curve.back());
    CHECK(result.loss_curve.back() < 0.75 * result.loss_curve.front());
}
