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

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "tabscout/engine.hpp"
#include "tabscout/error.hpp"
#include "tabscout/evalkit.hpp"
#include "tabscout/service.hpp"
#include "tabscout/synth.hpp"
#include "tabscout/trainer.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace fs = std::filesystem;
using namespace tabscout;

namespace {

struct ProviderFlags {
    std::string kind = "hashing";
    std::size_t dim = 256;
    std::size_t max_cells = 64;
    std::uint64_t seed = 0;
    std::string endpoint;

    void attach(CLI::App* cmd) {
        cmd->add_option("--provider", kind, "hashing or remote")
            ->check(CLI::IsMember({"hashing", "remote"}))
            ->envname("TABSCOUT_PROVIDER")
            ->capture_default_str();
        cmd->add_option("--dim", dim, "embedding dimension")->capture_default_str();
        cmd->add_option("--max-cells", max_cells, "distinct cells serialized per column")->capture_default_str();
        cmd->add_option("--embed-seed", seed, "hashing provider seed")->capture_default_str();
        cmd->add_option("--embed-endpoint", endpoint, "remote encoder base URL")->envname("TABSCOUT_EMBED_ENDPOINT");
    }

    EmbeddingProviderConfig config() const {
        EmbeddingProviderConfig c;
        c.kind = kind == "remote" ? ProviderKind::kRemote : ProviderKind::kHashing;
        c.dim = dim;
        c.max_cells_per_column = max_cells;
        c.seed = seed;
        c.endpoint = endpoint;
        return c;
    }
};

fs::path bundle_dir(const fs::path& pool, const std::string& override_dir) {
    return override_dir.empty() ? pool / ".tabscout" : fs::path(override_dir);
}

CrossFusionModel load_or_init_model(const std::string& path, const fs::path& bundle, std::size_t d) {
    fs::path p = path.empty() ? bundle / "model.bin" : fs::path(path);
    if (fs::exists(p)) return load_checkpoint(p);
    if (!path.empty()) throw Error(ErrorCode::kNotFound, "no checkpoint at " + p.string());
    std::cerr << "note: no trained model found; condition scores come from an untrained model\n";
    ModelShape shape;
    shape.d = d;
    return CrossFusionModel::init(shape, 0);
}

std::string fmt(std::optional<double> v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

void print_ranking(const std::vector<ScoredTable>& results, const TablePool& pool) {
    std::printf("%-4s  %-24s  %9s  %9s  %9s  %-14s  %s\n", "rank", "table", "rho", "rho_t", "rho_c", "join_column",
                "caption");
    std::size_t rank = 1;
    for (const auto& r : results) {
        std::printf("%-4zu  %-24s  %9s  %9s  %9s  %-14s  %s\n", rank++, r.table_id.c_str(), fmt(r.rho).c_str(),
                    fmt(r.rho_t).c_str(), fmt(r.rho_c).c_str(), r.join_column.value_or("-").c_str(),
                    pool.at(r.table_id).metadata.caption.c_str());
    }
}

IndexedPool open_index(const fs::path& pool_dir, const std::string& index_dir, const EmbeddingProviderConfig& pc) {
    return load_index_bundle(load_pool(pool_dir), pc, bundle_dir(pool_dir, index_dir));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabscout: table discovery with natural-language conditions"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a directory of CSV tables and copy it into a pool");
    std::string ingest_src, ingest_out;
    ingest->add_option("--src", ingest_src, "directory of <id>.csv and optional <id>.meta.json")->required();
    ingest->add_option("--pool", ingest_out, "output pool directory (omit to only validate)");

    // index
    auto* index = app.add_subcommand("index", "embed a pool and build its ANN index");
    std::string index_pool, index_out;
    HnswParams hnsw;
    ProviderFlags index_provider;
    index->add_option("--pool", index_pool, "pool directory")->required();
    index->add_option("--out", index_out, "bundle directory (default <pool>/.tabscout)");
    index->add_option("--M", hnsw.M, "graph degree")->capture_default_str();
    index->add_option("--ef-construction", hnsw.ef_construction)->capture_default_str();
    index->add_option("--ef-search", hnsw.ef_search)->capture_default_str();
    index->add_option("--seed", hnsw.seed, "level assignment seed")->capture_default_str();
    index_provider.attach(index);

    // search
    auto* search = app.add_subcommand("search", "rank pool tables for a query");
    std::string search_pool, search_index, search_mode = "nl_only", search_table, search_condition, search_key,
                                           search_model;
    EngineConfig engine;
    std::optional<double> search_lambda;
    ProviderFlags search_provider;
    search->add_option("--pool", search_pool)->required();
    search->add_option("--index", search_index, "bundle directory (default <pool>/.tabscout)");
    search->add_option("--mode", search_mode)->check(CLI::IsMember({"nl_only", "nlc_union", "nlc_join"}));
    search->add_option("--table", search_table, "query table CSV");
    search->add_option("--condition", search_condition, "natural-language condition");
    search->add_option("--key", search_key, "join key column of the query table");
    search->add_option("--k", engine.k)->capture_default_str();
    search->add_option("--lambda", search_lambda, "weight of the table score (default: the model's)");
    search->add_option("--n-candidates", engine.candidate_pool_size)->capture_default_str();
    search->add_option("--model", search_model, "checkpoint (default <index>/model.bin)");
    search_provider.attach(search);

    // train
    auto* train_cmd = app.add_subcommand("train", "fit the condition scorer on a labeled benchmark");
    std::string train_pool, train_index, train_bench, train_out, train_init;
    TrainConfig tc;
    ModelShape shape;
    std::uint64_t init_seed = 0;
    ProviderFlags train_provider;
    train_cmd->add_option("--pool", train_pool)->required();
    train_cmd->add_option("--index", train_index, "bundle directory (default <pool>/.tabscout)");
    train_cmd->add_option("--benchmark", train_bench)->required();
    train_cmd->add_option("--out", train_out, "checkpoint path (default <index>/model.bin)");
    train_cmd->add_option("--init", train_init, "start from this checkpoint");
    train_cmd->add_option("--epochs", tc.epochs)->capture_default_str();
    train_cmd->add_option("--lr", tc.learning_rate)->capture_default_str();
    train_cmd->add_option("--batch-size", tc.batch_size)->capture_default_str();
    train_cmd->add_option("--negatives", tc.negatives_per_query)->capture_default_str();
    train_cmd->add_option("--seed", tc.seed)->capture_default_str();
    train_cmd->add_flag("--optimize-lambda", tc.optimize_lambda);
    train_cmd->add_option("--hidden", shape.d_h, "interaction width")->capture_default_str();
    train_cmd->add_option("--init-seed", init_seed)->capture_default_str();
    train_provider.attach(train_cmd);

    // eval
    auto* eval = app.add_subcommand("eval", "NDCG and latency over a benchmark");
    std::string eval_pool, eval_index, eval_bench, eval_model, eval_json;
    EngineConfig eval_engine;
    std::optional<double> eval_lambda;
    ProviderFlags eval_provider;
    eval->add_option("--pool", eval_pool, "pool directory (default: the benchmark manifest's)");
    eval->add_option("--index", eval_index);
    eval->add_option("--benchmark", eval_bench)->required();
    eval->add_option("--model", eval_model);
    eval->add_option("--lambda", eval_lambda);
    eval->add_option("--n-candidates", eval_engine.candidate_pool_size)->capture_default_str();
    eval->add_option("--json", eval_json, "also write the result as JSON");
    eval_provider.attach(eval);

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP API");
    std::string host = "0.0.0.0";
    int port = 8080;
    ServiceOptions sopt;
    ProviderFlags serve_provider;
    std::string llm_endpoint, llm_key, llm_model = "gpt-4o", serve_model;
    std::vector<std::string> preload;
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->envname("TABSCOUT_PORT")->capture_default_str();
    serve->add_option("--model", serve_model, "checkpoint for the condition scorer");
    serve->add_option("--llm-endpoint", llm_endpoint)->envname("TABSCOUT_LLM_ENDPOINT");
    serve->add_option("--llm-key", llm_key)->envname("TABSCOUT_LLM_KEY");
    serve->add_option("--llm-model", llm_model)->envname("TABSCOUT_LLM_MODEL")->capture_default_str();
    serve->add_option("--load", preload, "pool directories to register and index at startup");
    serve_provider.attach(serve);

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic pool and labeled benchmark");
    std::string synth_out;
    SynthConfig sc;
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--groups", sc.groups)->capture_default_str();
    synth->add_option("--distractors", sc.distractors_per_group)->capture_default_str();
    synth->add_option("--noise", sc.noise_tables)->capture_default_str();
    synth->add_option("--rows", sc.rows)->capture_default_str();
    synth->add_option("--join-fraction", sc.join_fraction)->capture_default_str();
    synth->add_option("--nl-only-fraction", sc.nl_only_fraction)->capture_default_str();
    synth->add_option("--seed", sc.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*ingest) {
            auto pool = load_pool(ingest_src);
            std::size_t rows = 0;
            for (const auto& [id, t] : pool.tables) rows += t.row_count;
            if (!ingest_out.empty()) write_pool(pool, ingest_out);
            std::printf("%zu tables, %zu rows%s\n", pool.size(), rows,
                        ingest_out.empty() ? "" : (" written to " + ingest_out).c_str());
        } else if (*index) {
            auto pc = index_provider.config();
            auto provider = make_provider(pc);
            IndexedPool ip(load_pool(index_pool));
            auto start = std::chrono::steady_clock::now();
            ip.build_index(*provider, hnsw);
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            auto dir = bundle_dir(index_pool, index_out);
            save_index_bundle(ip, pc, dir);
            std::printf("indexed %zu tables (dim %zu) in %.2fs -> %s\n", ip.pool().size(), ip.embedding_dim(), secs,
                        dir.string().c_str());
        } else if (*search) {
            auto pc = search_provider.config();
            auto provider = make_provider(pc);
            auto ip = open_index(search_pool, search_index, pc);
            auto model = load_or_init_model(search_model, bundle_dir(search_pool, search_index), provider->dim());
            QuerySpec q;
            q.mode = parse_query_mode(search_mode);
            if (!search_table.empty()) q.query_table = parse_table_csv(search_table);
            if (!search_condition.empty()) q.condition = search_condition;
            if (!search_key.empty()) q.key_column = search_key;
            q.k = engine.k;
            engine.lambda = search_lambda;
            print_ranking(execute(q, ip, model, *provider, engine), ip.pool());
        } else if (*train_cmd) {
            auto pc = train_provider.config();
            auto provider = make_provider(pc);
            auto dir = bundle_dir(train_pool, train_index);
            auto ip = open_index(train_pool, train_index, pc);
            auto bench = load_benchmark(train_bench);
            CrossFusionModel model;
            if (!train_init.empty()) {
                model = load_checkpoint(train_init);
            } else {
                shape.d = provider->dim();
                model = CrossFusionModel::init(shape, init_seed);
            }
            auto examples = make_training_examples(bench, ip, *provider, tc, engine.candidate_pool_size);
            std::printf("%zu training queries\n", examples.size());
            auto result = train(model, examples, tc);
            for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
                std::printf("epoch %3zu  loss %.6f\n", e, result.loss_curve[e]);
            }
            fs::path out = train_out.empty() ? dir / "model.bin" : fs::path(train_out);
            save_checkpoint(model, out);
            std::printf("saved %s (lambda %.4f)\n", out.string().c_str(), model.lambda);
        } else if (*eval) {
            auto pc = eval_provider.config();
            auto provider = make_provider(pc);
            auto bench = load_benchmark(eval_bench);
            fs::path pool_dir = eval_pool.empty() ? bench.pool_dir.value_or(fs::path()) : fs::path(eval_pool);
            if (pool_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "--pool is required (manifest names none)");
            auto ip = open_index(pool_dir, eval_index, pc);
            auto model = load_or_init_model(eval_model, bundle_dir(pool_dir, eval_index), provider->dim());
            eval_engine.lambda = eval_lambda;
            auto result = evaluate_run(engine_ranker(ip, model, *provider, eval_engine), bench);
            std::cout << format_report(result);
            if (!eval_json.empty()) {
                std::ofstream(eval_json) << result_json(result) << "\n";
            }
        } else if (*serve) {
            sopt.provider = serve_provider.config();
            if (!serve_model.empty()) sopt.model_path = serve_model;
            if (!llm_endpoint.empty()) sopt.llm = LlmConfig{llm_endpoint, "/v1/chat/completions", llm_model, llm_key, 10};

            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);

            Service service(sopt);
            for (const auto& dir : preload) {
                auto id = service.add_pool(load_pool(dir), fs::path(dir).filename().string());
                service.index_pool(id);
                std::fprintf(stderr, "loaded pool %s\n", id.c_str());
            }
            httplib::Server server;
            service.register_routes(server);
            std::thread waiter([&] {
                int sig = 0;
                sigwait(&signals, &sig);
                server.stop();
            });
            std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), port);
            bool ok = server.listen(host, port);
            if (!ok) {
                pthread_kill(waiter.native_handle(), SIGTERM);
                waiter.join();
                throw Error(ErrorCode::kIoError, "cannot listen on " + host + ":" + std::to_string(port));
            }
            waiter.join();
            service.wait_for_jobs();
        } else if (*synth) {
            auto corpus = generate_corpus(sc);
            fs::path out(synth_out);
            write_pool(corpus.pool, out / "pool");
            corpus.bench.pool_dir = out / "pool";
            write_benchmark(corpus.bench, out / "bench");
            std::printf("%zu tables, %zu queries -> %s\n", corpus.pool.size(), corpus.bench.queries.size(),
                        out.string().c_str());
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
