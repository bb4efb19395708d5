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

#include "tabscout/embedding.hpp"
#include "tabscout/engine.hpp"
#include "tabscout/error.hpp"
#include "tabscout/evalkit.hpp"
#include "tabscout/service.hpp"
#include "tabscout/synth.hpp"
#include "tabscout/table.hpp"
#include "tabscout/table_scorer.hpp"

#include <chrono>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace tabscout;
using nlohmann::json;

namespace {

EmbeddingProviderConfig hashing(std::size_t dim, std::uint64_t seed, std::size_t max_cells) {
    EmbeddingProviderConfig c;
    c.dim = dim;
    c.seed = seed;
    c.max_cells_per_column = max_cells;
    return c;
}

// A loaded pool behind the same service the HTTP API uses; JSON crosses as text.
class Engine {
public:
    Engine(const std::filesystem::path& pool_dir, std::size_t dim, std::uint64_t seed,
           std::optional<std::filesystem::path> model_path)
        : service_(options(dim, seed, std::move(model_path))) {
        pool_id_ = service_.add_pool(load_pool(pool_dir), "default");
    }

    double index() {
        auto t0 = std::chrono::steady_clock::now();
        {
            py::gil_scoped_release release;
            service_.index_pool(pool_id_);
        }
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    std::string search(const std::string& body) const {
        auto parsed = json::parse(body);
        py::gil_scoped_release release;
        return service_.search_response(pool_id_, parsed).dump();
    }

private:
    static ServiceOptions options(std::size_t dim, std::uint64_t seed, std::optional<std::filesystem::path> model) {
        ServiceOptions o;
        o.provider = hashing(dim, seed, EmbeddingProviderConfig{}.max_cells_per_column);
        o.model_shape.d = dim;
        o.model_path = std::move(model);
        return o;
    }

    Service service_;
    std::string pool_id_;
};

}  // namespace

PYBIND11_MODULE(_tabscout, m) {
    m.doc() = "Native core of tabscout.";

    // Module-lifetime type object; never released.
    static PyObject* error_type = PyErr_NewException("tabscout._tabscout.TabscoutError", PyExc_RuntimeError, nullptr);
    m.add_object("TabscoutError", py::handle(error_type));
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object err = py::reinterpret_borrow<py::object>(error_type)(e.what());
            err.attr("code") = std::string(error_code_name(e.code()));
            PyErr_SetObject(error_type, err.ptr());
        } catch (const json::exception& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def(
        "embed_text",
        [](const std::string& text, std::size_t dim, std::uint64_t seed) {
            return HashingProvider(hashing(dim, seed, 64)).embed_text(text);
        },
        py::arg("text"), py::arg("dim") = 256, py::arg("seed") = 0);

    m.def(
        "embed_table",
        [](const std::string& csv, const std::string& caption, const std::string& description, std::size_t dim,
           std::uint64_t seed, std::size_t max_cells) {
            auto table = parse_table_csv_text(csv, "table");
            table.metadata = {caption, description};
            auto e = embed_table(HashingProvider(hashing(dim, seed, max_cells)), table);
            return py::dict(py::arg("columns") = e.columns, py::arg("content") = e.content,
                            py::arg("metadata") = e.metadata);
        },
        py::arg("csv"), py::arg("caption") = "", py::arg("description") = "", py::arg("dim") = 256,
        py::arg("seed") = 0, py::arg("max_cells") = 64);

    m.def(
        "hungarian",
        [](const Eigen::MatrixXd& weights) {
            auto r = hungarian(weights);
            return py::make_tuple(r.total, r.pairs);
        },
        py::arg("weights"));

    m.def(
        "union_score",
        [](const std::vector<Vector>& query, const std::vector<Vector>& candidate) {
            return union_score(query, candidate).score.value;
        },
        py::arg("query_columns"), py::arg("candidate_columns"));

    m.def(
        "join_score",
        [](const Vector& key, const std::vector<Vector>& candidate) {
            auto r = join_score(key, candidate);
            return py::make_tuple(r.score.value, r.column);
        },
        py::arg("key"), py::arg("candidate_columns"));

    m.def("ndcg_at_k", &ndcg_at_k, py::arg("ranked_ids"), py::arg("qrels"), py::arg("k"));

    m.def(
        "route_intent_json", [](const std::string& text) { return to_json(route_intent_rules(text)).dump(); },
        py::arg("text"));

    m.def("search_response_schema_json", [] { return search_response_schema().dump(); });

    m.def(
        "write_synthetic_corpus",
        [](const std::filesystem::path& out, std::size_t groups, std::size_t noise, std::uint64_t seed) {
            SynthConfig c;
            c.groups = groups;
            c.noise_tables = noise;
            c.seed = seed;
            auto corpus = generate_corpus(c);
            write_pool(corpus.pool, out / "pool");
            write_benchmark(corpus.bench, out / "bench");
            return corpus.pool.size();
        },
        py::arg("out"), py::arg("groups") = 100, py::arg("noise") = 100, py::arg("seed") = 7);

    py::class_<Engine>(m, "_Engine")
        .def(py::init<const std::filesystem::path&, std::size_t, std::uint64_t, std::optional<std::filesystem::path>>(),
             py::arg("pool_dir"), py::arg("dim"), py::arg("seed"), py::arg("model_path"))
        .def("index", &Engine::index)
        .def("search", &Engine::search, py::arg("body"));
}
