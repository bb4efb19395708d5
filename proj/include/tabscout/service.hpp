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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tabscout/embedding.hpp"
#include "tabscout/engine.hpp"
#include "tabscout/error.hpp"
#include "tabscout/evalkit.hpp"
#include "tabscout/hnsw.hpp"
#include "tabscout/nlc_model.hpp"
#include "tabscout/trainer.hpp"

namespace httplib {
class Server;
}

namespace tabscout {

// Assistant routing ------------------------------------------------------

enum class Intent { kDiscovery, kAnalysis, kOther };

std::string_view to_string(Intent intent);

struct ExtractedQuery {
    QueryMode mode = QueryMode::kNlOnly;
    std::string condition;
    std::optional<std::string> key_column;
};

struct AssistantTurn {
    std::string user_text;
    Intent detected_intent = Intent::kOther;
    std::optional<ExtractedQuery> extracted;  // present iff discovery
    std::string reply;
    std::string source = "rules";  // "rules" or "llm"
};

/// Any chat-completion-style endpoint: POST {endpoint}{path} with
/// {"model", "messages", "temperature"}; the reply's first choice content
/// must hold the structured JSON the prompt asks for.
struct LlmConfig {
    std::string endpoint;
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key;
    int timeout_seconds = 10;
};

/// System prompt sent to the chat endpoint. Replaceable.
std::string_view intent_prompt_template();

AssistantTurn route_intent_rules(std::string_view text);

/// Parses the model's structured reply; nullopt when it is unusable.
std::optional<AssistantTurn> parse_llm_reply(std::string_view content, std::string_view user_text);

/// Uses the chat endpoint when configured and falls back to the rules on any
/// transport or parse failure. Never throws.
AssistantTurn route_intent(std::string_view text, const std::optional<LlmConfig>& llm = std::nullopt);

// Processing previews ----------------------------------------------------

constexpr std::size_t kPreviewRows = 200;
constexpr std::size_t kTablePreviewRows = 50;

/// Left schema; left rows followed by right rows that have a non-empty value
/// in at least one aligned column. Truncated to `max_rows`.
TableRecord union_preview(const TableRecord& left, const TableRecord& right, const std::vector<ColumnMatch>& alignment,
                          std::size_t max_rows = kPreviewRows);

/// Left equi-join on trimmed key values; right columns appended (key column
/// dropped, clashing names suffixed "_right"). Truncated to `max_rows`.
TableRecord join_preview(const TableRecord& left, const TableRecord& right, const std::string& left_key,
                         const std::string& right_key, std::size_t max_rows = kPreviewRows);

/// Column alignment from the max-weight matching over column embeddings.
std::vector<ColumnMatch> align_columns(const EmbeddingProvider& provider, const TableRecord& left,
                                       const TableRecord& right);

// Wire format ------------------------------------------------------------

nlohmann::json to_json(const ScoredTable& s);
nlohmann::json to_json(const Explanation& e);
nlohmann::json to_json(const AssistantTurn& t);
nlohmann::json table_preview_json(const TableRecord& t, std::size_t max_rows);

/// Parses a search/explain request body; `query_table` is inline CSV.
QuerySpec query_from_json(const nlohmann::json& body, std::size_t default_k);

/// JSON Schema describing the search response.
const nlohmann::json& search_response_schema();

int http_status_for(ErrorCode code);
int exit_code_for(ErrorCode code);

// On-disk index bundle ---------------------------------------------------

/// Writes index.bin, embeddings.bin and provider.json into `dir`.
void save_index_bundle(const IndexedPool& pool, const EmbeddingProviderConfig& provider,
                       const std::filesystem::path& dir);
/// Loads a bundle, rejecting one built with a different provider config.
IndexedPool load_index_bundle(TablePool pool, const EmbeddingProviderConfig& provider,
                              const std::filesystem::path& dir);

// HTTP service -----------------------------------------------------------

struct ServiceOptions {
    EmbeddingProviderConfig provider;
    HnswParams hnsw;
    EngineConfig engine;
    std::optional<LlmConfig> llm;
    std::optional<std::filesystem::path> model_path;
    ModelShape model_shape;
    std::uint64_t model_seed = 0;
};

class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    void register_routes(httplib::Server& server);

    std::string add_pool(TablePool pool, std::optional<std::string> pool_id = std::nullopt);
    void index_pool(const std::string& pool_id);
    std::vector<ScoredTable> search(const std::string& pool_id, const nlohmann::json& body) const;
    /// Search plus the response envelope served by the HTTP API.
    nlohmann::json search_response(const std::string& pool_id, const nlohmann::json& body) const;

    /// Blocks until background jobs finish.
    void wait_for_jobs();

private:
    struct PoolState {
        std::shared_ptr<IndexedPool> indexed;
        mutable std::shared_mutex lock;
        std::atomic<bool> busy{false};
    };
    struct Job {
        std::string status = "queued";
        nlohmann::json result;
        std::string error;
    };

    std::shared_ptr<PoolState> pool_state(const std::string& pool_id) const;
    std::shared_ptr<const CrossFusionModel> model() const;
    std::string start_job(const std::string& pool_id, std::function<nlohmann::json()> work);

    ServiceOptions options_;
    std::unique_ptr<EmbeddingProvider> provider_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<PoolState>> pools_;
    std::shared_ptr<const CrossFusionModel> model_;
    std::map<std::string, Job> jobs_;
    std::vector<std::thread> workers_;
    std::size_t next_pool_ = 1;
    std::size_t next_job_ = 1;
};

}  // namespace tabscout
