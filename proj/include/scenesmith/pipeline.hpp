#pragma once

#include <scenesmith/assemble.hpp>
#include <scenesmith/graph_build.hpp>
#include <scenesmith/layout.hpp>
#include <scenesmith/material.hpp>
#include <scenesmith/retrieval.hpp>
#include <scenesmith/services.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace scenesmith {

struct Seeds {
    std::uint64_t sampling = 0;
    std::uint64_t kmeans = 0;
    std::uint64_t stub = 0;
};

struct ServiceSettings {
    std::string embedding = "stub";
    std::string oracle = "stub";
    std::string physics_oracle = "stub";
    std::optional<std::string> renderer; // command line, absent by default
    std::string model = "stub-hash";
    int embedding_dim = 64;
    int attempts = 3;
    double backoff_s = 0.5;
    double timeout_s = 30.0;
    int max_in_flight = 4;
};

struct PipelineConfig {
    SnapConfig snap;
    RelationConfig relations;
    RetrievalConfig retrieval;
    PaintConfig paint;
    AssembleConfig assemble;
    ServiceSettings services;
    Seeds seeds;
    std::string cache_dir = ".scenesmith-cache";
    std::string log_level = "info";
    std::size_t threads = 1;

    void validate() const;
};

json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
/// Hash of the settings that influence outputs (excludes cache location, logging and thread count).
std::string config_hash(const PipelineConfig& cfg);

/// "stub" or http(s)://host[:port][/path].
bool is_valid_endpoint(const std::string& endpoint);

/// Version tags of each stage's algorithm; part of every stage cache key.
json stage_versions();

// ---- service access

struct ServicePolicy {
    int attempts = 3;
    double backoff_s = 0.5; // doubled after each failed attempt
    double timeout_s = 30.0;
};

using Semaphore = std::counting_semaphore<256>;

/// POSTs JSON; returns the body or an error description. Defined separately so it can be swapped in tests.
struct HttpResult {
    std::optional<std::string> body;
    std::string error;
};
HttpResult http_post_json(const std::string& url, const std::string& body, double timeout_s);

/// One configured endpoint. Responses are cached on disk keyed by the hash of endpoint and request,
/// which makes replay possible with no network at all. Thread-safe.
class ServiceClient {
public:
    using Handler = std::function<json(const json&)>;

    /// `endpoint` is "stub" (answered by `stub`) or a URL. `identity` distinguishes stub variants in the cache key.
    ServiceClient(std::string endpoint, std::string identity, Handler stub, ServicePolicy policy,
                  std::filesystem::path cache_dir, bool offline, std::shared_ptr<Semaphore> gate);

    json call(const json& request);

    const std::string& endpoint() const { return endpoint_; }
    int network_calls() const { return network_calls_.load(); }
    int cache_hits() const { return cache_hits_.load(); }

private:
    std::string endpoint_;
    std::string identity_;
    Handler stub_;
    ServicePolicy policy_;
    std::filesystem::path cache_dir_;
    bool offline_;
    std::shared_ptr<Semaphore> gate_;
    std::atomic<int> network_calls_{0};
    std::atomic<int> cache_hits_{0};
};

/// Embedding provider speaking {image, model} -> {embedding}.
class ServiceEmbeddingProvider : public EmbeddingProvider {
public:
    ServiceEmbeddingProvider(ServiceClient& client, std::string model) : client_(client), model_(std::move(model)) {}
    Embedding embed(std::span<const std::uint8_t> image) override;
    std::string model_tag() const override { return model_; }

private:
    ServiceClient& client_;
    std::string model_;
};

class ServiceOracle : public Oracle {
public:
    explicit ServiceOracle(ServiceClient& client) : client_(client) {}
    json ask(const json& request) override { return client_.call(request); }

private:
    ServiceClient& client_;
};

/// Every external dependency of a run, wired from the config.
struct Services {
    std::unique_ptr<ServiceClient> embedding_client, oracle_client, physics_client;
    std::unique_ptr<ServiceEmbeddingProvider> provider;
    std::unique_ptr<ServiceOracle> oracle, physics_oracle;
    std::unique_ptr<Renderer> renderer;

    int network_calls() const;
};

Services make_services(const PipelineConfig& cfg, const std::filesystem::path& cache_dir, bool offline);

// ---- stages

/// Reads and validates a scan, then parses the room. Throws ValidationError listing all issues.
ParsedScene run_parse_stage(const std::filesystem::path& scan_path, const PipelineConfig& cfg);

struct GraphStageOutput {
    GraphDocument doc;
    CollisionReport collisions;
};

GraphStageOutput run_graph_stage(const ParsedScene& parsed, const PipelineConfig& cfg);
json to_json(const GraphStageOutput& out);

RetrievalResult run_retrieve_stage(const GraphDocument& graph, const AssetDatabase& db, Services& services,
                                   const PipelineConfig& cfg);

PaintResult run_paint_stage(const GraphDocument& graph, const RetrievalResult& retrieval,
                            const std::filesystem::path& masks, const AssetDatabase& assets,
                            const MaterialDatabase& materials, Services& services, const PipelineConfig& cfg,
                            const std::filesystem::path& out_dir);

// ---- whole run

struct RunInputs {
    std::filesystem::path scan;
    std::filesystem::path assets;
    std::filesystem::path materials;
    std::filesystem::path masks; // defaults to <scan dir>/masks
    std::filesystem::path out;
};

struct StageRecord {
    std::string name;
    std::string key;
    std::string artifact; // relative to the output directory
    std::string hash;
    bool cached = false;
    double wall_s = 0.0;
};

struct RunManifest {
    std::vector<StageRecord> stages;
    std::string config_hash;
    json inputs = json::object();
    int network_calls = 0;
};

json to_json(const RunManifest& m);
RunManifest run_manifest_from_json(const json& j);

/// parse -> graph -> retrieve -> paint -> assemble. A stage whose key matches the previous
/// manifest in `out` and whose artifact still hashes the same is reused. Failures throw
/// StageError; the failed stage's artifacts and everything after it are removed.
RunManifest run_pipeline(const RunInputs& inputs, const PipelineConfig& cfg, const std::filesystem::path& cache_dir,
                         bool offline);

/// Hash of a file or of a directory tree.
std::string artifact_hash(const std::filesystem::path& path);

} // namespace scenesmith
