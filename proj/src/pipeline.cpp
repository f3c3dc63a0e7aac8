#include <scenesmith/pipeline.hpp>
#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>

#include <fmt/format.h>

#include <chrono>
#include <regex>
#include <thread>

namespace fs = std::filesystem;

namespace scenesmith {

// ---- configuration

bool is_valid_endpoint(const std::string& endpoint)
{
    if (endpoint == "stub") return true;
    static const std::regex url(R"(^https?://[A-Za-z0-9.\-]+(:[0-9]{1,5})?(/[^\s]*)?$)");
    return std::regex_match(endpoint, url);
}

void PipelineConfig::validate() const
{
    snap.validate();
    assemble.validate();
    for (const auto* e : {&services.embedding, &services.oracle, &services.physics_oracle}) {
        if (!is_valid_endpoint(*e)) throw ValidationError("endpoint must be \"stub\" or a URL, got '" + *e + "'");
    }
    if (services.embedding_dim <= 0) throw ValidationError("services.embedding_dim must be positive");
    if (services.attempts < 1) throw ValidationError("services.attempts must be at least 1");
    if (!(services.backoff_s >= 0.0) || !(services.timeout_s > 0.0)) throw ValidationError("services: bad backoff or timeout");
    if (services.max_in_flight < 1 || services.max_in_flight > 256) throw ValidationError("services.max_in_flight must be in [1, 256]");
    if (retrieval.stage2_keep < 1 || retrieval.stage3_keep < 1 || retrieval.stage3_keep > retrieval.stage2_keep) {
        throw ValidationError("retrieval: need 1 <= stage3_keep <= stage2_keep");
    }
    if (paint.top_k < 1 || paint.min_patch < 1) throw ValidationError("paint: top_k and min_patch must be positive");
    if (threads < 1) throw ValidationError("threads must be at least 1");
}

json to_json(const PipelineConfig& c)
{
    const auto& s = c.services;
    return {{"snap", to_json(c.snap)},
            {"relations", to_json(c.relations)},
            {"retrieval", {{"stage2_keep", c.retrieval.stage2_keep}, {"stage3_keep", c.retrieval.stage3_keep}, {"cluster", c.retrieval.cluster}}},
            {"paint", {{"top_k", c.paint.top_k}, {"min_patch", c.paint.min_patch}}},
            {"assemble", to_json(c.assemble)},
            {"services",
             {{"embedding", s.embedding},
              {"oracle", s.oracle},
              {"physics_oracle", s.physics_oracle},
              {"renderer", s.renderer ? json(*s.renderer) : json(nullptr)},
              {"model", s.model},
              {"embedding_dim", s.embedding_dim},
              {"attempts", s.attempts},
              {"backoff_s", s.backoff_s},
              {"timeout_s", s.timeout_s},
              {"max_in_flight", s.max_in_flight}}},
            {"seeds", {{"sampling", c.seeds.sampling}, {"kmeans", c.seeds.kmeans}, {"stub", c.seeds.stub}}},
            {"cache_dir", c.cache_dir},
            {"log_level", c.log_level},
            {"threads", c.threads}};
}

PipelineConfig pipeline_config_from_json(const json& j)
{
    PipelineConfig c;
    try {
        if (j.contains("snap")) c.snap = snap_config_from_json(j["snap"]);
        if (j.contains("relations")) c.relations = relation_config_from_json(j["relations"]);
        if (j.contains("retrieval")) {
            const auto& r = j["retrieval"];
            c.retrieval.stage2_keep = r.value("stage2_keep", c.retrieval.stage2_keep);
            c.retrieval.stage3_keep = r.value("stage3_keep", c.retrieval.stage3_keep);
            c.retrieval.cluster = r.value("cluster", c.retrieval.cluster);
        }
        if (j.contains("paint")) {
            c.paint.top_k = j["paint"].value("top_k", c.paint.top_k);
            c.paint.min_patch = j["paint"].value("min_patch", c.paint.min_patch);
        }
        if (j.contains("assemble")) c.assemble = assemble_config_from_json(j["assemble"]);
        if (j.contains("services")) {
            const auto& s = j["services"];
            auto& d = c.services;
            d.embedding = s.value("embedding", d.embedding);
            d.oracle = s.value("oracle", d.oracle);
            d.physics_oracle = s.value("physics_oracle", d.physics_oracle);
            if (s.contains("renderer") && s["renderer"].is_string()) d.renderer = s["renderer"].get<std::string>();
            d.model = s.value("model", d.model);
            d.embedding_dim = s.value("embedding_dim", d.embedding_dim);
            d.attempts = s.value("attempts", d.attempts);
            d.backoff_s = s.value("backoff_s", d.backoff_s);
            d.timeout_s = s.value("timeout_s", d.timeout_s);
            d.max_in_flight = s.value("max_in_flight", d.max_in_flight);
        }
        if (j.contains("seeds")) {
            const auto& s = j["seeds"];
            for (const char* name : {"sampling", "kmeans", "stub"}) {
                if (!s.contains(name)) throw ValidationError(std::string("seeds.") + name + " must be given explicitly");
            }
            c.seeds = {s["sampling"].get<std::uint64_t>(), s["kmeans"].get<std::uint64_t>(), s["stub"].get<std::uint64_t>()};
        }
        c.cache_dir = j.value("cache_dir", c.cache_dir);
        c.log_level = j.value("log_level", c.log_level);
        c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path)
{
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return pipeline_config_from_json(j);
}

std::string config_hash(const PipelineConfig& cfg)
{
    json j = to_json(cfg);
    j.erase("cache_dir");
    j.erase("log_level");
    j.erase("threads");
    return sha256_hex(j.dump());
}

json stage_versions()
{
    return {{"parse", "1"}, {"graph", "1"}, {"retrieve", "1"}, {"paint", "1"}, {"assemble", "1"}};
}

// ---- services

ServiceClient::ServiceClient(std::string endpoint, std::string identity, Handler stub, ServicePolicy policy,
                             fs::path cache_dir, bool offline, std::shared_ptr<Semaphore> gate)
    : endpoint_(std::move(endpoint))
    , identity_(std::move(identity))
    , stub_(std::move(stub))
    , policy_(policy)
    , cache_dir_(std::move(cache_dir))
    , offline_(offline)
    , gate_(std::move(gate))
{
}

json ServiceClient::call(const json& request)
{
    const std::string body = request.dump();
    const std::string key = sha256_hex(identity_ + "\n" + body);
    const fs::path entry = cache_dir_ / "services" / key.substr(0, 2) / (key + ".json");
    if (fs::exists(entry)) {
        try {
            const json cached = json::parse(read_text_file(entry));
            ++cache_hits_;
            return cached.at("response");
        } catch (const json::exception&) {
            // unreadable entry: fall through and refresh it
        }
    }
    auto store = [&](const json& response) {
        const fs::path tmp = entry.string() + fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
        write_text_file(tmp, json{{"endpoint", identity_}, {"request", request}, {"response", response}}.dump());
        fs::rename(tmp, entry);
    };
    if (endpoint_ == "stub") {
        json response = stub_(request);
        store(response);
        return response;
    }
    if (offline_) throw ServiceError(fmt::format("offline: no cached response from {} for request {}", endpoint_, key.substr(0, 12)));

    if (gate_) gate_->acquire();
    struct Release {
        Semaphore* g;
        ~Release() { if (g) g->release(); }
    } release{gate_.get()};

    std::string last_error;
    double wait = policy_.backoff_s;
    for (int attempt = 0; attempt < policy_.attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
            wait *= 2.0;
        }
        ++network_calls_;
        const HttpResult res = http_post_json(endpoint_, body, policy_.timeout_s);
        if (!res.body) {
            last_error = res.error;
            continue;
        }
        json response;
        try {
            response = json::parse(*res.body);
        } catch (const json::exception&) {
            throw ServiceError(fmt::format("protocol error from {} at $: response is not JSON: {}", endpoint_, res.body->substr(0, 200)));
        }
        store(response);
        return response;
    }
    throw ServiceError(fmt::format("endpoint {} failed after {} attempts: {}", endpoint_, policy_.attempts, last_error));
}

Embedding ServiceEmbeddingProvider::embed(std::span<const std::uint8_t> image)
{
    const json response = client_.call({{"image", base64_encode(image)}, {"model", model_}});
    const json* emb = response.contains("embedding") ? &response["embedding"] : nullptr;
    if (!emb || !emb->is_array() || emb->empty()) {
        throw ServiceError(fmt::format("protocol error from {} at $.embedding: {}", client_.endpoint(), response.dump().substr(0, 200)));
    }
    Embedding v(static_cast<Eigen::Index>(emb->size()));
    for (size_t i = 0; i < emb->size(); ++i) {
        if (!(*emb)[i].is_number() || !std::isfinite((*emb)[i].get<double>())) {
            throw ServiceError(fmt::format("protocol error from {} at $.embedding[{}]", client_.endpoint(), i));
        }
        v[static_cast<Eigen::Index>(i)] = (*emb)[i].get<double>();
    }
    return v;
}

int Services::network_calls() const
{
    int n = 0;
    for (const auto* c : {embedding_client.get(), oracle_client.get(), physics_client.get()}) {
        if (c) n += c->network_calls();
    }
    return n;
}

Services make_services(const PipelineConfig& cfg, const fs::path& cache_dir, bool offline)
{
    const auto& s = cfg.services;
    const ServicePolicy policy{s.attempts, s.backoff_s, s.timeout_s};
    auto gate = std::make_shared<Semaphore>(s.max_in_flight);
    Services out;
    const int dim = s.embedding_dim;
    const std::uint64_t seed = cfg.seeds.stub;
    auto embed_stub = [dim, seed](const json& req) {
        const auto bytes = base64_decode(req.at("image").get<std::string>());
        const Embedding e = stub_embedding(bytes, dim, seed);
        return json{{"embedding", std::vector<double>(e.data(), e.data() + e.size())}};
    };
    const std::string embed_id = s.embedding == "stub" ? fmt::format("stub:embed:dim={}:seed={}", dim, seed) : s.embedding;
    out.embedding_client = std::make_unique<ServiceClient>(s.embedding, embed_id, embed_stub, policy, cache_dir, offline, gate);
    out.oracle_client = std::make_unique<ServiceClient>(s.oracle, s.oracle == "stub" ? "stub:oracle" : s.oracle,
                                                        stub_oracle_answer, policy, cache_dir, offline, gate);
    out.physics_client = std::make_unique<ServiceClient>(
        s.physics_oracle, s.physics_oracle == "stub" ? "stub:oracle" : s.physics_oracle, stub_oracle_answer, policy,
        cache_dir, offline, gate);
    out.provider = std::make_unique<ServiceEmbeddingProvider>(*out.embedding_client, s.model);
    out.oracle = std::make_unique<ServiceOracle>(*out.oracle_client);
    out.physics_oracle = std::make_unique<ServiceOracle>(*out.physics_client);
    if (s.renderer) out.renderer = std::make_unique<SubprocessRenderer>(*s.renderer, cache_dir / "renders");
    return out;
}

// ---- stages

ParsedScene run_parse_stage(const fs::path& scan_path, const PipelineConfig& cfg)
{
    json doc;
    try {
        doc = json::parse(read_text_file(scan_path));
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("schema violation: {} is not valid JSON ({})", scan_path.string(), e.what()));
    } catch (const Error& e) {
        throw ValidationError(e.what());
    }
    const ScanValidation v = validate_scan(doc);
    if (!v.ok()) throw ValidationError("scan is invalid:\n" + v.summary());
    ParsedScene parsed = parse_scan(v.scan, cfg.snap);
    parsed.image_root = fs::absolute(scan_path).parent_path().lexically_normal().string();
    return parsed;
}

GraphStageOutput run_graph_stage(const ParsedScene& parsed, const PipelineConfig& cfg)
{
    GraphStageOutput out;
    out.doc.scene = parsed;
    const auto& objects = parsed.scan.objects;
    const auto& walls = parsed.scan.walls;
    out.doc.graph = infer_relations(objects, walls, cfg.snap, cfg.relations);
    CollisionResult solved = resolve_collisions(objects, out.doc.graph, parsed.polygon, walls, cfg.snap);
    out.doc.scene.scan.objects = std::move(solved.objects);
    out.collisions = std::move(solved.report);
    if (auto err = out.doc.graph.check_invariants()) throw Error("scene graph invariant violated: " + *err);
    return out;
}

json to_json(const GraphStageOutput& out)
{
    json j = to_json(out.doc);
    j["collision_report"] = to_json(out.collisions);
    return j;
}

RetrievalResult run_retrieve_stage(const GraphDocument& graph, const AssetDatabase& db, Services& services,
                                   const PipelineConfig& cfg)
{
    RetrievalConfig rc = cfg.retrieval;
    rc.kmeans_seed = cfg.seeds.kmeans;
    rc.threads = cfg.threads;
    const fs::path base = graph.scene.image_root.empty() ? fs::path(".") : fs::path(graph.scene.image_root);
    return retrieve_scene(graph.scene.scan, base, db, *services.provider, *services.oracle, services.renderer.get(), rc);
}

PaintResult run_paint_stage(const GraphDocument& graph, const RetrievalResult& retrieval, const fs::path& masks,
                            const AssetDatabase& assets, const MaterialDatabase& materials, Services& services,
                            const PipelineConfig& cfg, const fs::path& out_dir)
{
    const fs::path base = graph.scene.image_root.empty() ? fs::path(".") : fs::path(graph.scene.image_root);
    PaintResult res;
    if (!fs::is_directory(masks)) {
        res.assignments = {{"objects", json::object()}, {"skipped", json::object()}};
        for (const auto& o : graph.scene.scan.objects) res.assignments["skipped"][o.id] = "no mask directory";
        return res;
    }
    return paint_scene(graph.scene.scan, base, retrieval, masks, assets, materials, *services.provider, *services.oracle,
                       cfg.paint, out_dir);
}

// ---- run

std::string artifact_hash(const fs::path& path)
{
    return fs::is_directory(path) ? sha256_tree(path) : sha256_file(path);
}

json to_json(const RunManifest& m)
{
    json stages = json::array();
    for (const auto& s : m.stages) {
        stages.push_back({{"name", s.name}, {"key", s.key}, {"artifact", s.artifact}, {"hash", s.hash},
                          {"cached", s.cached}, {"wall_s", s.wall_s}});
    }
    return {{"stages", stages}, {"config_hash", m.config_hash}, {"inputs", m.inputs}, {"network_calls", m.network_calls},
            {"stage_versions", stage_versions()}};
}

RunManifest run_manifest_from_json(const json& j)
{
    RunManifest m;
    for (const auto& s : j.at("stages")) {
        m.stages.push_back({s.at("name").get<std::string>(), s.at("key").get<std::string>(),
                            s.at("artifact").get<std::string>(), s.at("hash").get<std::string>(),
                            s.value("cached", false), s.value("wall_s", 0.0)});
    }
    m.config_hash = j.value("config_hash", "");
    m.inputs = j.value("inputs", json::object());
    m.network_calls = j.value("network_calls", 0);
    return m;
}

namespace {

json read_json(const fs::path& p) { return json::parse(read_text_file(p)); }

void write_json(const fs::path& p, const json& j) { write_text_file(p, dump_canonical(j)); }

const std::vector<std::pair<std::string, std::string>> kStages = {
    {"parse", "parsed.json"}, {"graph", "graph.json"}, {"retrieve", "retrieval"},
    {"paint", "materials"},   {"assemble", "scene.json"}};

} // namespace

RunManifest run_pipeline(const RunInputs& in, const PipelineConfig& cfg, const fs::path& cache_dir, bool offline)
{
    cfg.validate();
    fs::create_directories(in.out);
    RunManifest previous;
    if (fs::exists(in.out / "manifest.json")) {
        try {
            previous = run_manifest_from_json(read_json(in.out / "manifest.json"));
        } catch (const std::exception&) {
            previous = {};
        }
    }
    const fs::path masks = in.masks.empty() ? fs::path(in.scan).parent_path() / "masks" : in.masks;

    RunManifest manifest;
    manifest.config_hash = config_hash(cfg);
    const json versions = stage_versions();
    const json service_ids = {{"embedding", cfg.services.embedding}, {"oracle", cfg.services.oracle},
                              {"physics_oracle", cfg.services.physics_oracle}, {"model", cfg.services.model},
                              {"embedding_dim", cfg.services.embedding_dim},
                              {"renderer", cfg.services.renderer ? json(*cfg.services.renderer) : json(nullptr)},
                              {"stub_seed", cfg.seeds.stub}};

    std::optional<Services> services;
    auto svc = [&]() -> Services& {
        if (!services) services.emplace(make_services(cfg, cache_dir, offline));
        return *services;
    };
    std::optional<AssetDatabase> assets;
    auto asset_db = [&]() -> const AssetDatabase& {
        if (!assets) assets = AssetDatabase::load(in.assets);
        return *assets;
    };

    std::map<std::string, std::string> hashes;
    std::string last_good;
    size_t stage_index = 0;

    auto run_stage = [&](const std::string& name, const std::string& artifact, json key_inputs, const std::function<void()>& produce) {
        const fs::path path = in.out / artifact;
        const std::string key = sha256_hex(json{{"stage", name}, {"version", versions.at(name)}, {"inputs", key_inputs}}.dump());
        StageRecord rec{name, key, artifact, "", false, 0.0};
        const auto start = std::chrono::steady_clock::now();
        const auto prev = std::find_if(previous.stages.begin(), previous.stages.end(), [&](const StageRecord& s) { return s.name == name; });
        if (prev != previous.stages.end() && prev->key == key && fs::exists(path) && artifact_hash(path) == prev->hash) {
            rec.cached = true;
            rec.hash = prev->hash;
        } else {
            try {
                fs::remove_all(path);
                produce();
            } catch (const std::exception& e) {
                for (size_t i = stage_index; i < kStages.size(); ++i) fs::remove_all(in.out / kStages[i].second);
                manifest.stages.push_back(rec);
                json failed = to_json(manifest);
                failed["stages"].erase(failed["stages"].size() - 1);
                failed["failed"] = {{"stage", name}, {"error", e.what()}, {"last_good", last_good}};
                write_json(in.out / "manifest.json", failed);
                StageError::Cause cause = StageError::Cause::stage;
                if (dynamic_cast<const ValidationError*>(&e)) cause = StageError::Cause::validation;
                if (dynamic_cast<const ServiceError*>(&e)) cause = StageError::Cause::service;
                throw StageError(name, last_good, e.what(), cause);
            }
            rec.hash = artifact_hash(path);
        }
        rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        hashes[name] = rec.hash;
        manifest.stages.push_back(rec);
        last_good = artifact;
        ++stage_index;
    };

    auto input_hash = [](const fs::path& p) -> std::string {
        try {
            return fs::exists(p) ? artifact_hash(p) : "absent";
        } catch (const std::exception& e) {
            return std::string("unreadable: ") + e.what();
        }
    };
    manifest.inputs = {{"scan", input_hash(in.scan)},
                       {"assets", input_hash(in.assets)},
                       {"materials", input_hash(in.materials)},
                       {"masks", input_hash(masks)}};

    run_stage("parse", "parsed.json",
              {{"scan", manifest.inputs["scan"]}, {"scan_dir", fs::absolute(in.scan).parent_path().lexically_normal().string()},
               {"snap", to_json(cfg.snap)}},
              [&] { write_json(in.out / "parsed.json", to_json(run_parse_stage(in.scan, cfg))); });

    run_stage("graph", "graph.json", {{"parsed", hashes["parse"]}, {"snap", to_json(cfg.snap)}, {"relations", to_json(cfg.relations)}},
              [&] {
                  const ParsedScene parsed = parsed_scene_from_json(read_json(in.out / "parsed.json"));
                  write_json(in.out / "graph.json", to_json(run_graph_stage(parsed, cfg)));
              });

    run_stage("retrieve", "retrieval",
              {{"graph", hashes["graph"]}, {"assets", manifest.inputs["assets"]}, {"services", service_ids},
               {"retrieval", to_json(cfg)["retrieval"]}, {"kmeans_seed", cfg.seeds.kmeans}},
              [&] {
                  const GraphDocument graph = graph_document_from_json(read_json(in.out / "graph.json"));
                  const RetrievalResult res = run_retrieve_stage(graph, asset_db(), svc(), cfg);
                  write_json(in.out / "retrieval" / "retrieval.json", to_json(res));
                  for (const auto& t : res.traces) {
                      for (const auto& member : t.members) write_json(in.out / "retrieval" / "traces" / (member + ".json"), to_json(t));
                  }
              });

    run_stage("paint", "materials",
              {{"graph", hashes["graph"]}, {"retrieval", hashes["retrieve"]}, {"assets", manifest.inputs["assets"]},
               {"materials", manifest.inputs["materials"]}, {"masks", manifest.inputs["masks"]}, {"services", service_ids},
               {"paint", to_json(cfg)["paint"]}},
              [&] {
                  const GraphDocument graph = graph_document_from_json(read_json(in.out / "graph.json"));
                  const RetrievalResult retrieval = retrieval_result_from_json(read_json(in.out / "retrieval" / "retrieval.json"));
                  const MaterialDatabase mats = MaterialDatabase::load(in.materials);
                  const fs::path dir = in.out / "materials";
                  const PaintResult res = run_paint_stage(graph, retrieval, masks, asset_db(), mats, svc(), cfg, dir);
                  write_json(dir / "assignments.json", res.assignments);
              });

    run_stage("assemble", "scene.json",
              {{"graph", hashes["graph"]}, {"retrieval", hashes["retrieve"]}, {"materials", hashes["paint"]},
               {"assets", manifest.inputs["assets"]}, {"config", manifest.config_hash}},
              [&] {
                  const GraphDocument graph = graph_document_from_json(read_json(in.out / "graph.json"));
                  const RetrievalResult retrieval = retrieval_result_from_json(read_json(in.out / "retrieval" / "retrieval.json"));
                  const json materials = read_json(in.out / "materials" / "assignments.json");
                  Provenance prov;
                  prov.config_hash = manifest.config_hash;
                  prov.seeds = to_json(cfg)["seeds"];
                  prov.stage_versions = versions;
                  prov.inputs = {{"graph", hashes["graph"]}, {"retrieval", hashes["retrieve"]}, {"materials", hashes["paint"]},
                                 {"assets", manifest.inputs["assets"]}};
                  const json scene = assemble_scene(graph, retrieval, materials, asset_db(), *svc().physics_oracle, cfg.assemble, prov);
                  write_json(in.out / "scene.json", scene);
              });

    manifest.network_calls = services ? services->network_calls() : 0;
    write_json(in.out / "manifest.json", to_json(manifest));
    return manifest;
}

} // namespace scenesmith
