#include <doctest.h>

#include "oracles.hpp"

#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>
#include <scenesmith/image.hpp>
#include <scenesmith/pipeline.hpp>
#include <scenesmith/process.hpp>

#include <httplib.h>

#include <thread>

using namespace scenesmith;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SCENESMITH_FIXTURE_DIR;

// nothing listens on the discard port on a test machine
const std::string kDeadEndpoint = "http://127.0.0.1:9/oracle";

ServicePolicy quick_policy() { return {3, 0.01, 2.0}; }

RunInputs fixture_inputs(const fs::path& out)
{
    return {kFixtures / "scan" / "scan.json", kFixtures / "assets", kFixtures / "materials", {}, out};
}

std::map<std::string, StageRecord> by_name(const RunManifest& m)
{
    std::map<std::string, StageRecord> out;
    for (const auto& s : m.stages) out[s.name] = s;
    return out;
}

// Local JSON endpoint answering with whatever `reply` returns for the request body.
class LocalServer {
public:
    explicit LocalServer(std::function<std::string(const std::string&)> reply)
    {
        server_.Post("/svc", [reply](const httplib::Request& req, httplib::Response& res) {
            res.set_content(reply(req.body), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer()
    {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/svc"; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

} // namespace

TEST_CASE("pipeline config")
{
    PipelineConfig cfg = load_pipeline_config(kFixtures / "config.json");
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.seeds.sampling == 7);
    CHECK(cfg.seeds.kmeans == 11);
    const std::string hash = config_hash(cfg);
    CHECK(config_hash(pipeline_config_from_json(to_json(cfg))) == hash);

    PipelineConfig other = cfg;
    other.cache_dir = "/elsewhere";
    other.threads = 3;
    other.log_level = "debug";
    CHECK(config_hash(other) == hash);
    other.seeds.stub = 1;
    CHECK(config_hash(other) != hash);

    cfg.services.oracle = "ftp://example.com";
    CHECK_THROWS_AS(cfg.validate(), ValidationError);

    CHECK(is_valid_endpoint("stub"));
    CHECK(is_valid_endpoint("http://localhost:8080/embed"));
    CHECK(is_valid_endpoint("https://example.com"));
    CHECK_FALSE(is_valid_endpoint(""));
    CHECK_FALSE(is_valid_endpoint("http://"));
    CHECK_FALSE(is_valid_endpoint("localhost:8080"));
}

TEST_CASE("stub service calls are cached")
{
    const fs::path cache = oracle::temp_dir("svc-stub");
    int asked = 0;
    ServiceClient client("stub", "oracle:stub", [&](const json& r) {
        ++asked;
        return stub_oracle_answer(r);
    }, quick_policy(), cache, false, nullptr);
    const json req = {{"task", "mass"}, {"volume", 2.0}, {"density", 3.0}};
    CHECK(client.call(req).at("mass_kg") == 6.0);
    CHECK(client.call(req).at("mass_kg") == 6.0);
    CHECK(asked == 1);
    CHECK(client.cache_hits() == 1);
    CHECK(client.network_calls() == 0);
    CHECK(artifact_hash(cache / "services").size() == 64);
}

TEST_CASE("an unreachable endpoint is retried and then named")
{
    const fs::path cache = oracle::temp_dir("svc-down");
    ServiceClient client(kDeadEndpoint, kDeadEndpoint, nullptr, quick_policy(), cache, false, nullptr);
    CHECK_THROWS_WITH_AS(client.call({{"task", "mass"}}), doctest::Contains(kDeadEndpoint.c_str()), ServiceError);
    CHECK(client.network_calls() == 3);

    ServiceClient offline(kDeadEndpoint, kDeadEndpoint, nullptr, quick_policy(), cache, true, nullptr);
    CHECK_THROWS_WITH_AS(offline.call({{"task", "mass"}}), doctest::Contains("offline"), ServiceError);
    CHECK(offline.network_calls() == 0);
}

TEST_CASE("responses from a live endpoint replay offline")
{
    const fs::path cache = oracle::temp_dir("svc-live");
    int hits = 0;
    LocalServer server([&](const std::string& body) {
        ++hits;
        const json req = json::parse(body);
        return json{{"mass_kg", req.at("volume").get<double>() * 10}}.dump();
    });
    const json req = {{"task", "mass"}, {"volume", 0.5}};
    {
        ServiceClient online(server.url(), server.url(), nullptr, quick_policy(), cache, false, nullptr);
        CHECK(online.call(req).at("mass_kg") == 5.0);
        CHECK(online.network_calls() == 1);
    }
    ServiceClient replay(server.url(), server.url(), nullptr, quick_policy(), cache, true, nullptr);
    CHECK(replay.call(req).at("mass_kg") == 5.0);
    CHECK(replay.network_calls() == 0);
    CHECK(hits == 1);
}

TEST_CASE("malformed responses are protocol errors")
{
    const fs::path cache = oracle::temp_dir("svc-bad");
    LocalServer server([](const std::string&) { return std::string("not json"); });
    ServiceClient client(server.url(), server.url(), nullptr, quick_policy(), cache, false, nullptr);
    CHECK_THROWS_WITH_AS(client.call({{"task", "mass"}}), doctest::Contains("protocol error"), ServiceError);

    LocalServer wrong([](const std::string&) { return json{{"vector", {1, 2}}}.dump(); });
    ServiceClient embed_client(wrong.url(), wrong.url(), nullptr, quick_policy(), cache, false, nullptr);
    ServiceEmbeddingProvider provider(embed_client, "m");
    const std::vector<std::uint8_t> bytes = {1, 2, 3};
    CHECK_THROWS_AS(provider.embed(bytes), ServiceError);
}

TEST_CASE("stage caching follows upstream hashes")
{
    const fs::path root = oracle::temp_dir("pipe-cache");
    const fs::path out = root / "out";
    const PipelineConfig cfg = load_pipeline_config(kFixtures / "config.json");
    const RunManifest first = run_pipeline(fixture_inputs(out), cfg, root / "cache", false);
    REQUIRE(first.stages.size() == 5);
    for (const auto& s : first.stages) {
        CHECK_FALSE(s.cached);
        CHECK(artifact_hash(out / s.artifact) == s.hash);
    }
    CHECK(first.network_calls == 0);
    const std::string scene = read_text_file(out / "scene.json");
    CHECK(validate_scene_document(json::parse(scene)).empty());

    const RunManifest again = run_pipeline(fixture_inputs(out), cfg, root / "cache", false);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(again.stages[i].cached);
        CHECK(again.stages[i].hash == first.stages[i].hash);
    }

    // one material entry that the fixture scene uses gets a different albedo
    const fs::path materials = root / "materials";
    fs::copy(kFixtures / "materials", materials, fs::copy_options::recursive);
    Image albedo = read_png(materials / "fabric-denim" / "albedo.png");
    for (auto& v : albedo.data) v = static_cast<std::uint8_t>(255 - v);
    write_png(materials / "fabric-denim" / "albedo.png", albedo);
    RunInputs changed = fixture_inputs(out);
    changed.materials = materials;
    const auto stages = by_name(run_pipeline(changed, cfg, root / "cache", false));
    CHECK(stages.at("parse").cached);
    CHECK(stages.at("graph").cached);
    CHECK(stages.at("retrieve").cached);
    CHECK_FALSE(stages.at("paint").cached);
    CHECK_FALSE(stages.at("assemble").cached);

    // a tampered artifact is recomputed
    write_text_file(out / "graph.json", "{}");
    const auto redo = by_name(run_pipeline(changed, cfg, root / "cache", false));
    CHECK(redo.at("parse").cached);
    CHECK_FALSE(redo.at("graph").cached);
    CHECK(redo.at("graph").hash == by_name(first).at("graph").hash);
}

TEST_CASE("a corrupt scan fails in parse and leaves no artifacts")
{
    const fs::path root = oracle::temp_dir("pipe-corrupt");
    write_text_file(root / "scan.json", R"({"walls": [{"id": "w0", "p0": [0, 0]}], "objects": "many"})");
    RunInputs in = fixture_inputs(root / "out");
    in.scan = root / "scan.json";
    const PipelineConfig cfg = load_pipeline_config(kFixtures / "config.json");
    try {
        run_pipeline(in, cfg, root / "cache", false);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "parse");
        CHECK(e.cause() == StageError::Cause::validation);
        CHECK(e.last_good_artifact().empty());
    }
    for (const char* artifact : {"parsed.json", "graph.json", "retrieval", "materials", "scene.json"}) {
        CHECK_FALSE(fs::exists(root / "out" / artifact));
    }
}

TEST_CASE("command-line exit codes")
{
    const fs::path root = oracle::temp_dir("pipe-cli");
    // stderr joins stdout so error messages can be checked
    const std::string cli = "2>&1 " + shell_quote(SCENESMITH_CLI_PATH);
    auto run = [&](const fs::path& scan, const fs::path& config, const std::string& out) {
        std::vector<std::string> args = {"--quiet", "--cache", (root / "cache").string()};
        if (!config.empty()) args.insert(args.end(), {"--config", config.string()});
        args.insert(args.end(), {"run", "--scan", scan.string(), "--db", (kFixtures / "assets").string(), "--matdb",
                                 (kFixtures / "materials").string(), "--masks", (kFixtures / "scan" / "masks").string(),
                                 "--out", (root / out).string()});
        return run_command(cli, args);
    };
    const fs::path scan = kFixtures / "scan" / "scan.json";

    CHECK(run(scan, kFixtures / "config.json", "ok").exit_code == 0);
    CHECK(fs::exists(root / "ok" / "scene.json"));

    CHECK(run_command(cli, {"run", "--no-such-flag"}).exit_code == 2);

    write_text_file(root / "corrupt.json", "{\"walls\": [");
    CHECK(run(root / "corrupt.json", {}, "corrupt").exit_code == 2);

    json bad_endpoint = json::parse(read_text_file(kFixtures / "config.json"));
    bad_endpoint["services"]["oracle"] = "not a url";
    write_text_file(root / "bad-endpoint.json", bad_endpoint.dump());
    CHECK(run(scan, root / "bad-endpoint.json", "bad").exit_code == 2);

    // two walls cannot close a room
    write_text_file(root / "open.json", json{{"walls",
                                              {{{"id", "a"}, {"p0", {0, 0}}, {"p1", {4, 0}}, {"height", 2.5}, {"openings", json::array()}},
                                               {{"id", "b"}, {"p0", {4, 0}}, {"p1", {4, 3}}, {"height", 2.5}, {"openings", json::array()}}}},
                                             {"objects", json::array()},
                                             {"frames", json::array()}}
                                            .dump());
    const CommandResult open = run(root / "open.json", {}, "open");
    CHECK(open.exit_code == 3);
    CHECK(open.output.find("parse") != std::string::npos);

    json down = json::parse(read_text_file(kFixtures / "config.json"));
    down["services"]["oracle"] = kDeadEndpoint;
    down["services"]["attempts"] = 1;
    down["services"]["backoff_s"] = 0.01;
    write_text_file(root / "down.json", down.dump());
    const CommandResult service = run(scan, root / "down.json", "down");
    CHECK(service.exit_code == 4);
    CHECK(service.output.find(kDeadEndpoint) != std::string::npos);
    CHECK(fs::exists(root / "down" / "graph.json"));
    CHECK_FALSE(fs::exists(root / "down" / "scene.json"));
}
