#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>
#include <scenesmith/evalbench.hpp>
#include <scenesmith/pipeline.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using namespace scenesmith;

namespace {

enum Exit { ok = 0, validation = 2, stage = 3, service = 4 };

struct Globals {
    std::string config;
    std::string cache;
    std::optional<std::uint64_t> seed_override;
    bool offline = false;
    std::optional<std::size_t> threads;
    bool quiet = false;
};

PipelineConfig load_config(const Globals& g)
{
    PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_pipeline_config(g.config);
    if (g.seed_override) cfg.seeds = {*g.seed_override, *g.seed_override, *g.seed_override};
    if (g.threads) cfg.threads = *g.threads;
    cfg.validate();
    return cfg;
}

fs::path cache_dir(const Globals& g, const PipelineConfig& cfg)
{
    if (!g.cache.empty()) return g.cache;
    if (const char* env = std::getenv("SCENESMITH_CACHE"); env && *env) return env;
    return cfg.cache_dir;
}

json read_json(const fs::path& p)
{
    try {
        return json::parse(read_text_file(p));
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("{}: {}", p.string(), e.what()));
    }
}

void write_json(const fs::path& p, const json& j)
{
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_text_file(p, dump_canonical(j));
}

// A retrieval result given either as the JSON file or as the directory holding retrieval.json.
fs::path retrieval_file(const fs::path& p) { return fs::is_directory(p) ? p / "retrieval.json" : p; }

void set_endpoint(std::string& slot, const std::string& value)
{
    if (value.empty()) return;
    if (!is_valid_endpoint(value)) throw ValidationError("endpoint must be \"stub\" or a URL, got '" + value + "'");
    slot = value;
}

int report(int code, const std::string& what)
{
    fmt::print(stderr, "error: {}\n", what);
    return code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Converts indoor scan detections into a graphics-ready scene description."};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "pipeline config JSON")->check(CLI::ExistingFile);
    app.add_option("--cache", g.cache, "cache directory (overrides SCENESMITH_CACHE and the config)");
    app.add_option("--seed-override", g.seed_override, "use this value for every named seed");
    app.add_flag("--offline", g.offline, "never touch the network; service calls must hit the cache");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("-q,--quiet", g.quiet, "suppress progress output");

    std::function<void()> action;

    // parse
    auto* parse = app.add_subcommand("parse", "close walls, snap and align the scan");
    std::string scan_path, parse_out, parse_log;
    parse->add_option("--scan", scan_path)->required();
    parse->add_option("--out", parse_out)->required();
    parse->add_option("--log", parse_log, "write the adjustment log here instead of stdout");
    parse->callback([&] {
        action = [&] {
            const PipelineConfig cfg = load_config(g);
            const ParsedScene parsed = run_parse_stage(scan_path, cfg);
            write_json(parse_out, to_json(parsed));
            std::string text;
            for (const auto& line : parsed.log) text += line + "\n";
            if (parse_log.empty()) fmt::print("{}", text);
            else write_text_file(parse_log, text);
        };
    });

    // graph
    auto* graph = app.add_subcommand("graph", "infer relations and resolve collisions");
    std::string graph_scene, graph_out, graph_report;
    graph->add_option("--scene", graph_scene, "parsed scene JSON")->required();
    graph->add_option("--out", graph_out)->required();
    graph->add_option("--report", graph_report);
    graph->callback([&] {
        action = [&] {
            const PipelineConfig cfg = load_config(g);
            const ParsedScene parsed = parsed_scene_from_json(read_json(graph_scene));
            const GraphStageOutput out = run_graph_stage(parsed, cfg);
            write_json(graph_out, to_json(out));
            if (!graph_report.empty()) write_json(graph_report, to_json(out.collisions));
        };
    });

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "hierarchical asset retrieval");
    std::string ret_graph, ret_db, ret_provider, ret_oracle, ret_trace, ret_renderer;
    retrieve->add_option("--graph", ret_graph)->required();
    retrieve->add_option("--db", ret_db, "asset database root")->required();
    retrieve->add_option("--provider", ret_provider, "embedding endpoint: stub or URL");
    retrieve->add_option("--oracle", ret_oracle, "selection oracle: stub or URL");
    retrieve->add_option("--renderer", ret_renderer, "render command for the pose stage");
    retrieve->add_option("--trace", ret_trace, "output directory")->required();
    retrieve->callback([&] {
        action = [&] {
            PipelineConfig cfg = load_config(g);
            set_endpoint(cfg.services.embedding, ret_provider);
            set_endpoint(cfg.services.oracle, ret_oracle);
            if (!ret_renderer.empty()) cfg.services.renderer = ret_renderer;
            const GraphDocument doc = graph_document_from_json(read_json(ret_graph));
            const AssetDatabase db = AssetDatabase::load(ret_db);
            Services services = make_services(cfg, cache_dir(g, cfg), g.offline);
            const RetrievalResult res = run_retrieve_stage(doc, db, services, cfg);
            write_json(fs::path(ret_trace) / "retrieval.json", to_json(res));
            for (const auto& t : res.traces) {
                for (const auto& m : t.members) write_json(fs::path(ret_trace) / "traces" / (m + ".json"), to_json(t));
            }
        };
    });

    // paint
    auto* paint = app.add_subcommand("paint", "material search and albedo shift");
    std::string paint_graph, paint_assign, paint_db, paint_masks, paint_matdb, paint_oracle, paint_provider, paint_out;
    paint->add_option("--graph", paint_graph)->required();
    paint->add_option("--assignments", paint_assign, "retrieval output (file or directory)")->required();
    paint->add_option("--db", paint_db, "asset database root")->required();
    paint->add_option("--masks", paint_masks)->required();
    paint->add_option("--matdb", paint_matdb)->required();
    paint->add_option("--oracle", paint_oracle);
    paint->add_option("--provider", paint_provider);
    paint->add_option("--out", paint_out)->required();
    paint->callback([&] {
        action = [&] {
            PipelineConfig cfg = load_config(g);
            set_endpoint(cfg.services.oracle, paint_oracle);
            set_endpoint(cfg.services.embedding, paint_provider);
            const GraphDocument doc = graph_document_from_json(read_json(paint_graph));
            const RetrievalResult retrieval = retrieval_result_from_json(read_json(retrieval_file(paint_assign)));
            const AssetDatabase assets = AssetDatabase::load(paint_db);
            const MaterialDatabase mats = MaterialDatabase::load(paint_matdb);
            Services services = make_services(cfg, cache_dir(g, cfg), g.offline);
            const PaintResult res = run_paint_stage(doc, retrieval, paint_masks, assets, mats, services, cfg, paint_out);
            write_json(fs::path(paint_out) / "assignments.json", res.assignments);
        };
    });

    // assemble
    auto* assemble = app.add_subcommand("assemble", "build the exported scene");
    std::string asm_graph, asm_retrieval, asm_materials, asm_db, asm_out, asm_physics;
    assemble->add_option("--graph", asm_graph)->required();
    assemble->add_option("--retrieval", asm_retrieval)->required();
    assemble->add_option("--materials", asm_materials, "paint output (file or directory)")->required();
    assemble->add_option("--db", asm_db)->required();
    assemble->add_option("--out", asm_out)->required();
    assemble->add_option("--physics-oracle", asm_physics);
    assemble->callback([&] {
        action = [&] {
            PipelineConfig cfg = load_config(g);
            set_endpoint(cfg.services.physics_oracle, asm_physics);
            const GraphDocument doc = graph_document_from_json(read_json(asm_graph));
            const RetrievalResult retrieval = retrieval_result_from_json(read_json(retrieval_file(asm_retrieval)));
            const fs::path mat_file = fs::is_directory(asm_materials) ? fs::path(asm_materials) / "assignments.json"
                                                                      : fs::path(asm_materials);
            const json materials = read_json(mat_file);
            const AssetDatabase db = AssetDatabase::load(asm_db);
            Services services = make_services(cfg, cache_dir(g, cfg), g.offline);
            Provenance prov;
            prov.config_hash = config_hash(cfg);
            prov.seeds = to_json(cfg)["seeds"];
            prov.stage_versions = stage_versions();
            prov.inputs = {{"graph", sha256_file(asm_graph)},
                           {"retrieval", sha256_file(retrieval_file(asm_retrieval))},
                           {"materials", sha256_file(mat_file)},
                           {"assets", sha256_tree(asm_db)}};
            write_json(asm_out, assemble_scene(doc, retrieval, materials, db, *services.physics_oracle, cfg.assemble, prov));
        };
    });

    // run
    auto* run = app.add_subcommand("run", "parse, graph, retrieve, paint and assemble");
    RunInputs inputs;
    run->add_option("--scan", inputs.scan)->required();
    run->add_option("--db", inputs.assets, "asset database root")->required();
    run->add_option("--matdb", inputs.materials, "material database root")->required();
    run->add_option("--masks", inputs.masks, "mask directory (default: <scan dir>/masks)");
    run->add_option("--out", inputs.out, "output directory")->required();
    run->callback([&] {
        action = [&] {
            const PipelineConfig cfg = load_config(g);
            const RunManifest m = run_pipeline(inputs, cfg, cache_dir(g, cfg), g.offline);
            if (!g.quiet) {
                for (const auto& s : m.stages) {
                    fmt::print("{:<9} {:<12} {} {:.3f}s{}\n", s.name, s.artifact, s.hash.substr(0, 12), s.wall_s,
                               s.cached ? " (cached)" : "");
                }
                fmt::print("network calls: {}\n", m.network_calls);
            }
        };
    });

    // bench
    auto* bench = app.add_subcommand("bench", "evaluation harness");
    bench->require_subcommand(1);
    auto* similarity = bench->add_subcommand("similarity", "chamfer distance between ground truth and retrieved meshes");
    std::string sim_pairs, sim_out;
    std::size_t sim_n = 10000;
    std::uint64_t sim_seed = 0;
    similarity->add_option("--pairs", sim_pairs, "CSV: gt,retrieved,category")->required();
    similarity->add_option("--n", sim_n, "samples per mesh")->check(CLI::PositiveNumber);
    similarity->add_option("--seed", sim_seed);
    similarity->add_option("--out", sim_out, "report .json or .md")->required();
    similarity->callback([&] {
        action = [&] {
            const PipelineConfig cfg = load_config(g);
            const auto pairs = read_similarity_pairs(sim_pairs);
            const MetricReport r = run_similarity_benchmark(pairs, sim_n, sim_seed, cfg.threads);
            if (fs::path(sim_out).extension() == ".md") write_text_file(sim_out, to_markdown(r));
            else write_json(sim_out, to_json(r));
        };
    });
    auto* images = bench->add_subcommand("images", "RMSE, SSIM and optional LPIPS between scans and renders");
    std::string img_pairs, img_out, img_lpips;
    images->add_option("--pairs", img_pairs, "CSV: scan,render")->required();
    images->add_option("--out", img_out, "report .json or .md")->required();
    images->add_option("--lpips", img_lpips, "command printing the perceptual distance of two images");
    images->callback([&] {
        action = [&] {
            const auto pairs = read_image_pairs(img_pairs);
            std::optional<ExternalMetric> lpips;
            if (!img_lpips.empty()) lpips.emplace(img_lpips);
            const ImageReport r = run_image_benchmark(pairs, lpips ? &*lpips : nullptr);
            if (fs::path(img_out).extension() == ".md") write_text_file(img_out, to_markdown(r));
            else write_json(img_out, to_json(r));
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::validation;
    }

    try {
        action();
    } catch (const StageError& e) {
        fmt::print(stderr, "last good artifact: {}\n", e.last_good_artifact().empty() ? "(none)" : e.last_good_artifact());
        switch (e.cause()) {
        case StageError::Cause::validation: return report(Exit::validation, e.what());
        case StageError::Cause::service: return report(Exit::service, e.what());
        case StageError::Cause::stage: return report(Exit::stage, e.what());
        }
    } catch (const ValidationError& e) {
        return report(Exit::validation, e.what());
    } catch (const ServiceError& e) {
        return report(Exit::service, e.what());
    } catch (const std::exception& e) {
        return report(Exit::stage, e.what());
    }
    return Exit::ok;
}
