// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "../support/oracles.hpp"
#include "../support/scenarios.hpp"

#include <scenesmith/color.hpp>
#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>
#include <scenesmith/evalbench.hpp>
#include <scenesmith/graph_build.hpp>
#include <scenesmith/layout.hpp>
#include <scenesmith/material.hpp>
#include <scenesmith/mesh.hpp>
#include <scenesmith/process.hpp>
#include <scenesmith/retrieval.hpp>
#include <scenesmith/services.hpp>

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>

namespace fs = std::filesystem;
using namespace scenesmith;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<Vec3> random_cloud(Rng& rng, size_t n)
{
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    return pts;
}

PointCloud cloud(std::vector<Vec3> pts) { return PointCloud{std::move(pts), "", 0}; }

Outcome chamfer_oracle()
{
    Rng rng(101);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto a = random_cloud(rng, 1 + rng.below(200));
        const auto b = random_cloud(rng, 1 + rng.below(200));
        worst = std::max(worst, std::abs(chamfer_l1(cloud(a), cloud(b)) - oracle::chamfer_bruteforce(a, b)));
    }
    const PointCloud big_a = cloud(random_cloud(rng, 10000)), big_b = cloud(random_cloud(rng, 10000));
    const auto start = Clock::now();
    const double cd = chamfer_l1(big_a, big_b);
    const double elapsed = seconds_since(start);
    return {worst <= 1e-12 && elapsed <= 1.0 && std::isfinite(cd),
            fmt::format("max |kd - brute| = {:.2e} over 100 pairs; 10k x 10k in {:.3f} s", worst, elapsed)};
}

Outcome chamfer_hand_values()
{
    const double one = chamfer_l1(cloud({Vec3(0, 0, 0)}), cloud({Vec3(1, 1, 1)}));
    Rng rng(202);
    const auto a = random_cloud(rng, 150);
    const double self = chamfer_l1(cloud(a), cloud(a));
    double asym = 0.0;
    for (int t = 0; t < 100; ++t) {
        const PointCloud p = cloud(random_cloud(rng, 1 + rng.below(300))), q = cloud(random_cloud(rng, 1 + rng.below(300)));
        asym = std::max(asym, std::abs(chamfer_l1(p, q) - chamfer_l1(q, p)));
    }
    return {one == 6.0 && self == 0.0 && asym <= 1e-12,
            fmt::format("CD(0,1) = {}, CD(A,A) = {}, max asymmetry {:.2e}", one, self, asym)};
}

Outcome sampling_statistics()
{
    // triangle areas 3:1 in separate planes
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 2, 0}, {0, 0, 1}, {1, 0, 1}, {0, 2, 1}};
    mesh.triangles = {{0, 1, 2}, {3, 4, 5}};
    const long n = 10000;
    const auto [lo, hi] = oracle::binomial_interval(n, 0.75, 0.999);
    int inside = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const PointCloud pc = sample_surface(mesh, static_cast<size_t>(n), seed);
        long big = 0;
        for (const auto& p : pc.points) big += p.z() < 0.5 ? 1 : 0;
        if (lo <= big && big <= hi) ++inside;
    }
    auto digest = [&](std::uint64_t seed) {
        const PointCloud pc = sample_surface(mesh, static_cast<size_t>(n), seed);
        return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(pc.points.data()), pc.points.size() * sizeof(Vec3)));
    };
    // frozen golden digest; any change to the sampler or generator shows up here
    const std::string frozen = "026c0425604f2848abf65bda113da5013343724fee0fbbb4429b88c51fb3a325";
    const std::string now = digest(42);
    const bool stable = now == digest(42);
    const bool golden = now == frozen;
    return {inside >= 99 && stable && golden,
            fmt::format("{} / 100 seeds inside [{}, {}]; seed 42 digest {}{}", inside, lo, hi, now.substr(0, 16),
                        golden ? " (matches frozen)" : " (differs from frozen " + frozen.substr(0, 16) + ")")};
}

Outcome albedo_exactness()
{
    Rng rng(404);
    double worst_mean = 0.0;
    bool detail_exact = true, zero_shift_exact = true;
    for (int t = 0; t < 50; ++t) {
        const Image img = oracle::random_image(2 + int(rng.below(40)), 2 + int(rng.below(40)), 3, rng);
        const AlbedoMap map = albedo_from_image(img);
        const Vec3 mean = albedo_mean(map);
        const Vec3 target = mean + Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20));
        const ShiftResult unclamped = albedo_shift(map, target, false);
        worst_mean = std::max(worst_mean, (albedo_mean(unclamped.map) - target).cwiseAbs().maxCoeff());
        const ShiftResult clamped = albedo_shift(map, target, true);
        // pairwise differences exact on pixels the clamp left alone
        std::vector<size_t> untouched;
        for (size_t i = 0; i < map.lab.size(); ++i) {
            if (clamped.map.lab[i] == map.lab[i] + clamped.delta) untouched.push_back(i);
        }
        for (size_t k = 0; k + 1 < untouched.size() && k < 200; ++k) {
            const size_t p = untouched[k], q = untouched[k + 1];
            if (clamped.map.lab[p] - clamped.map.lab[q] != map.lab[p] - map.lab[q]) detail_exact = false;
        }
        const ShiftResult zero = albedo_shift(map, mean, true);
        if (zero.map.lab != map.lab || albedo_to_image(zero.map).data != albedo_to_image(map).data) zero_shift_exact = false;
    }
    double worst_rgb = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 rgb(double(rng.below(256)), double(rng.below(256)), double(rng.below(256)));
        worst_rgb = std::max(worst_rgb, (lab_to_srgb(srgb_to_lab(rgb)) - rgb).cwiseAbs().maxCoeff());
    }
    return {worst_mean <= 1e-9 && detail_exact && zero_shift_exact && worst_rgb <= 1.0,
            fmt::format("max |mean - T| {:.2e}; detail exact {}; zero shift exact {}; round trip max {:.2e}", worst_mean,
                        detail_exact, zero_shift_exact, worst_rgb)};
}

Outcome rectangle_maximality()
{
    int mismatches = 0;
    for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
        Mask m(4, 4);
        for (int i = 0; i < 16; ++i) m.bits[static_cast<size_t>(i)] = (bits >> i) & 1u;
        const PixelRect r = largest_rectangle(m);
        const long want = oracle::largest_rectangle_area(m);
        if (r.area() != want || (want > 0 && !oracle::rectangle_all_true(m, r))) ++mismatches;
    }
    Rng rng(505);
    int random_mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const Mask m = oracle::random_mask(1 + int(rng.below(24)), 1 + int(rng.below(24)), rng.uniform(0.3, 0.95), rng);
        const PixelRect r = largest_rectangle(m);
        const long want = oracle::largest_rectangle_area(m);
        if (r.area() != want || (want > 0 && !oracle::rectangle_all_true(m, r))) ++random_mismatches;
    }
    return {mismatches == 0 && random_mismatches == 0,
            fmt::format("{} / 65536 exhaustive 4x4 and {} / 1000 random masks disagree", mismatches, random_mismatches)};
}

double attachment_distance(const ObjectNode& o, const WallSegment& w)
{
    return cross2(w.direction(), o.box.back_anchor() - w.p0);
}

Outcome collision_solver()
{
    int resolved = 0, preserved = 0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const auto s = scenario::random_collision_scene(seed);
        const CollisionResult res = resolve_collisions(s.objects, s.graph, s.room.polygon, s.room.walls, SnapConfig{});
        const bool ok = res.report.resolved && res.report.iterations_used <= 10 && find_overlaps(res.objects).empty();
        if (!ok) continue;
        ++resolved;
        auto find = [&](const std::vector<ObjectNode>& v, const std::string& id) {
            return *std::find_if(v.begin(), v.end(), [&](const ObjectNode& o) { return o.id == id; });
        };
        bool keep = true;
        for (const auto& e : s.graph.edges_of(Relation::attached_to_wall)) {
            const WallSegment& w = *std::find_if(s.room.walls.begin(), s.room.walls.end(), [&](const auto& x) { return x.id == e.dst; });
            keep = keep && std::abs(attachment_distance(find(s.objects, e.src), w) - attachment_distance(find(res.objects, e.src), w)) <= 1e-6;
        }
        for (const auto& e : s.graph.edges_of(Relation::table_chair_pair)) {
            const Vec3 before = find(s.objects, e.src).box.center - find(s.objects, e.dst).box.center;
            const Vec3 after = find(res.objects, e.src).box.center - find(res.objects, e.dst).box.center;
            keep = keep && (before - after).cwiseAbs().maxCoeff() <= 1e-6;
        }
        if (keep) ++preserved;
    }

    // SAT against 1 mm rasterisation; pairs within 2 mm of touching are ambiguous at that resolution
    Rng rng(606);
    int compared = 0, disagree = 0, ambiguous = 0;
    while (compared < 10000) {
        Footprint a{Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1)), Vec2(rng.uniform(0.05, 0.8), rng.uniform(0.05, 0.8)), rng.uniform(-kPi, kPi)};
        Footprint b{Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1)), Vec2(rng.uniform(0.05, 0.8), rng.uniform(0.05, 0.8)), rng.uniform(-kPi, kPi)};
        const SatResult sat = sat_test(a, b);
        const double margin = sat.overlapping ? sat.depth : footprint_gap(a, b);
        if (margin < 2e-3) {
            ++ambiguous;
            continue;
        }
        ++compared;
        if (sat.overlapping != oracle::raster_overlap(a, b)) ++disagree;
    }
    return {resolved >= 475 && preserved == resolved && disagree == 0,
            fmt::format("{} / 500 resolved, constraints kept in {} / {}; SAT vs raster {} / 10000 disagree ({} ambiguous skipped)",
                        resolved, preserved, resolved, disagree, ambiguous)};
}

Outcome wall_closure()
{
    int simple = 0;
    SnapConfig cfg;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        try {
            const WallClosure c = close_walls(scenario::perturbed_rectangle(seed), cfg);
            const RoomPolygon snapped = snap_to_grid(c.polygon, cfg);
            if (c.polygon.vertices.size() >= 3 && is_simple_polygon(c.polygon.vertices) && c.polygon.area() > 0 &&
                is_simple_polygon(snapped.vertices) && snapped.area() > 0) {
                ++simple;
            }
        } catch (const Error&) {
        }
    }
    // U shape: three walls, open side joined
    std::vector<WallSegment> u(3);
    u[0].id = "a", u[0].p0 = {0, 4}, u[0].p1 = {0, 0};
    u[1].id = "b", u[1].p0 = {0, 0}, u[1].p1 = {5, 0};
    u[2].id = "c", u[2].p0 = {5, 0}, u[2].p1 = {5, 4};
    size_t u_edges = 0;
    try {
        u_edges = close_walls(u, cfg).polygon.vertices.size();
    } catch (const Error&) {
    }
    // idempotence
    const auto room = scenario::rectangle_room(6, 5);
    Rng rng(707);
    bool align_idem = true, norm_idem = true;
    for (int t = 0; t < 100; ++t) {
        std::vector<ObjectNode> objs;
        for (int i = 0; i < 6; ++i) {
            objs.push_back(scenario::box(fmt::format("o{}", i), Category::storage, {rng.uniform(0.3, 5.7), rng.uniform(0.3, 4.7)},
                                         {rng.uniform(0.2, 1.0), rng.uniform(0.2, 0.6)}, 1.0, rng.uniform(-kPi, kPi)));
        }
        const auto once = align_objects_to_walls(objs, room.walls, cfg);
        if (align_objects_to_walls(once, room.walls, cfg) != once) align_idem = false;
        Mesh m = box_mesh(Vec3(rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 3)));
        for (auto& v : m.vertices) v += Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
        const Mesh n1 = normalize_mesh(m);
        const Mesh n2 = normalize_mesh(n1);
        if (n1.vertices != n2.vertices || n1.triangles != n2.triangles) norm_idem = false;
    }
    return {simple == 1000 && u_edges == 4 && align_idem && norm_idem,
            fmt::format("{} / 1000 simple closed polygons; U shape -> {} edges; align idempotent {}; normalize idempotent {}",
                        simple, u_edges, align_idem, norm_idem)};
}

Outcome clustering()
{
    int recovered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto p = scenario::planted_clusters(seed);
        const auto labels = select_clusters(p.points, seed);
        if (oracle::same_partition(labels, p.labels)) ++recovered;
    }
    Rng rng(808);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + int(rng.below(49));
        const int k = 1 + int(rng.below(std::min(n, 6)));
        EmbeddingMatrix pts(n, 5);
        for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
        std::vector<int> labels(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) labels[static_cast<size_t>(i)] = i < k ? i : int(rng.below(static_cast<std::uint64_t>(k)));
        worst = std::max(worst, std::abs(silhouette_score(pts, labels) - oracle::silhouette(pts, labels)));
    }
    return {recovered >= 95 && worst <= 1e-9,
            fmt::format("planted k recovered in {} / 100; silhouette max |diff| {:.2e}", recovered, worst)};
}

Outcome retrieval_chain()
{
    const fs::path dir = oracle::temp_dir("acceptance-retrieval");
    const auto s = scenario::retrieval_scene(dir, 50, 909);
    StubEmbeddingProvider provider(64, 0);
    StubOracle chooser;
    RetrievalConfig cfg;
    cfg.kmeans_seed = 3;
    const RetrievalResult res = retrieve_scene(s.scan, s.base, s.db, provider, chooser, nullptr, cfg);
    int holds = 0;
    size_t covered = 0;
    for (const auto& t : res.traces) {
        holds += t.subset_chain_holds() ? 1 : 0;
        covered += t.members.size();
    }
    double planted_score = -1.0;
    std::string planted_first;
    for (const auto& t : res.traces) {
        if (t.object_id == s.planted_object && !t.stage2_top.empty()) {
            planted_first = t.stage2_top.front().id;
            planted_score = t.stage2_top.front().score;
        }
    }
    fs::remove_all(dir);
    const bool chain = holds == static_cast<int>(res.traces.size()) && covered == 50 && res.assignment.size() == 50;
    const bool planted = planted_first == s.planted_asset && std::abs(planted_score - 1.0) <= 1e-6;
    return {chain && planted, fmt::format("chain holds on {} / {} traces covering {} objects; planted asset {} first with score {:.9f}",
                                          holds, res.traces.size(), covered, planted_first, planted_score)};
}

Outcome ssim_rmse()
{
    Rng rng(1010);
    bool self_ok = true;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Image a = oracle::random_image(16, 16, 3, rng);
        Image b = a;
        for (auto& v : b.data) v = static_cast<std::uint8_t>(std::clamp(int(v) + int(rng.below(61)) - 30, 0, 255));
        if (image_ssim(a, a) != 1.0 || image_rmse(a, a) != 0.0) self_ok = false;
        worst = std::max(worst, std::abs(image_ssim(a, b) - oracle::ssim_windows(a, b)));
    }
    return {self_ok && worst <= 1e-9, fmt::format("self comparison exact {}; windowed oracle max |diff| {:.2e}", self_ok, worst)};
}

Outcome end_to_end(const fs::path& cli, const fs::path& fixtures)
{
    const fs::path work = oracle::temp_dir("acceptance-e2e");
    const fs::path cache = work / "cache";
    auto run = [&](const fs::path& out, bool offline) {
        std::vector<std::string> args = {"-q", "--config", (fixtures / "config.json").string(), "--cache", cache.string()};
        if (offline) args.push_back("--offline");
        for (const auto& a : {"run", "--scan", "", "--db", "", "--matdb", "", "--out", ""}) args.emplace_back(a);
        args[args.size() - 7] = (fixtures / "scan" / "scan.json").string();
        args[args.size() - 5] = (fixtures / "assets").string();
        args[args.size() - 3] = (fixtures / "materials").string();
        args[args.size() - 1] = out.string();
        return run_command(cli.string(), args);
    };
    const auto start = Clock::now();
    const auto r1 = run(work / "run1", false);
    const auto r2 = run(work / "run2", false);
    const auto r3 = run(work / "run3", true);
    const double elapsed = seconds_since(start);
    std::string detail;
    bool ok = r1.exit_code == 0 && r2.exit_code == 0 && r3.exit_code == 0;
    if (!ok) {
        detail = fmt::format("exit codes {} {} {}: {}", r1.exit_code, r2.exit_code, r3.exit_code, r1.output + r3.output);
    } else {
        const auto h1 = sha256_file(work / "run1" / "scene.json");
        const auto h2 = sha256_file(work / "run2" / "scene.json");
        const auto h3 = sha256_file(work / "run3" / "scene.json");
        const json m3 = json::parse(read_text_file(work / "run3" / "manifest.json"));
        ok = h1 == h2 && h2 == h3 && m3.at("network_calls").get<int>() == 0 && elapsed <= 60.0;
        detail = fmt::format("scene.json {} / {} / {} (offline); {} network calls offline; {:.2f} s total", h1.substr(0, 12),
                             h2.substr(0, 12), h3.substr(0, 12), m3.at("network_calls").get<int>(), elapsed);
    }
    fs::remove_all(work);
    return {ok, detail};
}

Outcome bench_identity(const fs::path& cli, const fs::path& fixtures)
{
    const fs::path work = oracle::temp_dir("acceptance-bench");
    const auto r = run_command(cli.string(), {"bench", "similarity", "--pairs", (fixtures / "bench" / "identity.csv").string(),
                                              "--n", "10000", "--seed", "5", "--out", (work / "report.json").string()});
    const auto md = run_command(cli.string(), {"bench", "similarity", "--pairs", (fixtures / "bench" / "identity.csv").string(),
                                               "--n", "2000", "--seed", "5", "--out", (work / "report.md").string()});
    if (r.exit_code != 0 || md.exit_code != 0) return {false, "bench command failed: " + r.output + md.output};
    const json rep = json::parse(read_text_file(work / "report.json"));
    const std::string table = read_text_file(work / "report.md");
    fs::remove_all(work);

    bool zeros = rep.at("avg_cad").get<double>() == 0.0 && rep.at("avg_class").get<double>() == 0.0;
    double weighted = 0.0;
    long count = 0;
    for (const auto& c : rep.at("categories")) {
        zeros = zeros && c.at("mean").get<double>() == 0.0;
        weighted += c.at("mean").get<double>() * c.at("count").get<double>();
        count += c.at("count").get<long>();
    }
    for (const auto& i : rep.at("instances")) zeros = zeros && i.at("cd_l1").get<double>() == 0.0;
    const bool identity = count == static_cast<long>(rep.at("instances").size()) && weighted / count == rep.at("avg_cad").get<double>();
    const bool shape = table.find("| Method | avg/CAD") != std::string::npos && table.find("avg/class") != std::string::npos;
    return {zeros && identity && shape && rep.at("excluded").empty(),
            fmt::format("{} instances in {} categories, all zero {}; weighted identity {}; table header present {}",
                        rep.at("instances").size(), rep.at("categories").size(), zeros, identity, shape)};
}

} // namespace

int main(int argc, char** argv)
{
    fs::path cli = SCENESMITH_CLI_PATH;
    fs::path fixtures = SCENESMITH_FIXTURE_DIR;
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::strcmp(argv[i], "--cli") == 0) cli = argv[i + 1];
        if (std::strcmp(argv[i], "--fixtures") == 0) fixtures = argv[i + 1];
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"chamfer matches brute force; 10k x 10k under 1 s", chamfer_oracle},
        {"chamfer hand values and symmetry", chamfer_hand_values},
        {"surface sampling statistics and bit stability", sampling_statistics},
        {"albedo shift exactness and sRGB/LAB round trip", albedo_exactness},
        {"largest rectangle maximality", rectangle_maximality},
        {"collision solver and SAT verdicts", collision_solver},
        {"wall closure, U-shape join and idempotence", wall_closure},
        {"planted-k clustering and silhouette oracle", clustering},
        {"retrieval subset chain and planted asset", retrieval_chain},
        {"SSIM and RMSE identities and windowed oracle", ssim_rmse},
        {"end-to-end determinism on the fixture", [&] { return end_to_end(cli, fixtures); }},
        {"identity benchmark report", [&] { return bench_identity(cli, fixtures); }},
    };
    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto start = Clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        fmt::print("{} {:>2}. {} | {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail, seconds_since(start));
        std::fflush(stdout);
    }
    fmt::print("{} / {} criteria passed\n", criteria.size() - static_cast<size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
