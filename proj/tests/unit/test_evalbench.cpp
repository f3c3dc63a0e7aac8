#include <doctest.h>

#include "oracles.hpp"

#include <scenesmith/errors.hpp>
#include <scenesmith/evalbench.hpp>
#include <scenesmith/mesh.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

using namespace scenesmith;

namespace {

Mesh translated(Mesh m, const Vec3& t)
{
    for (auto& v : m.vertices) v += t;
    return m;
}

Mesh uv_sphere(int rings, int segments)
{
    Mesh m;
    m.vertices.push_back({0, 0, 1});
    for (int r = 1; r < rings; ++r) {
        const double theta = kPi * r / rings;
        for (int s = 0; s < segments; ++s) {
            const double phi = 2 * kPi * s / segments;
            m.vertices.push_back({std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)});
        }
    }
    m.vertices.push_back({0, 0, -1});
    const int south = static_cast<int>(m.vertices.size()) - 1;
    auto ring = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
    for (int s = 0; s < segments; ++s) m.triangles.push_back({0, ring(1, s), ring(1, s + 1)});
    for (int r = 1; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            m.triangles.push_back({ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)});
            m.triangles.push_back({ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)});
        }
    }
    for (int s = 0; s < segments; ++s) m.triangles.push_back({south, ring(rings - 1, s + 1), ring(rings - 1, s)});
    return m;
}

PointCloud cloud(std::vector<Vec3> pts)
{
    PointCloud c;
    c.points = std::move(pts);
    return c;
}

} // namespace

TEST_CASE("normalize_mesh")
{
    const Mesh cube = translated(box_mesh({2, 2, 2}), {5, 5, 5});
    const Mesh unit = normalize_mesh(cube);
    const Aabb b = bounds(unit);
    CHECK((b.min - Vec3::Constant(-0.5)).norm() < 1e-12);
    CHECK((b.max - Vec3::Constant(0.5)).norm() < 1e-12);

    const Aabb flat = bounds(normalize_mesh(box_mesh({4, 1, 2})));
    CHECK((flat.extent() - Vec3(1, 0.25, 0.5)).norm() < 1e-12);
    CHECK(flat.center().norm() < 1e-12);

    CHECK(normalize_mesh(unit) == unit);
    const Mesh odd = normalize_mesh(translated(uv_sphere(7, 11), {0.3, -2, 9}));
    CHECK(normalize_mesh(odd) == odd);

    CHECK_THROWS_AS(normalize_mesh(Mesh{}), BenchmarkError);
}

TEST_CASE("OBJ round trip and fan triangulation")
{
    const Mesh quad = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n");
    CHECK(quad.triangles.size() == 2);
    CHECK(surface_area(quad) == doctest::Approx(1.0));
    const Mesh rel = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
    REQUIRE(rel.triangles.size() == 1);
    CHECK(rel.triangles[0] == std::array<int, 3>{0, 1, 2});
    const Mesh s = uv_sphere(5, 8);
    CHECK(parse_obj(to_obj(s)) == s);
}

TEST_CASE("samples on a single triangle stay inside it")
{
    Mesh tri;
    tri.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}};
    tri.triangles = {{0, 1, 2}};
    const PointCloud pc = sample_surface(tri, 2000, 9);
    REQUIRE(pc.points.size() == 2000);
    for (const auto& p : pc.points) {
        const double u = p.x() / 2.0, v = p.y();
        CHECK(u >= -1e-12);
        CHECK(v >= -1e-12);
        CHECK(u + v <= 1 + 1e-12);
        CHECK(p.z() == 0.0);
    }
    CHECK(sample_surface(tri, 2000, 9).points == pc.points);
    CHECK(sample_surface(tri, 2000, 10).points != pc.points);
}

TEST_CASE("chamfer distance")
{
    const PointCloud a = cloud({{0, 0, 0}});
    const PointCloud b = cloud({{1, 1, 1}});
    CHECK(chamfer_l1(a, b) == 6.0);
    CHECK(chamfer_l1(a, a) == 0.0);

    Rng rng(31);
    for (int k = 0; k < 20; ++k) {
        std::vector<Vec3> pa(50 + rng.below(150)), pb(50 + rng.below(150));
        for (auto& p : pa) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (auto& p : pb) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const PointCloud ca = cloud(pa), cb = cloud(pb);
        CHECK(std::abs(chamfer_l1(ca, cb) - oracle::chamfer_bruteforce(pa, pb)) < 1e-12);
        CHECK(chamfer_l1(ca, cb) == chamfer_l1(cb, ca));
        CHECK(chamfer_l1(ca, ca) == 0.0);
    }
}

TEST_CASE("representative views by reprojection count")
{
    auto frame = [](const std::string& id, const Vec3& t) {
        CameraFrame f;
        f.id = id;
        f.translation = t;
        f.fx = f.fy = 100;
        f.cx = 50;
        f.cy = 40;
        f.width = 100;
        f.height = 80;
        return f;
    };
    SUBCASE("pinhole centre and depth gate")
    {
        const std::vector<Vec3> ahead = {{0, 0, 1}};
        const std::vector<CameraFrame> one = {frame("f", Vec3::Zero())};
        CHECK(select_representative_views(ahead, one) == std::vector<std::string>{"f"});
        const std::vector<Vec3> behind = {{0, 0, -1}};
        CHECK_THROWS_AS(select_representative_views(behind, one), BenchmarkError);
    }
    SUBCASE("top four match a hand count")
    {
        std::vector<Vec3> points;
        for (int k = 0; k < 100; ++k) points.push_back({0.01 * k + 0.005, 0.0, 1.0});
        std::vector<CameraFrame> frames;
        const std::vector<double> shifts = {0.0, -0.2, -0.4, -0.7, -0.9, 0.3};
        for (size_t i = 0; i < shifts.size(); ++i) frames.push_back(frame("f" + std::to_string(i), {shifts[i], 0, 0}));
        frames.push_back(frame("behind", {0, 0, -3}));

        std::vector<std::pair<int, std::string>> counts;
        for (const auto& f : frames) {
            int seen = 0;
            for (const auto& p : points) {
                const Vec3 c = f.rotation * p + f.translation;
                if (c.z() <= 0) continue;
                const double u = f.fx * c.x() / c.z() + f.cx, v = f.fy * c.y() / c.z() + f.cy;
                if (u >= 0 && u < f.width && v >= 0 && v < f.height) ++seen;
            }
            counts.emplace_back(-seen, f.id);
        }
        std::sort(counts.begin(), counts.end());
        std::vector<std::string> expected;
        for (size_t i = 0; i < 4; ++i) expected.push_back(counts[i].second);
        CHECK(select_representative_views(points, frames) == expected);
    }
}

TEST_CASE("image metrics")
{
    Rng rng(8);
    const Image a = oracle::random_image(16, 16, 3, rng);
    const Image b = oracle::random_image(16, 16, 3, rng);
    CHECK(image_rmse(a, a) == 0.0);
    CHECK(image_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(image_rmse(Image(8, 8, 3, 0), Image(8, 8, 3, 255)) == doctest::Approx(1.0));
    CHECK(std::abs(image_ssim(a, b) - oracle::ssim_windows(a, b)) < 1e-9);
    CHECK(std::abs(image_ssim(a, b) - image_ssim(b, a)) < 1e-12);
    const double s = image_ssim(a, b);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
}

TEST_CASE("similarity benchmark")
{
    const auto dir = oracle::temp_dir("evalbench");
    save_obj(dir / "cube.obj", box_mesh({1, 1, 1}));
    save_obj(dir / "cube2.obj", box_mesh({2, 1, 1}));
    save_obj(dir / "sphere.obj", uv_sphere(24, 48));

    SUBCASE("identity pairs are all zero and aggregates agree")
    {
        const std::vector<SimilarityPair> pairs = {{dir / "cube.obj", dir / "cube.obj", "box"},
                                                   {dir / "cube2.obj", dir / "cube2.obj", "box"},
                                                   {dir / "sphere.obj", dir / "sphere.obj", "ball"}};
        const MetricReport r = run_similarity_benchmark(pairs, 2000, 3);
        REQUIRE(r.instances.size() == 3);
        for (const auto& i : r.instances) CHECK(i.cd_l1 == 0.0);
        REQUIRE(r.avg_cad);
        CHECK(*r.avg_cad == 0.0);
        REQUIRE(r.categories.size() == 2);
        CHECK(r.categories[0].category == "ball");
    }
    SUBCASE("cube against sphere matches a small brute-force pipeline")
    {
        const std::vector<SimilarityPair> pairs = {{dir / "cube.obj", dir / "sphere.obj", "shape"}};
        const MetricReport r = run_similarity_benchmark(pairs, 2000, 1);
        REQUIRE(r.instances.size() == 1);
        const Mesh cube = normalize_mesh(load_obj(dir / "cube.obj"));
        const Mesh sphere = normalize_mesh(load_obj(dir / "sphere.obj"));
        std::vector<double> brute;
        for (std::uint64_t seed : {11u, 12u}) {
            const auto pa = sample_surface(cube, 2000, seed).points;
            const auto pb = sample_surface(sphere, 2000, seed + 100).points;
            brute.push_back(oracle::chamfer_bruteforce(pa, pb));
        }
        CHECK(std::abs(brute[0] - brute[1]) / brute[0] < 0.05);
        const double mean = 0.5 * (brute[0] + brute[1]);
        CHECK(std::abs(r.instances[0].cd_l1 - mean) / mean < 0.05);
    }
    SUBCASE("aggregation identity")
    {
        const std::vector<SimilarityPair> pairs = {{dir / "cube.obj", dir / "sphere.obj", "a"},
                                                   {dir / "cube2.obj", dir / "sphere.obj", "a"},
                                                   {dir / "cube.obj", dir / "cube2.obj", "b"}};
        const MetricReport r = run_similarity_benchmark(pairs, 1000, 5, 2);
        REQUIRE(r.instances.size() == 3);
        double total = 0.0;
        std::map<std::string, std::vector<double>> per;
        for (const auto& i : r.instances) {
            total += i.cd_l1;
            per[i.category].push_back(i.cd_l1);
        }
        CHECK(*r.avg_cad == doctest::Approx(total / 3));
        double class_sum = 0.0;
        for (const auto& c : r.categories) {
            const auto& v = per[c.category];
            CHECK(c.count == v.size());
            CHECK(c.mean == doctest::Approx(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size())));
            class_sum += c.mean;
        }
        CHECK(*r.avg_class == doctest::Approx(class_sum / 2));
        // thread count does not change results
        CHECK(dump_canonical(to_json(run_similarity_benchmark(pairs, 1000, 5, 1))) == dump_canonical(to_json(r)));
    }
    SUBCASE("missing meshes are excluded, not fatal")
    {
        const std::vector<SimilarityPair> pairs = {{dir / "cube.obj", dir / "nope.obj", "a"}};
        const MetricReport r = run_similarity_benchmark(pairs, 500, 1);
        CHECK(r.instances.empty());
        CHECK(r.excluded.size() == 1);
        CHECK_FALSE(r.avg_cad);
    }
    SUBCASE("empty list gives an empty report")
    {
        const MetricReport r = run_similarity_benchmark({}, 500, 1);
        CHECK(r.instances.empty());
        CHECK_FALSE(r.avg_cad);
        CHECK_FALSE(r.avg_class);
        CHECK(to_markdown(r).find("|") != std::string::npos);
    }
    SUBCASE("pairs csv")
    {
        std::ofstream(dir / "pairs.csv") << "gt,retrieved,category\ncube.obj,sphere.obj,a\n";
        const auto pairs = read_similarity_pairs(dir / "pairs.csv");
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].gt == dir / "cube.obj");
        CHECK(pairs[0].category == "a");
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("image benchmark over a csv")
{
    const auto dir = oracle::temp_dir("imgbench");
    Rng rng(2);
    write_png(dir / "a.png", oracle::random_image(20, 12, 3, rng));
    write_png(dir / "b.png", oracle::random_image(20, 12, 3, rng));
    std::ofstream(dir / "pairs.csv") << "scan,render\na.png,a.png\na.png,b.png\n";
    const auto pairs = read_image_pairs(dir / "pairs.csv");
    REQUIRE(pairs.size() == 2);
    const ImageReport r = run_image_benchmark(pairs);
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0].rmse == 0.0);
    CHECK(r.pairs[0].ssim == doctest::Approx(1.0));
    CHECK(*r.rmse == doctest::Approx(0.5 * r.pairs[1].rmse));
    CHECK_FALSE(r.lpips);
    std::filesystem::remove_all(dir);
}
