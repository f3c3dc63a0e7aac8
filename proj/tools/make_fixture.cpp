// Writes the synthetic fixture: a two-room scan with frames, crops and masks,
// a small asset database, a material database, a config and a similarity pair set.
#include <scenesmith/digest.hpp>
#include <scenesmith/image.hpp>
#include <scenesmith/material.hpp>
#include <scenesmith/mesh.hpp>
#include <scenesmith/random.hpp>
#include <scenesmith/retrieval.hpp>
#include <scenesmith/scene_model.hpp>
#include <scenesmith/services.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <array>
#include <cmath>

namespace fs = std::filesystem;
using namespace scenesmith;

namespace {

constexpr int kDim = 64;
constexpr std::uint64_t kStubSeed = 0;

using Rgb = std::array<int, 3>;

struct Placed {
    ObjectNode node;
    Rgb color;
};

ObjectNode object(std::string id, Category cat, std::string sub, Vec3 center, Vec3 dims, double yaw)
{
    ObjectNode o;
    o.id = std::move(id);
    o.category = cat;
    o.subcategory = std::move(sub);
    o.box.center = center;
    o.box.dims = dims;
    o.box.yaw = yaw;
    return o;
}

CameraFrame camera(std::string id, const Vec3& eye, const Vec3& forward_dir)
{
    CameraFrame f;
    f.id = std::move(id);
    const Vec3 forward = forward_dir.normalized();
    const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
    const Vec3 down = forward.cross(right);
    f.rotation.row(0) = right.transpose();
    f.rotation.row(1) = down.transpose();
    f.rotation.row(2) = forward.transpose();
    f.translation = -f.rotation * eye;
    f.width = 320;
    f.height = 240;
    f.fx = f.fy = 220.0;
    f.cx = 160.0;
    f.cy = 120.0;
    f.image = "frames/" + f.id + ".png";
    return f;
}

std::array<Vec3, 8> corners(const OrientedBox& b)
{
    const Vec2 lat = b.lateral(), fac = b.facing();
    std::array<Vec3, 8> out;
    int k = 0;
    for (int i : {-1, 1}) {
        for (int j : {-1, 1}) {
            for (int z : {-1, 1}) {
                const Vec2 p = b.center2() + 0.5 * i * b.width() * lat + 0.5 * j * b.length() * fac;
                out[k++] = Vec3(p.x(), p.y(), b.center.z() + 0.5 * z * b.height());
            }
        }
    }
    return out;
}

struct Projection {
    bool ok = false;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0; // clipped, half-open
    double visibility = 0.0;
    double depth = 0.0;
};

Projection project(const OrientedBox& box, const CameraFrame& f)
{
    double u0 = 1e300, v0 = 1e300, u1 = -1e300, v1 = -1e300, depth = 0.0;
    for (const Vec3& c : corners(box)) {
        const Vec3 p = f.rotation * c + f.translation;
        if (p.z() < 0.1) return {};
        const double u = f.fx * p.x() / p.z() + f.cx, v = f.fy * p.y() / p.z() + f.cy;
        u0 = std::min(u0, u), u1 = std::max(u1, u), v0 = std::min(v0, v), v1 = std::max(v1, v);
        depth += p.z() / 8.0;
    }
    Projection pr;
    pr.x0 = std::clamp(static_cast<int>(std::floor(u0)), 0, f.width);
    pr.x1 = std::clamp(static_cast<int>(std::ceil(u1)), 0, f.width);
    pr.y0 = std::clamp(static_cast<int>(std::floor(v0)), 0, f.height);
    pr.y1 = std::clamp(static_cast<int>(std::ceil(v1)), 0, f.height);
    const double full = (u1 - u0) * (v1 - v0);
    const double inside = (std::clamp(u1, 0.0, double(f.width)) - std::clamp(u0, 0.0, double(f.width))) *
                          (std::clamp(v1, 0.0, double(f.height)) - std::clamp(v0, 0.0, double(f.height)));
    pr.ok = pr.x1 - pr.x0 >= 8 && pr.y1 - pr.y0 >= 8;
    pr.visibility = full > 0 ? std::round(inside / full * 1000.0) / 1000.0 : 0.0;
    pr.depth = depth;
    return pr;
}

/// Flat colour with mild deterministic texture.
Image textured(int w, int h, Rgb base, std::uint64_t seed, int amplitude = 12)
{
    Rng rng(seed);
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int n = static_cast<int>(rng.below(2 * amplitude + 1)) - amplitude;
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(base[c] + n, 0, 255));
        }
    }
    return img;
}

EmbeddingMatrix embed_rows(const std::vector<std::vector<std::uint8_t>>& images)
{
    EmbeddingMatrix m(static_cast<Eigen::Index>(images.size()), kDim);
    for (size_t i = 0; i < images.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = stub_embedding(images[i], kDim, kStubSeed).transpose();
    return m;
}

struct AssetSpec {
    std::string id;
    Category category;
    std::string subcategory;
    Vec3 dims; // (w, h, l)
    Rgb color;
    bool articulated = false;
};

// Mesh in the asset frame: x lateral, y front, z up, resting on z = 0.
Mesh asset_mesh(const AssetSpec& a)
{
    Mesh m = box_mesh(Vec3(a.dims.x(), a.dims.z(), a.dims.y()));
    for (auto& v : m.vertices) v.z() += 0.5 * a.dims.y();
    return m;
}

void write_asset(const fs::path& root, const AssetSpec& spec, const std::vector<Image>& extra_views)
{
    const fs::path dir = root / spec.id;
    fs::create_directories(dir / "views");
    const Mesh mesh = asset_mesh(spec);
    save_obj(dir / "mesh.obj", mesh);

    AssetRecord rec;
    rec.id = spec.id;
    rec.category = spec.category;
    rec.subcategory = spec.subcategory;
    rec.articulated = spec.articulated;
    if (spec.articulated) rec.joints = json::array({{{"name", "door"}, {"type", "revolute"}, {"axis", {0, 0, 1}}}});

    std::vector<Image> views = extra_views;
    const std::uint64_t seed = digest64(std::span(reinterpret_cast<const std::uint8_t*>(spec.id.data()), spec.id.size()));
    views.push_back(textured(48, 48, spec.color, seed));
    views.push_back(textured(48, 48, {spec.color[0] / 2 + 60, spec.color[1] / 2 + 60, spec.color[2] / 2 + 60}, seed + 1));

    std::vector<std::vector<std::uint8_t>> encoded;
    for (size_t i = 0; i < views.size(); ++i) {
        const std::string name = fmt::format("views/view-{}.png", i);
        encoded.push_back(encode_png(views[i]));
        write_file_bytes(dir / name, encoded.back());
        rec.views.push_back({name, {{"azimuth_deg", 45 * static_cast<int>(i)}, {"elevation_deg", 20}}});
    }
    rec.embeddings = embed_rows(encoded);
    const int tris = static_cast<int>(mesh.triangles.size());
    rec.segments = {{"body", 0, tris / 2, rec.views[0].image}, {"trim", tris / 2, tris, rec.views[1].image}};
    write_text_file(dir / "manifest.json", dump_canonical(manifest_json(rec)));
    write_ssem(dir / "embeddings.bin", rec.embeddings);
}

void write_material(const fs::path& root, const std::string& id, const std::string& category, Rgb color, int amplitude)
{
    const fs::path dir = root / id;
    fs::create_directories(dir);
    const std::uint64_t seed = digest64(std::span(reinterpret_cast<const std::uint8_t*>(id.data()), id.size()));
    const auto albedo = encode_png(textured(32, 32, color, seed, amplitude));
    write_file_bytes(dir / "albedo.png", albedo);
    write_file_bytes(dir / "roughness.png", encode_png(textured(32, 32, {128, 128, 128}, seed + 1, 4)));
    MaterialRecord m;
    m.id = id;
    m.category = category;
    m.roughness = "roughness.png";
    m.tags = {category};
    m.embeddings = embed_rows({albedo});
    write_text_file(dir / "manifest.json", dump_canonical(manifest_json(m)));
    write_ssem(dir / "embeddings.bin", m.embeddings);
}

WallSegment wall(std::string id, Vec2 p0, Vec2 p1)
{
    WallSegment w;
    w.id = std::move(id);
    w.p0 = p0;
    w.p1 = p1;
    w.height = 2.6;
    return w;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Writes the synthetic scan, asset and material fixtures."};
    std::string out = "fixtures";
    app.add_option("--out", out);
    CLI11_PARSE(app, argc, argv);
    const fs::path root(out);
    fs::remove_all(root / "scan");
    fs::remove_all(root / "assets");
    fs::remove_all(root / "materials");
    fs::remove_all(root / "bench");

    // Two rooms sharing the wall at x = 5: A is 5 x 4, B is 3 x 4. Slightly noisy endpoints.
    Scan scan;
    scan.walls = {wall("w-a-south", {0.0, 0.0}, {5.01, 0.0}),   wall("w-shared", {5.0, 0.02}, {5.0, 4.0}),
                  wall("w-a-north", {4.98, 4.0}, {0.0, 4.0}),   wall("w-a-west", {0.0, 3.99}, {0.01, 0.0}),
                  wall("w-b-south", {5.02, 0.0}, {8.0, 0.01}),  wall("w-b-east", {8.0, 0.0}, {8.0, 4.0}),
                  wall("w-b-north", {8.0, 4.0}, {5.0, 3.98})};
    scan.walls[2].openings.push_back({"w-a-north/opening-0", OpeningKind::window, 1.2, 2.4, 0.9, 2.0});
    scan.walls[3].openings.push_back({"w-a-west/opening-0", OpeningKind::door, 1.0, 1.8, 0.0, 2.1});
    scan.walls[4].openings.push_back({"w-b-south/opening-0", OpeningKind::door, 0.6, 1.5, 0.0, 2.1});

    std::vector<Placed> placed = {
        {object("bed", Category::bed, "double bed", {1.5, 2.98, 0.3}, {1.6, 0.6, 2.0}, kPi), {170, 120, 90}},
        {object("sofa", Category::sofa, "three seater", {0.46, 0.95, 0.4}, {1.6, 0.8, 0.9}, -kPi / 2), {90, 110, 160}},
        {object("storage", Category::storage, "low cabinet", {3.5, 0.24, 0.3}, {1.2, 0.6, 0.45}, 0.02), {200, 190, 170}},
        {object("television", Category::television, "flat screen", {3.5, 0.22, 0.95}, {1.0, 0.7, 0.08}, 0.0), {30, 30, 35}},
        {object("table", Category::table, "dining table", {6.5, 2.0, 0.375}, {0.8, 0.75, 1.2}, kPi / 2), {150, 100, 60}},
        {object("chair-1", Category::chair, "dining chair", {6.5, 1.05, 0.45}, {0.45, 0.9, 0.5}, 0.0), {120, 80, 50}},
        {object("chair-2", Category::chair, "dining chair", {6.5, 2.95, 0.45}, {0.45, 0.9, 0.5}, kPi), {120, 80, 50}},
        {object("refrigerator", Category::refrigerator, "double door", {7.6, 3.6, 0.9}, {0.7, 1.8, 0.7}, kPi), {220, 222, 225}},
    };
    placed[0].node.wall_attachment = "w-a-north";
    placed[1].node.wall_attachment = "w-a-west";
    placed[2].node.wall_attachment = "w-a-south";
    placed[7].node.articulated = true;

    scan.frames = {camera("f0", {4.0, -3.5, 2.6}, {0.0, 1.0, -0.4}), camera("f1", {4.0, 7.5, 2.6}, {0.0, -1.0, -0.4}),
                   camera("f2", {-3.0, 2.0, 2.6}, {1.0, 0.0, -0.35})};

    const fs::path scan_dir = root / "scan";
    fs::create_directories(scan_dir / "frames");
    fs::create_directories(scan_dir / "crops");

    // Frames: a floor-coloured background with each visible box painted far to near.
    std::map<std::string, Image> frames;
    std::map<std::string, std::map<std::string, Projection>> seen; // frame -> object -> projection
    for (const auto& f : scan.frames) {
        Image img(f.width, f.height, 3);
        for (int y = 0; y < f.height; ++y) {
            for (int x = 0; x < f.width; ++x) {
                const int g = 170 + (y * 40) / f.height;
                img.at(x, y, 0) = static_cast<std::uint8_t>(g);
                img.at(x, y, 1) = static_cast<std::uint8_t>(g - 10);
                img.at(x, y, 2) = static_cast<std::uint8_t>(g - 25);
            }
        }
        std::vector<std::pair<double, size_t>> order;
        for (size_t i = 0; i < placed.size(); ++i) {
            const Projection pr = project(placed[i].node.box, f);
            if (!pr.ok) continue;
            seen[f.id][placed[i].node.id] = pr;
            order.push_back({-pr.depth, i});
        }
        std::sort(order.begin(), order.end());
        for (const auto& [neg_depth, i] : order) {
            const Projection& pr = seen[f.id][placed[i].node.id];
            const Image tex = textured(pr.x1 - pr.x0, pr.y1 - pr.y0, placed[i].color, 1000 + i, 10);
            for (int y = pr.y0; y < pr.y1; ++y) {
                for (int x = pr.x0; x < pr.x1; ++x) {
                    for (int c = 0; c < 3; ++c) img.at(x, y, c) = tex.at(x - pr.x0, y - pr.y0, c);
                }
            }
        }
        write_png(scan_dir / f.image, img);
        frames[f.id] = std::move(img);
    }

    // Crops, sorted by visibility, and masks of the unoccluded projected box.
    std::map<std::string, Image> first_crop;
    for (auto& p : placed) {
        std::vector<CropRef> crops;
        for (const auto& f : scan.frames) {
            auto it = seen[f.id].find(p.node.id);
            if (it == seen[f.id].end()) continue;
            const Projection& pr = it->second;
            CropRef c;
            c.frame_id = f.id;
            c.bbox_px = {pr.x0, pr.y0, pr.x1 - pr.x0, pr.y1 - pr.y0};
            c.visibility = pr.visibility;
            c.image = fmt::format("crops/{}-{}.png", p.node.id, f.id);
            const Image crop = frames[f.id].crop(pr.x0, pr.y0, pr.x1 - pr.x0, pr.y1 - pr.y0);
            write_png(scan_dir / c.image, crop);
            crops.push_back(c);

            Image mask(f.width, f.height, 1);
            const Image& frame = frames[f.id];
            for (int y = pr.y0; y < pr.y1; ++y) {
                for (int x = pr.x0; x < pr.x1; ++x) {
                    // inside only where this object's own colour survived occlusion
                    int diff = 0;
                    for (int ch = 0; ch < 3; ++ch) diff = std::max(diff, std::abs(frame.at(x, y, ch) - p.color[ch]));
                    mask.at(x, y, 0) = diff <= 10 ? 255 : 0;
                }
            }
            fs::create_directories(scan_dir / "masks" / p.node.id);
            write_png(scan_dir / "masks" / p.node.id / (f.id + ".png"), mask);
        }
        std::stable_sort(crops.begin(), crops.end(), [](const CropRef& a, const CropRef& b) { return a.visibility > b.visibility; });
        if (!crops.empty()) first_crop[p.node.id] = read_png(scan_dir / crops.front().image);
        p.node.crops = std::move(crops);
        scan.objects.push_back(p.node);
    }
    // one pass through the reader settles yaw wrapping and degree rounding, so the
    // written file reads back and re-serialises to the same bytes
    write_text_file(scan_dir / "scan.json", dump_canonical(to_json(validate_scan(to_json(scan)).scan)));

    // Assets: two or three per category. The first asset of a few categories carries the
    // object's own crop as a view, so the stub provider ranks it first.
    const fs::path assets = root / "assets";
    const std::vector<std::pair<AssetSpec, std::string>> specs = {
        {{"bed-oak-double", Category::bed, "double bed", {1.6, 0.55, 2.05}, {175, 125, 95}}, "bed"},
        {{"bed-metal-single", Category::bed, "single bed", {1.0, 0.5, 2.0}, {80, 80, 85}}, ""},
        {{"sofa-blue-3", Category::sofa, "three seater", {1.7, 0.8, 0.9}, {90, 110, 165}}, "sofa"},
        {{"sofa-grey-2", Category::sofa, "two seater", {1.3, 0.8, 0.85}, {130, 130, 130}}, ""},
        {{"storage-low-white", Category::storage, "low cabinet", {1.2, 0.6, 0.45}, {205, 195, 175}}, ""},
        {{"storage-tall-oak", Category::storage, "bookshelf", {0.9, 1.9, 0.35}, {160, 120, 80}}, ""},
        {{"tv-55", Category::television, "flat screen", {1.22, 0.72, 0.07}, {25, 25, 30}}, "television"},
        {{"tv-43", Category::television, "flat screen", {0.96, 0.56, 0.07}, {40, 40, 45}}, ""},
        {{"table-dining-oak", Category::table, "dining table", {0.8, 0.75, 1.2}, {150, 100, 60}}, "table"},
        {{"table-coffee-glass", Category::table, "coffee table", {0.6, 0.4, 1.1}, {190, 210, 215}}, ""},
        {{"chair-dining-walnut", Category::chair, "dining chair", {0.46, 0.92, 0.5}, {120, 80, 50}}, "chair-1"},
        {{"chair-dining-white", Category::chair, "dining chair", {0.44, 0.85, 0.5}, {230, 230, 230}}, ""},
        {{"chair-office-black", Category::chair, "office chair", {0.6, 1.1, 0.6}, {20, 20, 20}}, ""},
        {{"fridge-steel-double", Category::refrigerator, "double door", {0.9, 1.8, 0.72}, {215, 220, 225}, true}, ""},
        {{"fridge-white-single", Category::refrigerator, "single door", {0.6, 1.7, 0.65}, {240, 240, 240}, true}, ""},
    };
    for (const auto& [spec, planted] : specs) {
        std::vector<Image> extra;
        if (!planted.empty()) extra.push_back(first_crop.at(planted));
        write_asset(assets, spec, extra);
    }

    const fs::path materials = root / "materials";
    write_material(materials, "wood-oak", "wood", {165, 120, 80}, 14);
    write_material(materials, "wood-walnut", "wood", {100, 65, 40}, 14);
    write_material(materials, "fabric-linen", "fabric", {200, 190, 170}, 6);
    write_material(materials, "fabric-denim", "fabric", {70, 90, 140}, 8);
    write_material(materials, "metal-steel", "metal", {190, 192, 198}, 4);
    write_material(materials, "metal-black", "metal", {35, 35, 38}, 3);
    write_material(materials, "plastic-white", "plastic", {235, 235, 235}, 2);
    write_material(materials, "plastic-grey", "plastic", {128, 128, 128}, 2);

    // Identity benchmark pairs: every asset mesh against itself.
    const fs::path bench = root / "bench";
    fs::create_directories(bench);
    std::string csv = "gt,retrieved,category\n";
    for (const auto& [spec, planted] : specs) {
        const std::string mesh = fmt::format("../assets/{}/mesh.obj", spec.id);
        csv += fmt::format("{},{},{}\n", mesh, mesh, to_string(spec.category));
    }
    write_text_file(bench / "identity.csv", csv);

    const json config = {{"seeds", {{"sampling", 7}, {"kmeans", 11}, {"stub", kStubSeed}}},
                         {"services", {{"embedding", "stub"}, {"oracle", "stub"}, {"physics_oracle", "stub"}, {"embedding_dim", kDim}}}};
    write_text_file(root / "config.json", dump_canonical(config));
    fmt::print("fixture written to {}\n", root.string());
    return 0;
}
