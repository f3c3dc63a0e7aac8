#include "scenarios.hpp"

#include <scenesmith/digest.hpp>
#include <scenesmith/footprint.hpp>
#include <scenesmith/image.hpp>
#include <scenesmith/services.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace scenario {

Room rectangle_room(double width, double depth)
{
    Room r;
    r.polygon.vertices = {{0, 0}, {width, 0}, {width, depth}, {0, depth}};
    for (int i = 0; i < 4; ++i) {
        WallSegment w;
        w.id = fmt::format("w{}", i);
        w.p0 = r.polygon.vertices[static_cast<size_t>(i)];
        w.p1 = r.polygon.vertices[static_cast<size_t>((i + 1) % 4)];
        r.walls.push_back(w);
        r.polygon.source_segment_ids.push_back(w.id);
    }
    return r;
}

ObjectNode box(const std::string& id, Category cat, Vec2 center, Vec2 size, double height, double yaw)
{
    ObjectNode o;
    o.id = id;
    o.category = cat;
    o.subcategory = std::string(to_string(cat));
    o.box.center = Vec3(center.x(), center.y(), 0.5 * height);
    o.box.dims = Vec3(size.x(), height, size.y());
    o.box.yaw = yaw;
    return o;
}

namespace {

bool inside_room(const ObjectNode& o, const Room& room)
{
    for (const auto& c : o.box.footprint()) {
        if (!point_in_polygon(room.polygon.vertices, c) || distance_to_boundary(room.polygon.vertices, c) < 1e-3) return false;
    }
    return true;
}

// Relation-linked objects move rigidly together, so an overlap between two of
// them can never be separated. Such scenes have no solution and are redrawn.
bool rigid_groups_disjoint(const std::vector<ObjectNode>& objects, const Room& room)
{
    const SceneGraph g = infer_relations(objects, room.walls, SnapConfig{}, RelationConfig{});
    std::map<std::string, std::string> parent;
    for (const auto& o : objects) parent[o.id] = o.id;
    std::function<std::string(const std::string&)> find = [&](const std::string& x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (const auto& e : g.edges) {
        if (e.kind == Relation::attached_to_wall) continue;
        parent[find(e.src)] = find(e.dst);
    }
    for (const auto& r : find_overlaps(objects)) {
        if (find(r.a) == find(r.b)) return false;
    }
    return true;
}

} // namespace

CollisionScene random_collision_scene(std::uint64_t seed)
{
    Rng rng(seed);
    CollisionScene s;
    const double W = rng.uniform(5.0, 8.0), D = rng.uniform(4.0, 6.0);
    s.room = rectangle_room(W, D);
    const int n = 5 + static_cast<int>(rng.below(16));
    int made = 0, attempts = 0;
    while (made < n && attempts++ < 500) {
        const double roll = rng.uniform();
        const std::string id = fmt::format("o{:02}", made);
        if (roll < 0.3) {
            // against a wall, back flush with the wall line
            const size_t wi = rng.below(4);
            const WallSegment& w = s.room.walls[wi];
            const Vec2 size(rng.uniform(0.4, 1.4), rng.uniform(0.3, 0.7));
            const Vec2 dir = w.direction();
            const Vec2 inward = w.inward_normal();
            const double yaw = std::atan2(-inward.x(), inward.y());
            const double along = rng.uniform(0.5 * size.x() + 0.05, w.length() - 0.5 * size.x() - 0.05);
            const Vec2 c = w.p0 + along * dir + (0.5 * size.y() + 0.01) * inward;
            ObjectNode o = box(id, Category::storage, c, size, rng.uniform(0.5, 1.8), yaw);
            o.wall_attachment = w.id;
            if (!inside_room(o, s.room)) continue;
            s.objects.push_back(o);
            if (!rigid_groups_disjoint(s.objects, s.room)) {
                s.objects.pop_back();
                continue;
            }
            ++made;
        } else if (roll < 0.5 && made + 2 <= n) {
            const Vec2 c(rng.uniform(1.2, W - 1.2), rng.uniform(1.2, D - 1.2));
            const double yaw = rng.uniform(-kPi, kPi);
            ObjectNode table = box(id, Category::table, c, {rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0)}, 0.75, yaw);
            const double away = rng.uniform(-kPi, kPi);
            const Vec2 dir(std::cos(away), std::sin(away));
            const double dist = 0.5 * std::max(table.box.width(), table.box.length()) + 0.45;
            const Vec2 cc = c + dist * dir;
            const double chair_yaw = std::atan2(dir.x(), -dir.y()); // faces back toward the table
            ObjectNode chair = box(fmt::format("o{:02}", made + 1), Category::chair, cc, {0.45, 0.45}, 0.9, chair_yaw);
            if (!inside_room(table, s.room) || !inside_room(chair, s.room)) continue;
            if (sat_test(Footprint::of(table.box), Footprint::of(chair.box)).overlapping) continue;
            s.objects.push_back(table);
            s.objects.push_back(chair);
            if (!rigid_groups_disjoint(s.objects, s.room)) {
                s.objects.resize(s.objects.size() - 2);
                continue;
            }
            made += 2;
        } else {
            const Vec2 c(rng.uniform(0.6, W - 0.6), rng.uniform(0.6, D - 0.6));
            ObjectNode o = box(id, Category::sofa, c, {rng.uniform(0.3, 1.2), rng.uniform(0.3, 1.0)}, rng.uniform(0.4, 1.0),
                               rng.uniform(-kPi, kPi));
            if (!inside_room(o, s.room)) continue;
            s.objects.push_back(o);
            if (!rigid_groups_disjoint(s.objects, s.room)) {
                s.objects.pop_back();
                continue;
            }
            ++made;
        }
    }
    s.graph = infer_relations(s.objects, s.room.walls, SnapConfig{}, RelationConfig{});
    return s;
}

std::vector<WallSegment> perturbed_rectangle(std::uint64_t seed)
{
    Rng rng(seed);
    const double W = rng.uniform(2.5, 9.0), D = rng.uniform(2.5, 9.0);
    const Vec2 origin(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const std::vector<Vec2> corners = {origin, origin + Vec2(W, 0), origin + Vec2(W, D), origin + Vec2(0, D)};
    auto jitter = [&](Vec2 p) { return p + Vec2(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)); };
    std::vector<WallSegment> walls;
    for (size_t i = 0; i < 4; ++i) {
        const Vec2 a = corners[i], b = corners[(i + 1) % 4];
        std::vector<std::pair<Vec2, Vec2>> parts;
        if (rng.uniform() < 0.3) {
            const Vec2 m = a + rng.uniform(0.3, 0.7) * (b - a);
            parts = {{a, m}, {m, b}};
        } else {
            parts = {{a, b}};
        }
        for (auto [p, q] : parts) {
            WallSegment w;
            w.id = fmt::format("s{}", walls.size());
            w.p0 = jitter(p);
            w.p1 = jitter(q);
            if (rng.uniform() < 0.5) std::swap(w.p0, w.p1);
            walls.push_back(w);
        }
    }
    for (size_t i = walls.size(); i > 1; --i) std::swap(walls[i - 1], walls[rng.below(i)]);
    return walls;
}

PlantedClusters planted_clusters(std::uint64_t seed, double ratio)
{
    Rng rng(seed);
    PlantedClusters out;
    out.k = 2 + static_cast<int>(rng.below(5));
    const int dim = 8;
    const double radius = 1.0;                         // blob radius ~ sigma * sqrt(dim)
    const double sigma = radius / std::sqrt(double(dim));
    std::vector<Eigen::VectorXd> centres;
    while (static_cast<int>(centres.size()) < out.k) {
        Eigen::VectorXd c(dim);
        for (int d = 0; d < dim; ++d) c[d] = rng.uniform(-2.0 * ratio, 2.0 * ratio);
        bool far = true;
        for (const auto& o : centres) far = far && (o - c).norm() >= ratio * radius;
        if (far) centres.push_back(c);
    }
    std::vector<Eigen::VectorXd> rows;
    for (int c = 0; c < out.k; ++c) {
        const int m = 5 + static_cast<int>(rng.below(6));
        for (int i = 0; i < m; ++i) {
            Eigen::VectorXd p = centres[static_cast<size_t>(c)];
            for (int d = 0; d < dim; ++d) p[d] += sigma * rng.normal();
            rows.push_back(p);
            out.labels.push_back(c);
        }
    }
    out.points.resize(static_cast<Eigen::Index>(rows.size()), dim);
    for (size_t i = 0; i < rows.size(); ++i) out.points.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return out;
}

namespace {

Image noise_image(int w, int h, Rng& rng, std::array<int, 3> base)
{
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(base[static_cast<size_t>(c)] + int(rng.below(31)) - 15, 0, 255));
            }
        }
    }
    return img;
}

} // namespace

RetrievalScene retrieval_scene(const std::filesystem::path& dir, int objects, std::uint64_t seed, int dim)
{
    Rng rng(seed);
    RetrievalScene s;
    s.base = dir;
    std::filesystem::create_directories(dir / "crops");
    const std::vector<Category> cats = {Category::chair, Category::table, Category::sofa, Category::bed,
                                        Category::storage, Category::television};
    std::vector<AssetRecord> assets;
    auto make_asset = [&](const std::string& id, Category cat, const std::string& sub,
                          std::vector<std::vector<std::uint8_t>> views) {
        AssetRecord a;
        a.id = id;
        a.category = cat;
        a.subcategory = sub;
        a.dir = dir / "assets" / id;
        a.embeddings.resize(static_cast<Eigen::Index>(views.size()), dim);
        for (size_t v = 0; v < views.size(); ++v) {
            a.views.push_back({fmt::format("view-{}.png", v), json::object()});
            a.embeddings.row(static_cast<Eigen::Index>(v)) = stub_embedding(views[v], dim, 0).transpose();
        }
        a.segments = {{"body", 0, 12, a.views[0].image}};
        assets.push_back(std::move(a));
    };
    for (size_t c = 0; c < cats.size(); ++c) {
        for (int i = 0; i < 12; ++i) {
            std::vector<std::vector<std::uint8_t>> views;
            for (int v = 0; v < 3; ++v) views.push_back(encode_png(noise_image(16, 16, rng, {int(rng.below(256)), 128, 128})));
            const std::string sub = i % 3 == 0 ? std::string(to_string(cats[c])) + "-a" : std::string(to_string(cats[c]));
            make_asset(fmt::format("{}-{:02}", to_string(cats[c]), i), cats[c], sub, views);
        }
    }

    // Objects: several groups of near-identical objects plus singles.
    int made = 0;
    auto add_object = [&](const std::string& id, Category cat, const std::string& sub, const std::vector<Image>& crops,
                          Vec3 dims) {
        ObjectNode o;
        o.id = id;
        o.category = cat;
        o.subcategory = sub;
        o.box.center = Vec3(rng.uniform(1, 9), rng.uniform(1, 9), 0.5 * dims.y());
        o.box.dims = dims;
        double vis = 1.0;
        for (size_t k = 0; k < crops.size(); ++k) {
            CropRef c;
            c.frame_id = "f0";
            c.bbox_px = {0, 0, crops[k].width, crops[k].height};
            c.visibility = vis;
            vis *= 0.8;
            c.image = fmt::format("crops/{}-{}.png", id, k);
            write_png(dir / c.image, crops[k]);
            o.crops.push_back(c);
        }
        s.scan.objects.push_back(o);
        ++made;
    };
    while (made < objects - 1) {
        const Category cat = cats[rng.below(cats.size())];
        const int copies = rng.uniform() < 0.4 ? 2 + static_cast<int>(rng.below(3)) : 1;
        const std::array<int, 3> base = {int(rng.below(256)), int(rng.below(256)), int(rng.below(256))};
        const Vec3 dims(rng.uniform(0.4, 2), rng.uniform(0.4, 2), rng.uniform(0.4, 2));
        const std::string sub = std::string(to_string(cat)) + (rng.uniform() < 0.3 ? "-a" : "");
        for (int c = 0; c < copies && made < objects - 1; ++c) {
            std::vector<Image> crops;
            const int ncrops = 1 + static_cast<int>(rng.below(3));
            for (int k = 0; k < ncrops; ++k) crops.push_back(noise_image(20, 20, rng, base));
            add_object(fmt::format("obj-{:02}", made), cat, sub, crops, dims);
        }
    }

    // planted: the object's only crop is also a view of one asset
    Image planted_crop = noise_image(24, 24, rng, {30, 200, 90});
    s.planted_object = "planted";
    s.planted_asset = "planted-asset";
    add_object(s.planted_object, Category::refrigerator, "planted", {planted_crop}, Vec3(0.8, 1.8, 0.7));
    make_asset(s.planted_asset, Category::refrigerator, "planted",
               {encode_png(noise_image(16, 16, rng, {10, 10, 10})), read_file_bytes(dir / s.scan.objects.back().crops[0].image)});
    make_asset("fridge-other", Category::refrigerator, "planted", {encode_png(noise_image(16, 16, rng, {200, 200, 200}))});

    CameraFrame f;
    f.id = "f0";
    s.scan.frames.push_back(f);
    s.db = AssetDatabase(std::move(assets));
    return s;
}

} // namespace scenario
