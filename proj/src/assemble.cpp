#include <scenesmith/assemble.hpp>
#include <scenesmith/errors.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace scenesmith {

void AssembleConfig::validate() const
{
    if (!(wall_thickness > 0.0) || !(slab_thickness > 0.0)) throw ValidationError("assemble: thicknesses must be positive");
    if (!(default_density > 0.0) || !(structural_density > 0.0)) throw ValidationError("assemble: densities must be positive");
    for (const auto& [cat, d] : densities) {
        if (!(d > 0.0)) throw ValidationError("assemble: density for " + cat + " must be positive");
    }
    if (!(distortion_tolerance >= 0.0)) throw ValidationError("assemble: distortion tolerance must be non-negative");
}

json to_json(const AssembleConfig& c)
{
    return {{"wall_thickness", c.wall_thickness},
            {"slab_thickness", c.slab_thickness},
            {"default_density", c.default_density},
            {"densities", c.densities},
            {"structural_density", c.structural_density},
            {"distortion_tolerance", c.distortion_tolerance},
            {"immovable_passive", c.immovable_passive}};
}

AssembleConfig assemble_config_from_json(const json& j)
{
    AssembleConfig c;
    c.wall_thickness = j.value("wall_thickness", c.wall_thickness);
    c.slab_thickness = j.value("slab_thickness", c.slab_thickness);
    c.default_density = j.value("default_density", c.default_density);
    if (j.contains("densities")) c.densities = j["densities"].get<std::map<std::string, double>>();
    c.structural_density = j.value("structural_density", c.structural_density);
    c.distortion_tolerance = j.value("distortion_tolerance", c.distortion_tolerance);
    c.immovable_passive = j.value("immovable_passive", c.immovable_passive);
    c.validate();
    return c;
}

std::vector<std::array<int, 3>> triangulate(std::span<const Vec2> polygon)
{
    const int n = static_cast<int>(polygon.size());
    std::vector<std::array<int, 3>> tris;
    if (n < 3) return tris;
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    if (signed_area(polygon) < 0.0) std::reverse(idx.begin(), idx.end());
    auto inside_tri = [](const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
        return cross2(b - a, p - a) >= 0.0 && cross2(c - b, p - b) >= 0.0 && cross2(a - c, p - c) >= 0.0;
    };
    int guard = 0;
    while (idx.size() > 3 && guard++ < n * n) {
        bool clipped = false;
        const size_t m = idx.size();
        for (size_t i = 0; i < m; ++i) {
            const int ia = idx[(i + m - 1) % m], ib = idx[i], ic = idx[(i + 1) % m];
            const Vec2 &a = polygon[ia], &b = polygon[ib], &c = polygon[ic];
            if (cross2(b - a, c - b) <= 0.0) continue; // reflex or flat
            bool ear = true;
            for (int j : idx) {
                if (j == ia || j == ib || j == ic) continue;
                if (inside_tri(polygon[j], a, b, c)) {
                    ear = false;
                    break;
                }
            }
            if (!ear) continue;
            tris.push_back({ia, ib, ic});
            idx.erase(idx.begin() + static_cast<long>(i));
            clipped = true;
            break;
        }
        if (!clipped) break;
    }
    if (idx.size() == 3) tris.push_back({idx[0], idx[1], idx[2]});
    return tris;
}

Mesh prism_mesh(std::span<const Vec2> footprint, double z0, double z1)
{
    std::vector<Vec2> poly(footprint.begin(), footprint.end());
    if (signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
    const int n = static_cast<int>(poly.size());
    Mesh m;
    for (const auto& p : poly) m.vertices.emplace_back(p.x(), p.y(), z0);
    for (const auto& p : poly) m.vertices.emplace_back(p.x(), p.y(), z1);
    for (const auto& t : triangulate(poly)) {
        m.triangles.push_back({t[0], t[2], t[1]});         // bottom faces down
        m.triangles.push_back({t[0] + n, t[1] + n, t[2] + n});
    }
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        m.triangles.push_back({i, j, j + n});
        m.triangles.push_back({i, j + n, i + n});
    }
    return m;
}

double WallSpec::face_area() const
{
    double a = 0.0;
    for (const auto& p : pieces) a += p.area();
    return a;
}

Vec2 WallSpec::outer_at(double s) const
{
    const double len = length();
    if (s <= 0.0) return footprint[3];
    if (s >= len) return footprint[2];
    const Vec2 d = (p1 - p0) / len;
    return p0 + s * d + thickness * Vec2(d.y(), -d.x());
}

Mesh WallSpec::mesh() const
{
    const Vec2 d = (p1 - p0).normalized();
    Mesh out;
    for (const auto& piece : pieces) {
        const std::array<Vec2, 4> quad{p0 + piece.s0 * d, p0 + piece.s1 * d, outer_at(piece.s1), outer_at(piece.s0)};
        append_mesh(out, prism_mesh(quad, piece.z0, piece.z1));
    }
    return out;
}

std::vector<WallSpec> build_walls(const RoomPolygon& polygon, std::span<const WallSegment> segments, double thickness)
{
    const auto& v = polygon.vertices;
    const size_t n = v.size();
    if (n < 3 || segments.size() != n) {
        throw ValidationError(fmt::format("wall assembly needs one segment per polygon edge ({} edges, {} segments)", n, segments.size()));
    }
    std::vector<Vec2> dir(n), out_n(n);
    for (size_t i = 0; i < n; ++i) {
        dir[i] = (v[(i + 1) % n] - v[i]).normalized();
        out_n[i] = Vec2(dir[i].y(), -dir[i].x());
    }
    std::vector<Vec2> outer(n);
    for (size_t i = 0; i < n; ++i) {
        const size_t prev = (i + n - 1) % n;
        const auto hit = line_intersection(v[i] + thickness * out_n[prev], dir[prev], v[i] + thickness * out_n[i], dir[i]);
        outer[i] = hit ? *hit : Vec2(v[i] + thickness * out_n[i]);
    }
    std::vector<WallSpec> walls;
    for (size_t i = 0; i < n; ++i) {
        const WallSegment& seg = segments[i];
        if (!(seg.height > 0.0)) throw ValidationError("wall " + seg.id + " has non-positive height");
        WallSpec w;
        w.id = seg.id;
        w.p0 = v[i];
        w.p1 = v[(i + 1) % n];
        w.height = seg.height;
        w.thickness = thickness;
        w.footprint = {w.p0, w.p1, outer[(i + 1) % n], outer[i]};
        w.openings = seg.openings;
        w.pieces = {{0.0, w.length(), 0.0, w.height}};
        walls.push_back(std::move(w));
    }
    return walls;
}

double plan_coverage_gap(const RoomPolygon& polygon, std::span<const WallSpec> walls, int samples)
{
    const auto& v = polygon.vertices;
    const double total = perimeter(v);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        double s = total * k / samples;
        size_t e = 0;
        while (e + 1 < v.size() && s > (v[(e + 1) % v.size()] - v[e]).norm()) {
            s -= (v[(e + 1) % v.size()] - v[e]).norm();
            ++e;
        }
        const Vec2 a = v[e];
        const Vec2 b = v[(e + 1) % v.size()];
        const Vec2 p = a + std::min(s, (b - a).norm()) * (b - a).normalized();
        double best = std::numeric_limits<double>::infinity();
        for (const auto& w : walls) {
            const std::vector<Vec2> fp(w.footprint.begin(), w.footprint.end());
            best = std::min(best, point_in_polygon(fp, p, 1e-9) ? 0.0 : distance_to_boundary(fp, p));
        }
        worst = std::max(worst, best);
    }
    return worst;
}

Vec3 Transform::apply(const Vec3& p) const
{
    const double c = std::cos(yaw), s = std::sin(yaw);
    const Vec3 q = scale.cwiseProduct(p);
    return Vec3(c * q.x() - s * q.y(), s * q.x() + c * q.y(), q.z()) + translation;
}

Mesh transformed(const Mesh& mesh, const Transform& t)
{
    Mesh out = mesh;
    for (auto& v : out.vertices) v = t.apply(v);
    return out;
}

namespace {

// Unit frame around a 1 x 1 opening (x lateral, z up, y through the wall); doors have no sill bar.
Mesh frame_mesh(OpeningKind kind)
{
    constexpr double bar = 0.05;
    Mesh m;
    auto add_box = [&](Vec3 center, Vec3 size) {
        Mesh b = box_mesh(size);
        for (auto& p : b.vertices) p += center;
        append_mesh(m, b);
    };
    add_box({-0.5 + bar / 2, 0.0, 0.0}, {bar, 1.0, 1.0});
    add_box({0.5 - bar / 2, 0.0, 0.0}, {bar, 1.0, 1.0});
    add_box({0.0, 0.0, 0.5 - bar / 2}, {1.0 - 2 * bar, 1.0, bar});
    if (kind == OpeningKind::window) {
        add_box({0.0, 0.0, -0.5 + bar / 2}, {1.0 - 2 * bar, 1.0, bar});
        add_box({0.0, 0.0, 0.0}, {1.0 - 2 * bar, 0.02, 1.0 - 2 * bar}); // pane
    } else {
        add_box({0.0, 0.0, -bar / 2}, {1.0 - 2 * bar, 0.2, 1.0 - bar}); // leaf
    }
    return m;
}

json mesh_json(const Mesh& m)
{
    json verts = json::array();
    for (const auto& v : m.vertices) verts.push_back({v.x(), v.y(), v.z()});
    json tris = json::array();
    for (const auto& t : m.triangles) tris.push_back({t[0], t[1], t[2]});
    return {{"vertices", verts}, {"triangles", tris}};
}

} // namespace

std::vector<Placement> cut_openings(std::vector<WallSpec>& walls, std::vector<std::string>& log)
{
    std::vector<Placement> frames;
    for (auto& w : walls) {
        const double len = w.length();
        for (auto& o : w.openings) {
            const Opening before = o;
            o.start = std::clamp(o.start, 0.0, len);
            o.end = std::clamp(o.end, 0.0, len);
            o.bottom = std::clamp(o.bottom, 0.0, w.height);
            o.top = std::clamp(o.top, 0.0, w.height);
            if (o != before) {
                log.push_back(fmt::format("opening {} clamped to wall {} bounds", o.id, w.id));
            }
        }
        std::erase_if(w.openings, [&](const Opening& o) {
            const bool empty = !(o.end > o.start) || !(o.top > o.bottom);
            if (empty) log.push_back(fmt::format("opening {} is empty after clamping; dropped", o.id));
            return empty;
        });
        std::sort(w.openings.begin(), w.openings.end(), [](const Opening& a, const Opening& b) { return a.start < b.start; });
        w.pieces.clear();
        double cursor = 0.0;
        for (const auto& o : w.openings) {
            if (o.start > cursor) w.pieces.push_back({cursor, o.start, 0.0, w.height});
            if (o.bottom > 0.0) w.pieces.push_back({o.start, o.end, 0.0, o.bottom});
            if (o.top < w.height) w.pieces.push_back({o.start, o.end, o.top, w.height});
            cursor = std::max(cursor, o.end);
        }
        if (cursor < len) w.pieces.push_back({cursor, len, 0.0, w.height});

        const Vec2 d = (w.p1 - w.p0) / len;
        const Vec2 inward(-d.y(), d.x());
        for (const auto& o : w.openings) {
            Placement p;
            p.id = o.id;
            p.kind = std::string(to_string(o.kind));
            p.category = p.kind;
            p.asset = "parametric:" + p.kind;
            p.wall = w.id;
            const double s = 0.5 * (o.start + o.end);
            const Vec2 c = w.p0 + s * d - 0.5 * w.thickness * inward;
            p.box.center = Vec3(c.x(), c.y(), 0.5 * (o.bottom + o.top));
            p.box.dims = Vec3(o.end - o.start, o.top - o.bottom, w.thickness);
            p.box.yaw = std::atan2(-inward.x(), inward.y());
            p.canonical = Vec3::Ones();
            p.transform.translation = p.box.center;
            p.transform.yaw = p.box.yaw;
            p.transform.scale = Vec3(p.box.width(), p.box.length(), p.box.height());
            p.mesh = transformed(frame_mesh(o.kind), p.transform);
            frames.push_back(std::move(p));
        }
    }
    return frames;
}

std::vector<Placement> place_objects(const GraphDocument& graph, const RetrievalResult& retrieval,
                                     const AssetDatabase& db, const AssembleConfig& cfg)
{
    const auto& objects = graph.scene.scan.objects;
    std::map<std::string, std::vector<std::string>> cluster_of;
    for (const auto& c : retrieval.clusters) {
        for (const auto& id : c) cluster_of[id] = c;
    }
    std::vector<Placement> out;
    std::map<std::string, size_t> index;
    for (const auto& o : objects) {
        Placement p;
        p.id = o.id;
        p.kind = "object";
        p.category = std::string(to_string(o.category));
        p.subcategory = o.subcategory;
        p.box = o.box;
        p.cluster = cluster_of.count(o.id) ? cluster_of[o.id] : std::vector<std::string>{o.id};
        const auto it = retrieval.assignment.find(o.id);
        const AssetRecord* asset = it == retrieval.assignment.end() ? nullptr : db.find(it->second);
        Mesh local;
        if (asset) {
            try {
                local = load_obj(asset->mesh_path());
            } catch (const std::exception& e) {
                p.flags.push_back(std::string("asset mesh unreadable: ") + e.what());
                asset = nullptr;
            }
        }
        if (asset && local.empty()) {
            p.flags.push_back("asset mesh is empty");
            asset = nullptr;
        }
        if (asset) {
            p.asset = asset->id;
            p.joints = asset->articulated ? asset->joints : json::array();
            const Aabb bb = bounds(local);
            const Vec3 ext = bb.extent();
            p.canonical = Vec3(ext.x(), ext.z(), ext.y());
            p.mesh_center = bb.center();
            Vec3 scale;
            for (int a = 0; a < 3; ++a) {
                if (p.canonical[a] > 0.0) {
                    scale[a] = o.box.dims[a] / p.canonical[a];
                } else {
                    scale[a] = 1.0;
                    p.flags.push_back(fmt::format("asset has zero extent on axis {}", a));
                }
            }
            const double mean = scale.mean();
            if ((scale / mean - Vec3::Ones()).cwiseAbs().maxCoeff() > cfg.distortion_tolerance) {
                p.flags.push_back(fmt::format("aspect distortion: scale ({:.3f}, {:.3f}, {:.3f})", scale.x(), scale.y(), scale.z()));
            }
            // scale is reported in (w, h, l) order; the asset frame is (lateral, facing, up)
            p.transform.scale = Vec3(scale.x(), scale.z(), scale.y());
            p.physics.collision_source = "mesh";
        } else {
            p.placeholder = true;
            p.flags.push_back(it == retrieval.assignment.end() ? "no retrieval result; placeholder box" : "asset unavailable; placeholder box");
            local = box_mesh(Vec3(o.box.width(), o.box.length(), o.box.height()));
            p.canonical = o.box.dims;
            p.transform.scale = Vec3::Ones();
            p.physics.collision_source = "box";
        }
        p.transform.yaw = o.box.yaw;
        const Transform probe{Vec3::Zero(), o.box.yaw, p.transform.scale};
        p.transform.translation = o.box.center - probe.apply(p.mesh_center);
        p.mesh = transformed(local, p.transform);
        index[p.id] = out.size();
        out.push_back(std::move(p));
    }

    // re-seat stacked objects, supporters first
    std::map<std::string, std::string> support;
    for (const auto& e : graph.graph.edges) {
        if (e.kind == Relation::on_top && index.count(e.src) && index.count(e.dst)) support[e.src] = e.dst;
    }
    std::function<int(const std::string&)> depth = [&](const std::string& id) {
        const auto s = support.find(id);
        return s == support.end() ? 0 : 1 + depth(s->second);
    };
    std::vector<std::pair<int, std::string>> order;
    for (const auto& [child, parent] : support) order.emplace_back(depth(child), child);
    std::sort(order.begin(), order.end());
    for (const auto& [d, child_id] : order) {
        Placement& child = out[index[child_id]];
        const Placement& parent = out[index[support[child_id]]];
        const Vec3 origin(child.box.center.x(), child.box.center.y(), parent.box.top() + 1.0);
        const auto hit = raycast(parent.mesh, origin, Vec3(0.0, 0.0, -1.0));
        if (!hit) {
            child.flags.push_back("re-seat ray missed supporter " + parent.id);
            continue;
        }
        const double dz = (origin.z() - *hit) - child.box.bottom();
        child.box.center.z() += dz;
        child.transform.translation.z() += dz;
        for (auto& v : child.mesh.vertices) v.z() += dz;
        if (dz != 0.0) child.flags.push_back(fmt::format("re-seated on {} by {:+.4f} m", parent.id, dz));
    }
    return out;
}

void assign_physics(std::span<Placement> placements, Oracle& oracle, const AssembleConfig& cfg)
{
    for (auto& p : placements) {
        const double volume = p.box.dims.prod();
        if (p.kind != "object") {
            p.physics.active = false;
            p.physics.mass_kg = std::max(volume, 1e-6) * cfg.structural_density;
            continue;
        }
        const auto it = cfg.densities.find(p.category);
        const double density = it == cfg.densities.end() ? cfg.default_density : it->second;
        const double fallback = volume * density;
        const json reply = oracle.ask({{"task", "mass"},
                                       {"instruction", "Estimate the mass in kilograms."},
                                       {"id", p.id},
                                       {"category", p.category},
                                       {"subcategory", p.subcategory},
                                       {"dims", vec_json(p.box.dims)},
                                       {"volume", volume},
                                       {"density", density}});
        double mass = 0.0;
        if (reply.contains("mass_kg") && reply["mass_kg"].is_number()) mass = reply["mass_kg"].get<double>();
        if (!(mass > 0.0) || !std::isfinite(mass)) {
            p.physics.flags.push_back(fmt::format("oracle mass {} rejected; used density table", mass));
            mass = fallback;
        }
        if (!(mass > 0.0)) mass = 1e-3;
        p.physics.mass_kg = mass;
        p.physics.active = !(cfg.immovable_passive && p.flags.end() != std::find(p.flags.begin(), p.flags.end(), "immovable"));
    }
}

namespace {

json physics_json(const PhysicsSpec& s)
{
    return {{"mass_kg", s.mass_kg}, {"body", s.active ? "active" : "passive"}, {"collision_source", s.collision_source},
            {"flags", s.flags}};
}

json transform_json(const Transform& t)
{
    return {{"translation", vec_json(t.translation)}, {"yaw_deg", rad_to_deg(t.yaw)}, {"scale", vec_json(t.scale)}};
}

json bbox_json(const OrientedBox& b)
{
    return {{"center", vec_json(b.center)}, {"dims", vec_json(b.dims)}, {"yaw_deg", rad_to_deg(b.yaw)}};
}

} // namespace

json assemble_scene(const GraphDocument& graph, const RetrievalResult& retrieval, const json& materials,
                    const AssetDatabase& db, Oracle& physics_oracle, const AssembleConfig& cfg,
                    const Provenance& provenance)
{
    cfg.validate();
    std::vector<std::string> log;
    const RoomPolygon& polygon = graph.scene.polygon;
    auto walls = build_walls(polygon, graph.scene.scan.walls, cfg.wall_thickness);
    auto openings = cut_openings(walls, log);
    auto objects = place_objects(graph, retrieval, db, cfg);
    for (const auto& o : graph.scene.scan.objects) {
        if (!o.movable) {
            for (auto& p : objects) {
                if (p.id == o.id) p.flags.push_back("immovable");
            }
        }
    }
    const json painted = materials.is_object() ? materials.value("objects", json::object()) : json::object();
    for (auto& p : objects) {
        if (painted.contains(p.id) && painted[p.id].value("asset", "") == p.asset) p.materials = painted[p.id].value("segments", json::object());
    }
    assign_physics(objects, physics_oracle, cfg);
    assign_physics(openings, physics_oracle, cfg);

    double ceiling = 0.0;
    for (const auto& w : walls) ceiling = std::max(ceiling, w.height);
    const double area = std::abs(signed_area(polygon.vertices));
    const double slab_mass = area * cfg.slab_thickness * cfg.structural_density;
    const json slab_physics = physics_json({slab_mass, false, "mesh", {}});

    json wall_docs = json::array();
    for (const auto& w : walls) {
        json ops = json::array();
        for (const auto& o : w.openings) ops.push_back(to_json(o));
        json pieces = json::array();
        double volume = 0.0;
        for (const auto& p : w.pieces) {
            pieces.push_back({p.s0, p.s1, p.z0, p.z1});
            volume += p.area() * w.thickness;
        }
        json fp = json::array();
        for (const auto& v : w.footprint) fp.push_back(vec_json(v));
        wall_docs.push_back({{"id", w.id},
                             {"p0", vec_json(w.p0)},
                             {"p1", vec_json(w.p1)},
                             {"height", w.height},
                             {"thickness", w.thickness},
                             {"footprint", fp},
                             {"openings", ops},
                             {"face_pieces", pieces},
                             {"face_area", w.face_area()},
                             {"mesh", mesh_json(w.mesh())},
                             {"physics", physics_json({volume * cfg.structural_density, false, "mesh", {}})}});
    }

    json opening_docs = json::array();
    for (const auto& o : openings) {
        opening_docs.push_back({{"id", o.id},
                                {"kind", o.kind},
                                {"wall", o.wall},
                                {"asset", o.asset},
                                {"transform", transform_json(o.transform)},
                                {"bbox", bbox_json(o.box)},
                                {"mesh", mesh_json(o.mesh)},
                                {"physics", physics_json(o.physics)}});
    }

    json object_docs = json::array();
    for (const auto& p : objects) {
        json mesh_ref = p.placeholder ? json{{"primitive", "box"}}
                                      : json{{"asset", p.asset},
                                             {"path", (db.at(p.asset).dir.filename() / db.at(p.asset).mesh).generic_string()}};
        object_docs.push_back({{"id", p.id},
                               {"category", p.category},
                               {"subcategory", p.subcategory},
                               {"asset", p.placeholder ? json(nullptr) : json(p.asset)},
                               {"placeholder", p.placeholder},
                               {"color", p.placeholder ? json({128, 128, 128}) : json(nullptr)},
                               {"mesh", mesh_ref},
                               {"canonical_dims", vec_json(p.canonical)},
                               {"transform", transform_json(p.transform)},
                               {"bbox", bbox_json(p.box)},
                               {"cluster", p.cluster},
                               {"materials", p.materials},
                               {"articulation", p.joints},
                               {"physics", physics_json(p.physics)},
                               {"flags", p.flags}});
    }

    json poly = json::array();
    for (const auto& v : polygon.vertices) poly.push_back(vec_json(v));
    const json relations = to_json(graph.graph).at("edges");

    return {{"schema", kSceneSchema},
            {"provenance",
             {{"config_hash", provenance.config_hash},
              {"seeds", provenance.seeds},
              {"stage_versions", provenance.stage_versions},
              {"inputs", provenance.inputs}}},
            {"room",
             {{"polygon", poly},
              {"area", area},
              {"floor", {{"mesh", mesh_json(prism_mesh(polygon.vertices, -cfg.slab_thickness, 0.0))}, {"physics", slab_physics}}},
              {"ceiling", {{"height", ceiling}, {"mesh", mesh_json(prism_mesh(polygon.vertices, ceiling, ceiling + cfg.slab_thickness))}, {"physics", slab_physics}}},
              {"unused_walls", graph.scene.unused_walls}}},
            {"walls", wall_docs},
            {"openings", opening_docs},
            {"objects", object_docs},
            {"relations", relations},
            {"log", log}};
}

namespace {

struct Checker {
    std::vector<std::string> errors;

    bool expect(bool ok, const std::string& where, const std::string& what)
    {
        if (!ok) errors.push_back(where + ": " + what);
        return ok;
    }
    bool number_array(const json& j, size_t n, const std::string& where)
    {
        bool ok = j.is_array() && j.size() == n;
        if (ok) {
            for (const auto& v : j) ok = ok && v.is_number();
        }
        return expect(ok, where, fmt::format("expected {} numbers", n));
    }
    void mesh(const json& m, const std::string& where)
    {
        if (!expect(m.is_object() && m.contains("vertices") && m.contains("triangles"), where, "mesh needs vertices and triangles")) return;
        const size_t nv = m["vertices"].size();
        for (size_t i = 0; i < nv; ++i) number_array(m["vertices"][i], 3, fmt::format("{}.vertices[{}]", where, i));
        for (size_t i = 0; i < m["triangles"].size(); ++i) {
            const auto& t = m["triangles"][i];
            bool ok = t.is_array() && t.size() == 3;
            for (size_t k = 0; ok && k < 3; ++k) ok = t[k].is_number_integer() && t[k].get<long>() >= 0 && t[k].get<size_t>() < nv;
            expect(ok, fmt::format("{}.triangles[{}]", where, i), "triangle indices out of range");
        }
    }
    void physics(const json& p, const std::string& where, std::optional<bool> must_be_passive)
    {
        if (!expect(p.is_object(), where, "physics missing")) return;
        expect(p.value("mass_kg", 0.0) > 0.0, where, "mass_kg must be positive");
        const std::string body = p.value("body", "");
        expect(body == "active" || body == "passive", where, "body must be active or passive");
        if (must_be_passive && *must_be_passive) expect(body == "passive", where, "structural bodies are passive");
        const std::string src = p.value("collision_source", "");
        expect(src == "mesh" || src == "box", where, "collision_source must be mesh or box");
    }
};

} // namespace

std::vector<std::string> validate_scene_document(const json& doc)
{
    Checker c;
    if (!c.expect(doc.is_object(), "$", "document must be an object")) return c.errors;
    c.expect(doc.value("schema", "") == kSceneSchema, "$.schema", fmt::format("expected '{}'", kSceneSchema));
    const json& prov = doc.contains("provenance") ? doc["provenance"] : json();
    if (c.expect(prov.is_object(), "$.provenance", "missing")) {
        c.expect(prov.contains("config_hash") && prov["config_hash"].is_string(), "$.provenance.config_hash", "string required");
        c.expect(prov.contains("seeds") && prov["seeds"].is_object(), "$.provenance.seeds", "object required");
        c.expect(prov.contains("stage_versions") && prov["stage_versions"].is_object(), "$.provenance.stage_versions", "object required");
    }
    const json& room = doc.contains("room") ? doc["room"] : json();
    if (c.expect(room.is_object(), "$.room", "missing")) {
        const json& poly = room.contains("polygon") ? room["polygon"] : json();
        if (c.expect(poly.is_array() && poly.size() >= 3, "$.room.polygon", "at least 3 vertices")) {
            for (size_t i = 0; i < poly.size(); ++i) c.number_array(poly[i], 2, fmt::format("$.room.polygon[{}]", i));
        }
        for (const char* part : {"floor", "ceiling"}) {
            const std::string where = std::string("$.room.") + part;
            if (c.expect(room.contains(part) && room[part].is_object(), where, "missing")) {
                c.mesh(room[part].value("mesh", json()), where + ".mesh");
                c.physics(room[part].value("physics", json()), where + ".physics", true);
            }
        }
    }
    std::set<std::string> ids;
    auto unique_id = [&](const json& item, const std::string& where) {
        const bool ok = item.contains("id") && item["id"].is_string();
        if (c.expect(ok, where + ".id", "string required")) c.expect(ids.insert(item["id"].get<std::string>()).second, where + ".id", "duplicate id");
    };
    if (c.expect(doc.contains("walls") && doc["walls"].is_array(), "$.walls", "array required")) {
        for (size_t i = 0; i < doc["walls"].size(); ++i) {
            const json& w = doc["walls"][i];
            const std::string where = fmt::format("$.walls[{}]", i);
            unique_id(w, where);
            c.number_array(w.value("p0", json()), 2, where + ".p0");
            c.number_array(w.value("p1", json()), 2, where + ".p1");
            c.expect(w.value("height", 0.0) > 0.0, where + ".height", "must be positive");
            c.expect(w.value("thickness", 0.0) > 0.0, where + ".thickness", "must be positive");
            c.mesh(w.value("mesh", json()), where + ".mesh");
            c.physics(w.value("physics", json()), where + ".physics", true);
        }
    }
    if (c.expect(doc.contains("openings") && doc["openings"].is_array(), "$.openings", "array required")) {
        for (size_t i = 0; i < doc["openings"].size(); ++i) {
            const json& o = doc["openings"][i];
            const std::string where = fmt::format("$.openings[{}]", i);
            unique_id(o, where);
            const std::string kind = o.value("kind", "");
            c.expect(kind == "door" || kind == "window", where + ".kind", "door or window");
            c.physics(o.value("physics", json()), where + ".physics", true);
        }
    }
    if (c.expect(doc.contains("objects") && doc["objects"].is_array(), "$.objects", "array required")) {
        for (size_t i = 0; i < doc["objects"].size(); ++i) {
            const json& o = doc["objects"][i];
            const std::string where = fmt::format("$.objects[{}]", i);
            unique_id(o, where);
            c.expect(o.contains("category") && o["category"].is_string() && parse_category(o["category"].get<std::string>()),
                     where + ".category", "known category required");
            c.expect(o.contains("asset") && (o["asset"].is_string() || o["asset"].is_null()), where + ".asset", "string or null");
            c.expect(o.contains("placeholder") && o["placeholder"].is_boolean(), where + ".placeholder", "boolean required");
            const json& t = o.value("transform", json());
            if (c.expect(t.is_object(), where + ".transform", "missing")) {
                c.number_array(t.value("translation", json()), 3, where + ".transform.translation");
                c.number_array(t.value("scale", json()), 3, where + ".transform.scale");
                c.expect(t.contains("yaw_deg") && t["yaw_deg"].is_number(), where + ".transform.yaw_deg", "number required");
            }
            const json& b = o.value("bbox", json());
            if (c.expect(b.is_object(), where + ".bbox", "missing")) {
                c.number_array(b.value("center", json()), 3, where + ".bbox.center");
                c.number_array(b.value("dims", json()), 3, where + ".bbox.dims");
            }
            c.physics(o.value("physics", json()), where + ".physics", std::nullopt);
        }
    }
    if (c.expect(doc.contains("relations") && doc["relations"].is_array(), "$.relations", "array required")) {
        for (size_t i = 0; i < doc["relations"].size(); ++i) {
            const json& e = doc["relations"][i];
            const std::string where = fmt::format("$.relations[{}]", i);
            c.expect(e.contains("kind") && e["kind"].is_string() && parse_relation(e["kind"].get<std::string>()), where + ".kind", "known relation");
            c.expect(e.contains("src") && e["src"].is_string() && e.contains("dst") && e["dst"].is_string(), where, "src and dst strings");
        }
    }
    return c.errors;
}

} // namespace scenesmith
