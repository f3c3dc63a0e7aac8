#include <scenesmith/layout.hpp>
#include <scenesmith/errors.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace scenesmith {

void SnapConfig::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw ValidationError(fmt::format("snap config: {} must be > 0", name));
    };
    positive(endpoint_snap_radius, "endpoint_snap_radius");
    positive(grid_pitch, "grid_pitch");
    positive(angle_snap, "angle_snap");
    positive(wall_align_max_dist, "wall_align_max_dist");
    positive(wall_align_max_angle, "wall_align_max_angle");
    positive(wall_clearance, "wall_clearance");
    positive(next_to_max_gap, "next_to_max_gap");
    if (max_collision_iters <= 0) throw ValidationError("snap config: max_collision_iters must be > 0");
    if (max_containment_passes <= 0) throw ValidationError("snap config: max_containment_passes must be > 0");
    if (wall_align_max_angle >= kPi / 2) throw ValidationError("snap config: wall_align_max_angle must be < 90 deg");
}

json to_json(const SnapConfig& c)
{
    return {{"endpoint_snap_radius", c.endpoint_snap_radius},
            {"grid_pitch", c.grid_pitch},
            {"angle_snap_deg", rad_to_deg(c.angle_snap)},
            {"wall_align_max_dist", c.wall_align_max_dist},
            {"wall_align_max_angle_deg", rad_to_deg(c.wall_align_max_angle)},
            {"wall_clearance", c.wall_clearance},
            {"next_to_max_gap", c.next_to_max_gap},
            {"max_collision_iters", c.max_collision_iters},
            {"max_containment_passes", c.max_containment_passes}};
}

SnapConfig snap_config_from_json(const json& j)
{
    SnapConfig c;
    c.endpoint_snap_radius = j.value("endpoint_snap_radius", c.endpoint_snap_radius);
    c.grid_pitch = j.value("grid_pitch", c.grid_pitch);
    if (j.contains("angle_snap_deg")) c.angle_snap = deg_to_rad(j["angle_snap_deg"].get<double>());
    c.wall_align_max_dist = j.value("wall_align_max_dist", c.wall_align_max_dist);
    if (j.contains("wall_align_max_angle_deg")) {
        c.wall_align_max_angle = deg_to_rad(j["wall_align_max_angle_deg"].get<double>());
    }
    c.wall_clearance = j.value("wall_clearance", c.wall_clearance);
    c.next_to_max_gap = j.value("next_to_max_gap", c.next_to_max_gap);
    c.max_collision_iters = j.value("max_collision_iters", c.max_collision_iters);
    c.max_containment_passes = j.value("max_containment_passes", c.max_containment_passes);
    c.validate();
    return c;
}

namespace {

std::string fmt_pt(const Vec2& p) { return fmt::format("({:.4f}, {:.4f})", p.x(), p.y()); }

struct DisjointSet {
    std::vector<size_t> parent;
    explicit DisjointSet(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), size_t{0}); }
    size_t find(size_t x)
    {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(size_t a, size_t b)
    {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

struct WallGraph {
    struct Edge {
        size_t a, b;     // node indices
        size_t segment;  // index into the working segment list
    };
    std::vector<Vec2> nodes;
    std::vector<Edge> edges;

    std::vector<std::vector<size_t>> incident() const
    {
        std::vector<std::vector<size_t>> inc(nodes.size());
        for (size_t e = 0; e < edges.size(); ++e) {
            inc[edges[e].a].push_back(e);
            inc[edges[e].b].push_back(e);
        }
        return inc;
    }

    bool adjacent(size_t u, size_t v) const
    {
        return std::any_of(edges.begin(), edges.end(), [&](const Edge& e) {
            return (e.a == u && e.b == v) || (e.a == v && e.b == u);
        });
    }
};

struct Face {
    std::vector<size_t> nodes;    // CCW order
    std::vector<size_t> segments; // segments[i] joins nodes[i] -> nodes[i+1]
    double area = 0.0;
};

// Bounded faces of the planar embedding restricted to the 2-core of the graph.
std::vector<Face> bounded_faces(const WallGraph& g)
{
    const size_t n = g.nodes.size();
    std::vector<bool> alive(g.edges.size(), true);
    std::vector<int> degree(n, 0);
    for (const auto& e : g.edges) {
        ++degree[e.a];
        ++degree[e.b];
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t e = 0; e < g.edges.size(); ++e) {
            if (!alive[e]) continue;
            if (degree[g.edges[e].a] <= 1 || degree[g.edges[e].b] <= 1) {
                alive[e] = false;
                --degree[g.edges[e].a];
                --degree[g.edges[e].b];
                changed = true;
            }
        }
    }

    // outgoing half-edges per node sorted by angle
    struct Half {
        size_t to;
        size_t edge;
        double angle;
    };
    std::vector<std::vector<Half>> out(n);
    for (size_t e = 0; e < g.edges.size(); ++e) {
        if (!alive[e]) continue;
        const auto& ed = g.edges[e];
        const Vec2 dab = g.nodes[ed.b] - g.nodes[ed.a];
        out[ed.a].push_back({ed.b, e, std::atan2(dab.y(), dab.x())});
        out[ed.b].push_back({ed.a, e, std::atan2(-dab.y(), -dab.x())});
    }
    for (auto& o : out) {
        std::sort(o.begin(), o.end(), [](const Half& x, const Half& y) { return x.angle < y.angle; });
    }

    std::set<std::pair<size_t, size_t>> visited; // (from node, edge)
    std::vector<Face> faces;
    for (size_t u0 = 0; u0 < n; ++u0) {
        for (const Half& h0 : out[u0]) {
            if (visited.count({u0, h0.edge})) continue;
            Face f;
            size_t u = u0;
            Half h = h0;
            bool ok = true;
            for (size_t guard = 0; guard <= 2 * g.edges.size() + 2; ++guard) {
                if (!visited.insert({u, h.edge}).second) break;
                f.nodes.push_back(u);
                f.segments.push_back(g.edges[h.edge].segment);
                const size_t v = h.to;
                const auto& ov = out[v];
                size_t idx = 0;
                while (idx < ov.size() && !(ov[idx].edge == h.edge && ov[idx].to == u)) ++idx;
                if (idx == ov.size()) {
                    ok = false;
                    break;
                }
                const Half next = ov[(idx + ov.size() - 1) % ov.size()];
                u = v;
                h = next;
                if (u == u0 && h.edge == h0.edge) break;
            }
            if (!ok || f.nodes.size() < 3) continue;
            std::vector<Vec2> pts;
            for (size_t k : f.nodes) pts.push_back(g.nodes[k]);
            f.area = signed_area(pts);
            std::set<size_t> uniq(f.nodes.begin(), f.nodes.end());
            if (f.area > 1e-9 && uniq.size() == f.nodes.size() && is_simple_polygon(pts)) {
                faces.push_back(std::move(f));
            }
        }
    }
    return faces;
}

Opening flip_opening(const Opening& op, double length)
{
    Opening out = op;
    out.start = length - op.end;
    out.end = length - op.start;
    return out;
}

// Clamps openings to [0, length]; drops empty ones.
std::vector<Opening> clamp_openings(const std::vector<Opening>& ops, double length, const std::string& wall_id,
                                    AdjustmentLog* log)
{
    std::vector<Opening> out;
    for (Opening op : ops) {
        const double s = std::clamp(op.start, 0.0, length);
        const double e = std::clamp(op.end, 0.0, length);
        if (s != op.start || e != op.end) {
            if (log) {
                log->push_back(fmt::format("clamp opening {} on wall {}: [{:.4f}, {:.4f}] -> [{:.4f}, {:.4f}]", op.id,
                                           wall_id, op.start, op.end, s, e));
            }
        }
        op.start = s;
        op.end = e;
        if (op.end - op.start > 1e-9) {
            out.push_back(op);
        } else if (log) {
            log->push_back(fmt::format("drop opening {} on wall {}: no extent left", op.id, wall_id));
        }
    }
    return out;
}

} // namespace

WallClosure close_walls(std::span<const WallSegment> segments, const SnapConfig& cfg)
{
    WallClosure result;
    std::vector<WallSegment> work;
    for (const auto& s : segments) {
        if (s.length() <= 1e-9) {
            result.log.push_back(fmt::format("drop wall {}: zero length", s.id));
            continue;
        }
        work.push_back(s);
    }
    if (work.size() < 3) {
        throw LayoutError(fmt::format("closure impossible: {} usable wall segments (need at least 3)", work.size()));
    }

    // endpoint clustering: 2i -> p0 of segment i, 2i+1 -> p1
    const size_t m = 2 * work.size();
    auto endpoint = [&](size_t k) -> const Vec2& { return (k % 2 == 0) ? work[k / 2].p0 : work[k / 2].p1; };
    DisjointSet ds(m);
    for (size_t a = 0; a < m; ++a) {
        for (size_t b = a + 1; b < m; ++b) {
            if (a / 2 == b / 2) continue;
            if ((endpoint(a) - endpoint(b)).norm() <= cfg.endpoint_snap_radius) ds.unite(a, b);
        }
    }
    WallGraph g;
    std::map<size_t, size_t> node_of_root;
    std::vector<size_t> node_of(m);
    std::vector<int> members;
    for (size_t k = 0; k < m; ++k) {
        const size_t r = ds.find(k);
        auto [it, inserted] = node_of_root.emplace(r, g.nodes.size());
        if (inserted) {
            g.nodes.push_back(Vec2::Zero());
            members.push_back(0);
        }
        node_of[k] = it->second;
        g.nodes[it->second] += endpoint(k);
        ++members[it->second];
    }
    for (size_t v = 0; v < g.nodes.size(); ++v) g.nodes[v] /= members[v];
    for (size_t k = 0; k < m; ++k) {
        const Vec2& p = endpoint(k);
        const Vec2& q = g.nodes[node_of[k]];
        if ((p - q).norm() > 0.0) {
            result.log.push_back(fmt::format("snap wall {}.{} {} -> {}", work[k / 2].id, k % 2 == 0 ? "p0" : "p1",
                                             fmt_pt(p), fmt_pt(q)));
        }
    }
    for (size_t i = 0; i < work.size(); ++i) {
        const size_t a = node_of[2 * i];
        const size_t b = node_of[2 * i + 1];
        if (a == b) {
            result.log.push_back(fmt::format("drop wall {}: endpoints merged into one corner", work[i].id));
            continue;
        }
        if (g.adjacent(a, b)) {
            result.log.push_back(fmt::format("drop wall {}: duplicates another wall between the same corners", work[i].id));
            continue;
        }
        g.edges.push_back({a, b, i});
    }

    std::vector<Face> faces = bounded_faces(g);
    int synthesized = 0;
    while (faces.empty()) {
        const auto inc = g.incident();
        std::vector<size_t> loose;
        for (size_t v = 0; v < g.nodes.size(); ++v) {
            if (inc[v].size() == 1) loose.push_back(v);
        }
        double best = std::numeric_limits<double>::infinity();
        std::pair<size_t, size_t> pick{0, 0};
        for (size_t i = 0; i < loose.size(); ++i) {
            for (size_t j = i + 1; j < loose.size(); ++j) {
                if (g.adjacent(loose[i], loose[j])) continue;
                const double d = (g.nodes[loose[i]] - g.nodes[loose[j]]).norm();
                if (d < best) {
                    best = d;
                    pick = {loose[i], loose[j]};
                }
            }
        }
        if (!std::isfinite(best)) {
            throw LayoutError("closure impossible: wall graph has no closed loop and no loose ends to join");
        }
        WallSegment synth;
        synth.id = fmt::format("synth-{}", synthesized++);
        synth.p0 = g.nodes[pick.first];
        synth.p1 = g.nodes[pick.second];
        const double h0 = work[g.edges[inc[pick.first][0]].segment].height;
        const double h1 = work[g.edges[inc[pick.second][0]].segment].height;
        synth.height = 0.5 * (h0 + h1);
        result.log.push_back(fmt::format("join loose ends {} and {} with wall {} (length {:.4f})", fmt_pt(synth.p0),
                                         fmt_pt(synth.p1), synth.id, best));
        work.push_back(synth);
        g.edges.push_back({pick.first, pick.second, work.size() - 1});
        faces = bounded_faces(g);
    }

    const Face* chosen = &faces.front();
    for (const auto& f : faces) {
        if (f.area > chosen->area) chosen = &f;
    }
    if (faces.size() > 1) {
        result.log.push_back(fmt::format("wall graph has {} loops; keeping the largest (area {:.4f})", faces.size(),
                                         chosen->area));
    }

    // start the polygon at the edge with the lowest input index
    const size_t k = chosen->nodes.size();
    size_t start = 0;
    for (size_t i = 1; i < k; ++i) {
        if (chosen->segments[i] < chosen->segments[start]) start = i;
    }
    std::map<size_t, size_t> start_node; // segment -> node of its p0
    for (const auto& e : g.edges) start_node[e.segment] = e.a;
    std::set<size_t> used;
    for (size_t step = 0; step < k; ++step) {
        const size_t i = (start + step) % k;
        const size_t u = chosen->nodes[i];
        const size_t v = chosen->nodes[(i + 1) % k];
        const size_t s = chosen->segments[i];
        used.insert(s);
        const WallSegment& src = work[s];
        WallSegment w = src;
        w.p0 = g.nodes[u];
        w.p1 = g.nodes[v];
        if (start_node.at(s) != u) {
            std::vector<Opening> flipped;
            for (const auto& op : src.openings) flipped.push_back(flip_opening(op, src.length()));
            w.openings = std::move(flipped);
            result.log.push_back(fmt::format("orient wall {} along the room boundary", w.id));
        }
        w.openings = clamp_openings(w.openings, w.length(), w.id, &result.log);
        result.polygon.vertices.push_back(w.p0);
        result.polygon.source_segment_ids.push_back(w.id);
        result.walls.push_back(std::move(w));
    }
    for (size_t s = 0; s < work.size(); ++s) {
        if (!used.count(s)) result.unused_walls.push_back(work[s].id);
    }
    if (!result.unused_walls.empty()) {
        std::string ids;
        for (const auto& id : result.unused_walls) ids += (ids.empty() ? "" : ", ") + id;
        result.log.push_back("walls outside the room loop: " + ids);
    }
    return result;
}

namespace {

struct Line {
    Vec2 point;
    Vec2 dir;
    int axis = -1; // 0: horizontal, 1: vertical, -1: free
};

std::vector<Vec2> rebuild_from_lines(const std::vector<Line>& lines, std::span<const Vec2> original)
{
    const size_t n = lines.size();
    std::vector<Vec2> out(n);
    for (size_t i = 0; i < n; ++i) {
        const Line& prev = lines[(i + n - 1) % n];
        const Line& cur = lines[i];
        Vec2 v;
        if (auto hit = line_intersection(prev.point, prev.dir, cur.point, cur.dir)) {
            v = *hit;
        } else {
            const Vec2& o = original[i];
            const Vec2 a = prev.point + (o - prev.point).dot(prev.dir) * prev.dir;
            const Vec2 b = cur.point + (o - cur.point).dot(cur.dir) * cur.dir;
            v = 0.5 * (a + b);
        }
        for (const Line* l : {&prev, &cur}) {
            if (l->axis == 0) v.y() = l->point.y();
            if (l->axis == 1) v.x() = l->point.x();
        }
        out[i] = v;
    }
    return out;
}

std::vector<Vec2> quantize(std::span<const Vec2> pts, double pitch)
{
    std::vector<Vec2> out;
    for (const auto& p : pts) out.emplace_back(std::round(p.x() / pitch) * pitch, std::round(p.y() / pitch) * pitch);
    return out;
}

bool valid_room(std::span<const Vec2> pts) { return is_simple_polygon(pts) && signed_area(pts) > 0.0; }

} // namespace

RoomPolygon snap_to_grid(const RoomPolygon& polygon, const SnapConfig& cfg, AdjustmentLog* log)
{
    const auto& v = polygon.vertices;
    const size_t n = v.size();
    std::vector<Line> base(n);
    struct Candidate {
        size_t edge;
        double diff;
        int axis;
    };
    std::vector<Candidate> candidates;
    for (size_t i = 0; i < n; ++i) {
        const Vec2 a = v[i];
        const Vec2 b = v[(i + 1) % n];
        base[i] = {0.5 * (a + b), (b - a).normalized(), -1};
        const double theta = std::atan2(b.y() - a.y(), b.x() - a.x());
        const double axis_angle = std::round(theta / (kPi / 2)) * (kPi / 2);
        const double diff = std::abs(theta - axis_angle);
        const int axis = static_cast<int>(std::llround(axis_angle / (kPi / 2))) % 2 == 0 ? 0 : 1;
        if (diff <= cfg.angle_snap) {
            if (diff == 0.0) {
                base[i].axis = axis;
            } else {
                candidates.push_back({i, diff, axis});
            }
        }
    }

    auto build = [&](const std::vector<bool>& mask) {
        std::vector<Line> lines = base;
        for (const auto& c : candidates) {
            if (!mask[c.edge]) continue;
            const double sign = c.axis == 0 ? (lines[c.edge].dir.x() >= 0 ? 1.0 : -1.0)
                                            : (lines[c.edge].dir.y() >= 0 ? 1.0 : -1.0);
            lines[c.edge].dir = c.axis == 0 ? Vec2(sign, 0.0) : Vec2(0.0, sign);
            lines[c.edge].axis = c.axis;
        }
        return rebuild_from_lines(lines, v);
    };

    std::vector<bool> mask(n, false);
    for (const auto& c : candidates) mask[c.edge] = true;
    std::vector<Vec2> snapped = quantize(build(mask), cfg.grid_pitch);
    if (!valid_room(snapped)) {
        // greedy: smallest rotations first, keep each only if the polygon stays simple
        std::sort(candidates.begin(), candidates.end(),
                  [](const Candidate& a, const Candidate& b) { return a.diff < b.diff; });
        std::fill(mask.begin(), mask.end(), false);
        for (const auto& c : candidates) {
            mask[c.edge] = true;
            if (!valid_room(quantize(build(mask), cfg.grid_pitch))) {
                mask[c.edge] = false;
                if (log) log->push_back(fmt::format("revert axis snap of edge {}: breaks simplicity", c.edge));
            }
        }
        snapped = quantize(build(mask), cfg.grid_pitch);
        if (!valid_room(snapped)) {
            if (log) log->push_back("revert grid snap: quantised polygon is not simple");
            return polygon;
        }
    }
    if (log) {
        for (const auto& c : candidates) {
            if (mask[c.edge]) {
                log->push_back(fmt::format("axis-align edge {} ({}) by {:.3f} deg", c.edge,
                                           polygon.source_segment_ids.at(c.edge), rad_to_deg(c.diff)));
            }
        }
        for (size_t i = 0; i < n; ++i) {
            if (snapped[i] != v[i]) log->push_back(fmt::format("grid-snap vertex {} {} -> {}", i, fmt_pt(v[i]), fmt_pt(snapped[i])));
        }
    }
    RoomPolygon out = polygon;
    out.vertices = std::move(snapped);
    return out;
}

std::vector<WallSegment> walls_from_polygon(const RoomPolygon& polygon, std::span<const WallSegment> walls,
                                            AdjustmentLog* log)
{
    const size_t n = polygon.vertices.size();
    if (walls.size() != n) throw LayoutError("walls_from_polygon: wall count does not match polygon edges");
    std::vector<WallSegment> out;
    for (size_t i = 0; i < n; ++i) {
        WallSegment w = walls[i];
        w.p0 = polygon.vertices[i];
        w.p1 = polygon.vertices[(i + 1) % n];
        // openings keep their world position when the wall start moves along the wall line
        if (walls[i].length() > 1e-9 && w.length() > 1e-9 && walls[i].direction().dot(w.direction()) > 0.9) {
            const double shift = (walls[i].p0 - w.p0).dot(w.direction());
            for (auto& o : w.openings) {
                o.start += shift;
                o.end += shift;
            }
        }
        w.openings = clamp_openings(w.openings, w.length(), w.id, log);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<ObjectNode> align_objects_to_walls(std::span<const ObjectNode> objects,
                                               std::span<const WallSegment> walls, const SnapConfig& cfg,
                                               AdjustmentLog* log)
{
    std::vector<ObjectNode> out(objects.begin(), objects.end());
    for (auto& obj : out) {
        const WallSegment* best = nullptr;
        double best_dist = std::numeric_limits<double>::infinity();
        const Vec2 anchor = obj.box.back_anchor();
        for (const auto& w : walls) {
            const Vec2 n = w.inward_normal();
            const double wall_yaw = std::atan2(-n.x(), n.y());
            if (angle_between(obj.box.yaw, wall_yaw) > cfg.wall_align_max_angle) continue;
            const double d = distance_to_segment(anchor, w.p0, w.p1);
            if (d <= cfg.wall_align_max_dist && d < best_dist) {
                best_dist = d;
                best = &w;
            }
        }
        if (!best) continue;
        const Vec2 n = best->inward_normal();
        OrientedBox snapped = obj.box;
        snapped.yaw = normalize_angle(std::atan2(-n.x(), n.y()));
        const Vec2 rotated_anchor = snapped.back_anchor();
        const Vec2 target_anchor = closest_point_on_segment(rotated_anchor, best->p0, best->p1) + cfg.wall_clearance * n;
        const Vec2 c = target_anchor + 0.5 * snapped.length() * snapped.facing();
        snapped.center.x() = c.x();
        snapped.center.y() = c.y();
        const bool moved = (snapped.center2() - obj.box.center2()).norm() > 1e-9 || snapped.yaw != obj.box.yaw;
        if (moved) {
            if (log) {
                log->push_back(fmt::format("align {} to wall {}: center {} -> {}, yaw {:.3f} -> {:.3f} deg", obj.id,
                                           best->id, fmt_pt(obj.box.center2()), fmt_pt(snapped.center2()),
                                           rad_to_deg(obj.box.yaw), rad_to_deg(snapped.yaw)));
            }
            obj.box = snapped;
        }
        obj.wall_attachment = best->id;
    }
    return out;
}

void offset_edge(RoomPolygon& polygon, std::vector<WallSegment>& walls, size_t edge, double delta)
{
    auto& v = polygon.vertices;
    const size_t n = v.size();
    const size_t i = edge;
    const Vec2 a = v[i];
    const Vec2 b = v[(i + 1) % n];
    const Vec2 d = (b - a).normalized();
    const Vec2 out_n(d.y(), -d.x());
    const Vec2 a_moved = a + delta * out_n;
    const Vec2 b_moved = b + delta * out_n;
    const Vec2 prev_dir = (a - v[(i + n - 1) % n]).normalized();
    const Vec2 next_dir = (v[(i + 2) % n] - b).normalized();

    std::vector<Vec2> nv;
    std::vector<WallSegment> nw;
    std::vector<std::string> nids;
    std::set<std::string> taken;
    for (const auto& w : walls) taken.insert(w.id);
    auto jog_wall = [&](const WallSegment& like) {
        WallSegment j;
        for (int k = 0;; ++k) {
            j.id = fmt::format("{}-jog{}", like.id, k);
            if (taken.insert(j.id).second) break;
        }
        j.height = like.height;
        return j;
    };
    for (size_t k = 0; k < n; ++k) {
        if (k == i) {
            if (auto hit = line_intersection(v[(i + n - 1) % n], prev_dir, a_moved, d)) {
                nv.push_back(*hit);
                nw.push_back(walls[k]);
            } else {
                nv.push_back(a);
                nw.push_back(jog_wall(walls[k]));
                nv.push_back(a_moved);
                nw.push_back(walls[k]);
            }
        } else if (k == (i + 1) % n) {
            if (auto hit = line_intersection(a_moved, d, b, next_dir)) {
                nv.push_back(*hit);
                nw.push_back(walls[k]);
            } else {
                // the moved edge ends at b_moved, then a jog returns to b
                nv.push_back(b_moved);
                nw.push_back(jog_wall(walls[i]));
                nv.push_back(b);
                nw.push_back(walls[k]);
            }
        } else {
            nv.push_back(v[k]);
            nw.push_back(walls[k]);
        }
    }
    polygon.vertices = std::move(nv);
    polygon.source_segment_ids.clear();
    for (const auto& w : nw) polygon.source_segment_ids.push_back(w.id);
    walls = walls_from_polygon(polygon, nw);
}

Containment pull_objects_inside(std::span<const ObjectNode> objects, const RoomPolygon& polygon,
                                std::span<const WallSegment> walls, const SnapConfig& cfg)
{
    Containment st{polygon, std::vector<WallSegment>(walls.begin(), walls.end()), 0, {}};
    auto outside_corners = [&]() {
        std::vector<std::pair<std::string, Vec2>> out;
        for (const auto& o : objects) {
            for (const auto& c : o.box.footprint()) {
                if (!point_in_polygon(st.polygon.vertices, c)) out.emplace_back(o.id, c);
            }
        }
        return out;
    };
    for (;;) {
        const auto outside = outside_corners();
        if (outside.empty()) return st;
        if (st.passes >= cfg.max_containment_passes) {
            double worst = 0.0;
            for (const auto& [id, c] : outside) worst = std::max(worst, distance_to_boundary(st.polygon.vertices, c));
            throw LayoutError(fmt::format("in-room adjustment did not converge after {} passes; remaining penetration {:.6f} m",
                                          st.passes, worst));
        }
        ++st.passes;
        const auto& v = st.polygon.vertices;
        const size_t n = v.size();
        std::map<std::string, double> push; // wall id -> offset
        for (const auto& [id, c] : outside) {
            size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (size_t e = 0; e < n; ++e) {
                const double d = distance_to_segment(c, v[e], v[(e + 1) % n]);
                if (d < best_d) {
                    best_d = d;
                    best = e;
                }
            }
            const Vec2 dir = (v[(best + 1) % n] - v[best]).normalized();
            const Vec2 out_n(dir.y(), -dir.x());
            double pen = (c - v[best]).dot(out_n);
            if (pen <= 0.0) pen = best_d;
            auto& slot = push[st.walls[best].id];
            slot = std::max(slot, pen + cfg.wall_clearance);
        }
        const double area_before = st.polygon.area();
        for (const auto& [id, delta] : push) {
            // jogs inserted by earlier offsets shift indices, so look the wall up by id
            const auto it = std::find_if(st.walls.begin(), st.walls.end(), [&](const WallSegment& w) { return w.id == id; });
            st.log.push_back(fmt::format("expand wall {} outward by {:.4f} m", id, delta));
            offset_edge(st.polygon, st.walls, static_cast<size_t>(it - st.walls.begin()), delta);
        }
        if (!valid_room(st.polygon.vertices)) {
            throw LayoutError("in-room adjustment produced a self-intersecting room boundary");
        }
        if (st.polygon.area() < area_before - 1e-12) {
            throw LayoutError("in-room adjustment shrank the room boundary");
        }
    }
}

ParsedScene parse_scan(const Scan& scan, const SnapConfig& cfg)
{
    cfg.validate();
    ParsedScene out;
    WallClosure closure = close_walls(scan.walls, cfg);
    out.log = closure.log;
    out.unused_walls = closure.unused_walls;
    RoomPolygon poly = snap_to_grid(closure.polygon, cfg, &out.log);
    std::vector<WallSegment> walls = walls_from_polygon(poly, closure.walls, &out.log);
    std::vector<ObjectNode> objects = align_objects_to_walls(scan.objects, walls, cfg, &out.log);
    Containment contained = pull_objects_inside(objects, poly, walls, cfg);
    out.log.insert(out.log.end(), contained.log.begin(), contained.log.end());
    out.polygon = contained.polygon;
    out.scan.walls = contained.walls;
    out.scan.objects = std::move(objects);
    out.scan.frames = scan.frames;
    return out;
}

json to_json(const ParsedScene& p)
{
    json j = to_json(p.scan);
    j["polygon"] = to_json(p.polygon);
    j["unused_walls"] = p.unused_walls;
    j["log"] = p.log;
    if (!p.image_root.empty()) j["image_root"] = p.image_root;
    return j;
}

ParsedScene parsed_scene_from_json(const json& j)
{
    const ScanValidation v = validate_scan(j);
    if (!v.ok()) throw ValidationError("parsed scene is invalid:\n" + v.summary());
    ParsedScene p;
    p.scan = v.scan;
    p.polygon = polygon_from_json(j.at("polygon"));
    p.unused_walls = j.value("unused_walls", std::vector<std::string>{});
    p.log = j.value("log", std::vector<std::string>{});
    p.image_root = j.value("image_root", "");
    return p;
}

} // namespace scenesmith
