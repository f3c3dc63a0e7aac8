#include <scenesmith/graph_build.hpp>
#include <scenesmith/errors.hpp>
#include <scenesmith/footprint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>

namespace scenesmith {

json to_json(const RelationConfig& c)
{
    return {{"on_top_min_overlap", c.on_top_min_overlap},
            {"on_top_max_gap", c.on_top_max_gap},
            {"connect_max_yaw_deg", rad_to_deg(c.connect_max_yaw)},
            {"table_chair_max_dist", c.table_chair_max_dist}};
}

RelationConfig relation_config_from_json(const json& j)
{
    RelationConfig c;
    c.on_top_min_overlap = j.value("on_top_min_overlap", c.on_top_min_overlap);
    c.on_top_max_gap = j.value("on_top_max_gap", c.on_top_max_gap);
    if (j.contains("connect_max_yaw_deg")) c.connect_max_yaw = deg_to_rad(j["connect_max_yaw_deg"].get<double>());
    c.table_chair_max_dist = j.value("table_chair_max_dist", c.table_chair_max_dist);
    if (!(c.on_top_min_overlap > 0.0 && c.on_top_min_overlap <= 1.0) || !(c.on_top_max_gap > 0.0) ||
        !(c.connect_max_yaw > 0.0) || !(c.table_chair_max_dist > 0.0)) {
        throw ValidationError("relation config: thresholds must be positive (overlap ratio in (0, 1])");
    }
    return c;
}

namespace {

double vertical_overlap(const OrientedBox& a, const OrientedBox& b)
{
    return std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom());
}

} // namespace

SceneGraph infer_relations(std::span<const ObjectNode> objects, std::span<const WallSegment> walls,
                           const SnapConfig& snap, const RelationConfig& rel)
{
    SceneGraph g;
    std::set<std::string> wall_ids;
    for (const auto& w : walls) {
        g.nodes.push_back({w.id, NodeKind::wall});
        wall_ids.insert(w.id);
    }
    for (const auto& w : walls) {
        for (const auto& op : w.openings) {
            g.nodes.push_back({op.id, op.kind == OpeningKind::door ? NodeKind::door : NodeKind::window});
        }
    }
    for (const auto& o : objects) g.nodes.push_back({o.id, NodeKind::object});

    for (const auto& o : objects) {
        if (o.wall_attachment && wall_ids.count(*o.wall_attachment)) {
            g.edges.push_back({Relation::attached_to_wall, o.id, *o.wall_attachment});
        }
    }

    const size_t n = objects.size();
    std::vector<Footprint> fp;
    for (const auto& o : objects) fp.push_back(Footprint::of(o.box));

    std::set<std::pair<size_t, size_t>> stacked;
    for (size_t a = 0; a < n; ++a) {
        const OrientedBox& ba = objects[a].box;
        size_t best = n;
        double best_ratio = 0.0;
        double best_gap = 0.0;
        for (size_t b = 0; b < n; ++b) {
            if (a == b) continue;
            const OrientedBox& bb = objects[b].box;
            if (!(ba.center.z() > bb.center.z())) continue;
            const double gap = ba.bottom() - bb.top();
            if (std::abs(gap) > rel.on_top_max_gap) continue;
            const double inter = intersection_area(fp[a], fp[b]);
            const double ratio = inter / std::min(fp[a].area(), fp[b].area());
            if (ratio < rel.on_top_min_overlap) continue;
            const bool better = best == n || ratio > best_ratio + 1e-12 ||
                                (std::abs(ratio - best_ratio) <= 1e-12 && std::abs(gap) < std::abs(best_gap));
            if (better) {
                best = b;
                best_ratio = ratio;
                best_gap = gap;
            }
        }
        if (best != n) {
            g.edges.push_back({Relation::on_top, objects[a].id, objects[best].id});
            stacked.insert({std::min(a, best), std::max(a, best)});
        }
    }

    for (size_t a = 0; a < n; ++a) {
        for (size_t b = a + 1; b < n; ++b) {
            if (stacked.count({a, b})) continue;
            const OrientedBox& ba = objects[a].box;
            const OrientedBox& bb = objects[b].box;
            if (angle_between(ba.yaw, bb.yaw) > rel.connect_max_yaw) continue;
            if (vertical_overlap(ba, bb) <= 0.0) continue;
            if (footprint_gap(fp[a], fp[b]) > snap.next_to_max_gap) continue;
            // interpenetrating pieces are a collision, not a group
            if (sat_test(fp[a], fp[b]).overlapping) continue;
            const bool ordered = objects[a].id < objects[b].id;
            g.edges.push_back({Relation::connecting_to, ordered ? objects[a].id : objects[b].id,
                               ordered ? objects[b].id : objects[a].id});
        }
    }

    for (size_t c = 0; c < n; ++c) {
        if (objects[c].category != Category::chair) continue;
        size_t best = n;
        double best_t = std::numeric_limits<double>::infinity();
        for (size_t t = 0; t < n; ++t) {
            if (objects[t].category != Category::table) continue;
            const auto corners = fp[t].corners();
            const auto hit = ray_convex_hit(fp[c].center, objects[c].box.facing(), corners);
            if (hit && *hit <= rel.table_chair_max_dist && *hit < best_t) {
                best_t = *hit;
                best = t;
            }
        }
        if (best != n) g.edges.push_back({Relation::table_chair_pair, objects[c].id, objects[best].id});
    }

    std::sort(g.edges.begin(), g.edges.end());
    return g;
}

json to_json(const CollisionReport& r)
{
    json remaining = json::array();
    for (const auto& o : r.remaining_overlaps) remaining.push_back({{"a", o.a}, {"b", o.b}, {"depth", o.depth}});
    json disp = json::array();
    for (const auto& [id, d] : r.displacement_log) disp.push_back({{"id", id}, {"displacement", vec_json(d)}});
    return {{"iterations_used", r.iterations_used},
            {"resolved", r.resolved},
            {"remaining_overlaps", std::move(remaining)},
            {"displacement_log", std::move(disp)}};
}

std::vector<OverlapRecord> find_overlaps(std::span<const ObjectNode> objects)
{
    std::vector<OverlapRecord> out;
    for (size_t i = 0; i < objects.size(); ++i) {
        for (size_t j = i + 1; j < objects.size(); ++j) {
            if (vertical_overlap(objects[i].box, objects[j].box) <= kOverlapEpsilon) continue;
            const SatResult s = sat_test(Footprint::of(objects[i].box), Footprint::of(objects[j].box));
            if (s.overlapping) out.push_back({objects[i].id, objects[j].id, s.depth});
        }
    }
    return out;
}

namespace {

// Extra separation added to every push so resolved pairs do not sit exactly at contact.
constexpr double kSeparationSlop = 1e-7;

struct Unit {
    std::vector<size_t> members;
    double area = 0.0;
    enum class Freedom { free, slide, fixed } freedom = Freedom::free;
    Vec2 tangent = Vec2::Zero();

    Vec2 project(const Vec2& v) const
    {
        switch (freedom) {
        case Freedom::free: return v;
        case Freedom::slide: return v.dot(tangent) * tangent;
        case Freedom::fixed: return Vec2::Zero();
        }
        return Vec2::Zero();
    }
};

class Solver {
public:
    Solver(std::span<const ObjectNode> objects, const SceneGraph& graph, const RoomPolygon& polygon,
           std::span<const WallSegment> walls)
        : objects_(objects.begin(), objects.end())
        , polygon_(polygon)
        , start_(objects.size())
    {
        for (size_t i = 0; i < objects_.size(); ++i) {
            index_[objects_[i].id] = i;
            start_[i] = objects_[i].box.center2();
        }
        std::vector<size_t> parent(objects_.size());
        std::iota(parent.begin(), parent.end(), size_t{0});
        auto find = [&](size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& e : graph.edges) {
            if (e.kind == Relation::attached_to_wall) continue;
            const auto a = index_.find(e.src);
            const auto b = index_.find(e.dst);
            if (a == index_.end() || b == index_.end()) continue;
            const size_t ra = find(a->second);
            const size_t rb = find(b->second);
            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
        std::map<size_t, size_t> unit_of_root;
        unit_of_.resize(objects_.size());
        for (size_t i = 0; i < objects_.size(); ++i) {
            const size_t r = find(i);
            auto [it, inserted] = unit_of_root.emplace(r, units_.size());
            if (inserted) units_.emplace_back();
            unit_of_[i] = it->second;
            units_[it->second].members.push_back(i);
        }
        std::map<std::string, const WallSegment*> wall_by_id;
        for (const auto& w : walls) wall_by_id[w.id] = &w;
        for (auto& u : units_) {
            std::vector<Vec2> tangents;
            for (size_t m : u.members) {
                const ObjectNode& o = objects_[m];
                u.area += o.box.footprint_area();
                if (!o.movable) u.freedom = Unit::Freedom::fixed;
                if (o.wall_attachment) {
                    const auto it = wall_by_id.find(*o.wall_attachment);
                    if (it != wall_by_id.end()) tangents.push_back(it->second->direction());
                }
            }
            if (u.freedom == Unit::Freedom::fixed || tangents.empty()) continue;
            u.freedom = Unit::Freedom::slide;
            u.tangent = tangents.front();
            for (const auto& t : tangents) {
                if (std::abs(cross2(t, u.tangent)) > 1e-9) u.freedom = Unit::Freedom::fixed;
            }
        }
    }

    CollisionResult run(int max_iters)
    {
        CollisionResult res;
        for (int it = 0; it < max_iters; ++it) {
            auto pairs = candidate_pairs();
            if (pairs.empty()) break;
            ++res.report.iterations_used;
            std::stable_sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return x.depth > y.depth; });
            for (const auto& p : pairs) resolve_pair(p.i, p.j);
        }
        res.report.remaining_overlaps = find_overlaps(objects_);
        res.report.resolved = res.report.remaining_overlaps.empty();
        for (size_t i = 0; i < objects_.size(); ++i) {
            res.report.displacement_log.emplace_back(objects_[i].id, objects_[i].box.center2() - start_[i]);
        }
        std::sort(res.report.displacement_log.begin(), res.report.displacement_log.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        res.objects = std::move(objects_);
        return res;
    }

private:
    struct Pair {
        size_t i, j;
        double depth;
    };

    std::vector<Pair> candidate_pairs() const
    {
        std::vector<Pair> out;
        for (size_t i = 0; i < objects_.size(); ++i) {
            for (size_t j = i + 1; j < objects_.size(); ++j) {
                if (unit_of_[i] == unit_of_[j]) continue;
                if (vertical_overlap(objects_[i].box, objects_[j].box) <= kOverlapEpsilon) continue;
                const SatResult s = sat_test(Footprint::of(objects_[i].box), Footprint::of(objects_[j].box));
                if (s.overlapping) out.push_back({i, j, s.depth});
            }
        }
        return out;
    }

    bool inside_after(const Unit& u, const Vec2& d) const
    {
        for (size_t m : u.members) {
            for (const Vec2& c : objects_[m].box.footprint()) {
                if (!point_in_polygon(polygon_.vertices, c)) continue; // already outside: not our concern
                if (!point_in_polygon(polygon_.vertices, c + d)) return false;
            }
        }
        return true;
    }

    // Largest fraction of `extra` (on top of `base`) that keeps the unit inside the room.
    double clip(const Unit& u, const Vec2& base, const Vec2& extra) const
    {
        if (polygon_.vertices.size() < 3 || inside_after(u, base + extra)) return 1.0;
        double lo = 0.0, hi = 1.0;
        for (int k = 0; k < 48; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (inside_after(u, base + mid * extra)) lo = mid;
            else hi = mid;
        }
        return lo;
    }

    void translate(const Unit& u, const Vec2& d)
    {
        for (size_t m : u.members) {
            objects_[m].box.center.x() += d.x();
            objects_[m].box.center.y() += d.y();
        }
    }

    struct Push {
        Vec2 da = Vec2::Zero();
        Vec2 db = Vec2::Zero();
        double shortfall = 0.0;
    };

    // Split a separation of depth `depth` along unit normal `n` between the two units.
    enum class Split { by_area, first_only, second_only };

    Push plan_push(const Unit& ua, const Unit& ub, const Vec2& n, double depth, Split split) const
    {
        Push out;
        const double p = depth + kSeparationSlop;
        const Vec2 pa = ua.project(n);
        const Vec2 pb = ub.project(n);
        const double cap_a = pa.dot(n);
        const double cap_b = pb.dot(n);
        const bool mov_a = cap_a > 1e-6 && split != Split::second_only;
        const bool mov_b = cap_b > 1e-6 && split != Split::first_only;
        out.shortfall = p;
        if (!mov_a && !mov_b) return out;
        double sa = 0.0, sb = 0.0;
        if (mov_a && mov_b) {
            // larger footprint moves less
            sa = p * ub.area / (ua.area + ub.area);
            sb = p - sa;
        } else if (mov_a) {
            sa = p;
        } else {
            sb = p;
        }
        Vec2 da = mov_a ? Vec2(sa * pa / cap_a) : Vec2::Zero();
        Vec2 db = mov_b ? Vec2(-sb * pb / cap_b) : Vec2::Zero();
        da *= clip(ua, Vec2::Zero(), da);
        db *= clip(ub, Vec2::Zero(), db);
        // hand any shortfall from clipping or constraints to the other unit
        double deficit = p - (da - db).dot(n);
        if (deficit > 1e-12 && mov_b) {
            const Vec2 extra = -deficit * pb / cap_b;
            db += clip(ub, db, extra) * extra;
            deficit = p - (da - db).dot(n);
        }
        if (deficit > 1e-12 && mov_a) {
            const Vec2 extra = deficit * pa / cap_a;
            da += clip(ua, da, extra) * extra;
            deficit = p - (da - db).dot(n);
        }
        out.da = da;
        out.db = db;
        out.shortfall = std::max(0.0, deficit);
        return out;
    }

    // Total penetration left after moving unit `ua` by `da` and `ub` by `db`,
    // ignoring the pair (i, j) being resolved.
    double penetration_after(size_t ua, const Vec2& da, size_t ub, const Vec2& db, size_t i, size_t j) const
    {
        auto placed = [&](size_t k) {
            OrientedBox box = objects_[k].box;
            const Vec2 d = unit_of_[k] == ua ? da : unit_of_[k] == ub ? db : Vec2(Vec2::Zero());
            box.center.x() += d.x();
            box.center.y() += d.y();
            return box;
        };
        double total = 0.0;
        for (size_t m = 0; m < objects_.size(); ++m) {
            if (unit_of_[m] != ua && unit_of_[m] != ub) continue;
            const OrientedBox bm = placed(m);
            const Footprint fm = Footprint::of(bm);
            for (size_t k = 0; k < objects_.size(); ++k) {
                if (k == m || unit_of_[k] == unit_of_[m]) continue;
                // pairs between the two moving units are visited from both sides
                if (unit_of_[k] == ua || unit_of_[k] == ub) {
                    if (k < m || (std::min(k, m) == std::min(i, j) && std::max(k, m) == std::max(i, j))) continue;
                }
                const OrientedBox bk = placed(k);
                if (vertical_overlap(bm, bk) <= kOverlapEpsilon) continue;
                const SatResult s = sat_test(fm, Footprint::of(bk));
                if (s.overlapping) total += s.depth;
            }
        }
        return total;
    }

    void resolve_pair(size_t i, size_t j)
    {
        if (vertical_overlap(objects_[i].box, objects_[j].box) <= kOverlapEpsilon) return;
        auto options = separating_translations(Footprint::of(objects_[i].box), Footprint::of(objects_[j].box));
        if (options.empty()) return;
        const size_t ia = unit_of_[i], ib = unit_of_[j];
        const Unit& ua = units_[ia];
        const Unit& ub = units_[ib];
        // cost of a direction is the travel it needs from the freer unit;
        // sliding units pay more for directions off their wall
        auto cost = [&](const SatResult& s) {
            const Vec2 n = s.mtv / s.depth;
            const double cap = std::max(ua.project(n).dot(n), ub.project(n).dot(n));
            return cap > 1e-6 ? s.depth / std::sqrt(cap) : std::numeric_limits<double>::infinity();
        };
        std::stable_sort(options.begin(), options.end(),
                         [&](const SatResult& x, const SatResult& y) { return cost(x) < cost(y); });
        // Candidates in order of preference: the area split along the cheapest
        // direction first. A later candidate wins only if it separates the pair
        // where earlier ones cannot, or pushes less into third objects.
        struct Scored {
            Push push;
            bool separated;
            double spill;
        };
        std::optional<Scored> best;
        for (const auto& s : options) {
            if (!std::isfinite(cost(s))) break;
            for (Split split : {Split::by_area, Split::first_only, Split::second_only}) {
                const Push push = plan_push(ua, ub, s.mtv / s.depth, s.depth, split);
                const Scored c{push, push.shortfall <= 1e-12, penetration_after(ia, push.da, ib, push.db, i, j)};
                if (!best) {
                    best = c;
                } else if (c.separated != best->separated) {
                    if (c.separated) best = c;
                } else if (c.separated ? c.spill < best->spill - 1e-9 : c.push.shortfall < best->push.shortfall - 1e-12) {
                    best = c;
                }
                if (best->separated && best->spill <= 1e-9) break;
            }
            if (best && best->separated && best->spill <= 1e-9) break;
        }
        if (!best) return;
        translate(ua, best->push.da);
        translate(ub, best->push.db);
    }

    std::vector<ObjectNode> objects_;
    const RoomPolygon& polygon_;
    std::vector<Vec2> start_;
    std::map<std::string, size_t> index_;
    std::vector<Unit> units_;
    std::vector<size_t> unit_of_;
};

} // namespace

CollisionResult resolve_collisions(std::span<const ObjectNode> objects, const SceneGraph& graph,
                                   const RoomPolygon& polygon, std::span<const WallSegment> walls,
                                   const SnapConfig& cfg)
{
    Solver solver(objects, graph, polygon, walls);
    return solver.run(cfg.max_collision_iters);
}

json to_json(const GraphDocument& doc)
{
    json j = to_json(doc.scene);
    const json g = to_json(doc.graph);
    j["nodes"] = g["nodes"];
    j["edges"] = g["edges"];
    return j;
}

GraphDocument graph_document_from_json(const json& j)
{
    GraphDocument doc;
    doc.scene = parsed_scene_from_json(j);
    doc.graph = graph_from_json(j);
    if (auto err = doc.graph.check_invariants()) throw ValidationError("scene graph: " + *err);
    return doc;
}

} // namespace scenesmith
