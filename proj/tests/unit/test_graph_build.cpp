#include <doctest.h>

#include "scenarios.hpp"

#include <scenesmith/footprint.hpp>
#include <scenesmith/graph_build.hpp>

#include <algorithm>
#include <map>
#include <set>

using namespace scenesmith;
using scenario::box;

namespace {

bool has_edge(const SceneGraph& g, Relation kind, const std::string& src, const std::string& dst)
{
    return std::any_of(g.edges.begin(), g.edges.end(),
                       [&](const GraphEdge& e) { return e.kind == kind && e.src == src && e.dst == dst; });
}

Vec2 moved(const CollisionReport& r, const std::string& id)
{
    for (const auto& [oid, d] : r.displacement_log) {
        if (oid == id) return d;
    }
    FAIL("no displacement for " << id);
    return Vec2::Zero();
}

std::set<GraphEdge> edges_of(const SceneGraph& g, Relation kind)
{
    const auto e = g.edges_of(kind);
    return {e.begin(), e.end()};
}

} // namespace

TEST_CASE("a vase on a table is on top")
{
    const auto room = scenario::rectangle_room(5, 4);
    const ObjectNode table = box("table", Category::table, {2, 2}, {1.2, 0.8}, 0.75, 0.0);
    ObjectNode vase = box("vase", Category::storage, {2.1, 2.0}, {0.2, 0.2}, 0.3, 0.0);
    vase.box.center.z() = 0.75 + 0.01 + 0.15;
    const std::vector<ObjectNode> objects = {table, vase};
    const SceneGraph g = infer_relations(objects, room.walls, SnapConfig{}, RelationConfig{});
    CHECK(has_edge(g, Relation::on_top, "vase", "table"));
    CHECK_FALSE(has_edge(g, Relation::on_top, "table", "vase"));
    CHECK_FALSE(g.check_invariants());

    vase.box.center.z() += 0.1;
    const std::vector<ObjectNode> floating = {table, vase};
    CHECK(infer_relations(floating, room.walls, SnapConfig{}, RelationConfig{}).edges_of(Relation::on_top).empty());
}

TEST_CASE("side-by-side cabinets with a 3 cm gap connect")
{
    const auto room = scenario::rectangle_room(5, 4);
    const std::vector<ObjectNode> objects = {box("a", Category::storage, {1.0, 2}, {0.8, 0.5}, 1.0, 0.2),
                                             box("b", Category::storage, {1.0, 2}, {0.8, 0.5}, 1.0, 0.2)};
    std::vector<ObjectNode> placed = objects;
    placed[1].box.center.head<2>() += (0.8 + 0.03) * placed[0].box.lateral();
    const double gap = footprint_gap(Footprint::of(placed[0].box), Footprint::of(placed[1].box));
    REQUIRE(gap == doctest::Approx(0.03));
    const SceneGraph g = infer_relations(placed, room.walls, SnapConfig{}, RelationConfig{});
    CHECK(has_edge(g, Relation::connecting_to, "a", "b"));

    SUBCASE("not when yaw differs by more than 5 degrees")
    {
        placed[1].box.yaw += deg_to_rad(6);
        CHECK(infer_relations(placed, room.walls, SnapConfig{}, RelationConfig{}).edges_of(Relation::connecting_to).empty());
    }
    SUBCASE("not when they interpenetrate")
    {
        placed[1].box.center = placed[0].box.center;
        placed[1].box.center.x() += 0.4;
        CHECK(infer_relations(placed, room.walls, SnapConfig{}, RelationConfig{}).edges_of(Relation::connecting_to).empty());
    }
}

TEST_CASE("table-chair pairs need the chair to face the table")
{
    const auto room = scenario::rectangle_room(5, 4);
    const ObjectNode table = box("table", Category::table, {2.5, 2}, {1.0, 1.0}, 0.75, 0.0);
    // chair south of the table; yaw 0 faces +Y, toward it
    const ObjectNode facing = box("chair", Category::chair, {2.5, 1.0}, {0.45, 0.45}, 0.9, 0.0);
    const ObjectNode away = box("chair", Category::chair, {2.5, 1.0}, {0.45, 0.45}, 0.9, kPi - 1e-9);
    const std::vector<ObjectNode> good = {table, facing};
    const std::vector<ObjectNode> bad = {table, away};
    CHECK(has_edge(infer_relations(good, room.walls, SnapConfig{}, RelationConfig{}), Relation::table_chair_pair, "chair",
                   "table"));
    CHECK(infer_relations(bad, room.walls, SnapConfig{}, RelationConfig{}).edges_of(Relation::table_chair_pair).empty());
}

TEST_CASE("wall attachments carry over as edges to wall nodes")
{
    const auto room = scenario::rectangle_room(5, 4);
    ObjectNode cab = box("cab", Category::storage, {2, 0.26}, {1, 0.5}, 1, 0);
    cab.wall_attachment = "w0";
    const std::vector<ObjectNode> objects = {cab};
    const SceneGraph g = infer_relations(objects, room.walls, SnapConfig{}, RelationConfig{});
    CHECK(has_edge(g, Relation::attached_to_wall, "cab", "w0"));
    REQUIRE(g.find("w0"));
    CHECK(g.find("w0")->kind == NodeKind::wall);
}

TEST_CASE("two overlapping free squares split the push")
{
    const auto room = scenario::rectangle_room(6, 6);
    const std::vector<ObjectNode> objects = {box("a", Category::table, {2.0, 3}, {1, 1}, 1, 0),
                                             box("b", Category::table, {2.8, 3}, {1, 1}, 1, 0)};
    const SceneGraph g = infer_relations(objects, room.walls, SnapConfig{}, RelationConfig{});
    const CollisionResult r = resolve_collisions(objects, g, room.polygon, room.walls, SnapConfig{});
    CHECK(r.report.resolved);
    CHECK(r.report.iterations_used == 1);
    CHECK((moved(r.report, "a") - Vec2(-0.1, 0)).norm() < 1e-6);
    CHECK((moved(r.report, "b") - Vec2(0.1, 0)).norm() < 1e-6);
    CHECK(find_overlaps(r.objects).empty());
}

TEST_CASE("a wall cabinet cannot move off its wall; the chair takes the push")
{
    const auto room = scenario::rectangle_room(6, 6);
    ObjectNode cab = box("cab", Category::storage, {3, 0.26}, {1, 0.5}, 1, 0);
    cab.wall_attachment = "w0";
    // overlap is shallowest along Y, perpendicular to the wall
    const ObjectNode chair = box("chair", Category::chair, {3, 0.26 + 0.25 + 0.25 - 0.1}, {0.5, 0.5}, 0.9, 0.0);
    const std::vector<ObjectNode> objects = {cab, chair};
    const SceneGraph g = infer_relations(objects, room.walls, SnapConfig{}, RelationConfig{});
    const CollisionResult r = resolve_collisions(objects, g, room.polygon, room.walls, SnapConfig{});
    CHECK(r.report.resolved);
    CHECK(moved(r.report, "cab").norm() == 0.0);
    CHECK((moved(r.report, "chair") - Vec2(0, 0.1)).norm() < 1e-6);
}

TEST_CASE("no overlaps means nothing moves")
{
    const auto room = scenario::rectangle_room(6, 6);
    const std::vector<ObjectNode> objects = {box("a", Category::table, {1, 1}, {1, 1}, 1, 0),
                                             box("b", Category::table, {4, 4}, {1, 1}, 1, 0.5)};
    const SceneGraph g = infer_relations(objects, room.walls, SnapConfig{}, RelationConfig{});
    const CollisionResult r = resolve_collisions(objects, g, room.polygon, room.walls, SnapConfig{});
    CHECK(r.report.resolved);
    CHECK(r.report.iterations_used == 0);
    for (const auto& [id, d] : r.report.displacement_log) CHECK(d.norm() == 0.0);
    CHECK(r.objects == objects);
}

TEST_CASE("objects stacked without vertical overlap do not collide")
{
    const auto room = scenario::rectangle_room(6, 6);
    ObjectNode top = box("top", Category::storage, {2, 2}, {0.4, 0.4}, 0.3, 0);
    top.box.center.z() = 0.75 + 0.15;
    const std::vector<ObjectNode> objects = {box("table", Category::table, {2, 2}, {1, 1}, 0.75, 0), top};
    CHECK(find_overlaps(objects).empty());
}

TEST_CASE("solver properties on random scenes")
{
    int resolved = 0;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto s = scenario::random_collision_scene(seed);
        const CollisionResult r = resolve_collisions(s.objects, s.graph, s.room.polygon, s.room.walls, SnapConfig{});
        CHECK(r.report.resolved == r.report.remaining_overlaps.empty());
        CHECK(r.report.iterations_used <= 10);
        if (r.report.resolved) {
            ++resolved;
            CHECK(find_overlaps(r.objects).empty());
        }

        std::map<std::string, const ObjectNode*> before, after;
        for (const auto& o : s.objects) before[o.id] = &o;
        for (const auto& o : r.objects) after[o.id] = &o;
        for (const auto& o : s.objects) {
            for (const auto& c : after[o.id]->box.footprint()) CHECK(point_in_polygon(s.room.polygon.vertices, c, 1e-9));
            if (!o.wall_attachment) continue;
            const auto w = std::find_if(s.room.walls.begin(), s.room.walls.end(),
                                        [&](const WallSegment& x) { return x.id == *o.wall_attachment; });
            const auto gap = [&](const ObjectNode& n) { return cross2(w->direction(), n.box.back_anchor() - w->p0); };
            CHECK(std::abs(gap(*after[o.id]) - gap(o)) < 1e-6);
        }
        for (const auto& e : s.graph.edges_of(Relation::table_chair_pair)) {
            const Vec2 d0 = before[e.src]->box.center2() - before[e.dst]->box.center2();
            const Vec2 d1 = after[e.src]->box.center2() - after[e.dst]->box.center2();
            CHECK((d1 - d0).norm() < 1e-6);
        }

        const SceneGraph again = infer_relations(r.objects, s.room.walls, SnapConfig{}, RelationConfig{});
        CHECK(edges_of(again, Relation::on_top) == edges_of(s.graph, Relation::on_top));
        CHECK(edges_of(again, Relation::attached_to_wall) == edges_of(s.graph, Relation::attached_to_wall));

        const CollisionResult twice = resolve_collisions(s.objects, s.graph, s.room.polygon, s.room.walls, SnapConfig{});
        CHECK(dump_canonical(to_json(twice.report)) == dump_canonical(to_json(r.report)));
    }
    CHECK(resolved >= 57);
}

TEST_CASE("graph document round-trips")
{
    const auto s = scenario::random_collision_scene(4);
    GraphDocument doc;
    doc.scene.scan.walls = s.room.walls;
    doc.scene.scan.objects = s.objects;
    doc.scene.polygon = s.room.polygon;
    doc.graph = s.graph;
    // the first read settles yaw wrapping; after that the text is a fixpoint
    const std::string once = dump_canonical(to_json(graph_document_from_json(to_json(doc))));
    CHECK(dump_canonical(to_json(graph_document_from_json(json::parse(once)))) == once);
}
