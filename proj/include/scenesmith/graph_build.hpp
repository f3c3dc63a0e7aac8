#pragma once

#include <scenesmith/layout.hpp>
#include <scenesmith/scene_model.hpp>

#include <span>
#include <string>
#include <vector>

namespace scenesmith {

/// Thresholds for relation inference that are not part of SnapConfig.
struct RelationConfig {
    double on_top_min_overlap = 0.5;   // intersection over the smaller footprint
    double on_top_max_gap = 0.05;      // |bottom(a) - top(b)|, metres
    double connect_max_yaw = deg_to_rad(5.0);
    double table_chair_max_dist = 1.0; // along the chair's front ray, metres
};

json to_json(const RelationConfig& cfg);
RelationConfig relation_config_from_json(const json& j);

/// Builds the scene graph: wall and opening nodes, object nodes, and the four relation types.
SceneGraph infer_relations(std::span<const ObjectNode> objects, std::span<const WallSegment> walls,
                           const SnapConfig& snap, const RelationConfig& rel);

struct OverlapRecord {
    std::string a;
    std::string b;
    double depth = 0.0;
};

struct CollisionReport {
    int iterations_used = 0;
    bool resolved = true;
    std::vector<OverlapRecord> remaining_overlaps;
    std::vector<std::pair<std::string, Vec2>> displacement_log; // per object, total
};

json to_json(const CollisionReport& report);

struct CollisionResult {
    std::vector<ObjectNode> objects;
    CollisionReport report;
};

/// Pairs of objects (indices, i < j) whose footprints overlap and whose vertical extents overlap.
std::vector<OverlapRecord> find_overlaps(std::span<const ObjectNode> objects);

/// Translation-only overlap resolution under relation constraints.
///
/// Rigid units are formed by on_top, connecting_to and table_chair_pair edges. Each
/// iteration handles overlapping pairs deepest first; the minimal translation vector
/// is split between the two units in inverse proportion to footprint area. Wall-attached
/// units slide only along their wall, and no displacement may carry a corner out of the room.
/// When the units cannot move along the minimal vector, or the area split would push one
/// of them into a third object, the next cheapest separating axis or a one-sided push is used.
CollisionResult resolve_collisions(std::span<const ObjectNode> objects, const SceneGraph& graph,
                                   const RoomPolygon& polygon, std::span<const WallSegment> walls,
                                   const SnapConfig& cfg);

/// Output of the graph stage: resolved geometry plus the relation graph.
struct GraphDocument {
    ParsedScene scene; // objects hold the collision-resolved poses
    SceneGraph graph;
};

json to_json(const GraphDocument& doc);
GraphDocument graph_document_from_json(const json& j);

} // namespace scenesmith
