#pragma once

#include <scenesmith/scene_model.hpp>

#include <span>
#include <string>
#include <vector>

namespace scenesmith {

/// Thresholds for wall closure, snapping and object placement. Lengths in metres,
/// angles in radians (degrees at the JSON boundary).
struct SnapConfig {
    double endpoint_snap_radius = 0.05;
    double grid_pitch = 0.01;
    double angle_snap = deg_to_rad(15.0);
    double wall_align_max_dist = 0.2;
    double wall_align_max_angle = deg_to_rad(10.0);
    double wall_clearance = 0.01;
    double next_to_max_gap = 0.1;
    int max_collision_iters = 10;
    int max_containment_passes = 20;

    /// Throws ValidationError when a field is out of range.
    void validate() const;
};

json to_json(const SnapConfig& cfg);
SnapConfig snap_config_from_json(const json& j);

/// Human-readable record of every geometric edit.
using AdjustmentLog = std::vector<std::string>;

struct WallClosure {
    RoomPolygon polygon;
    /// One wall per polygon edge, oriented along the CCW boundary.
    std::vector<WallSegment> walls;
    /// Input walls that are not part of the chosen loop.
    std::vector<std::string> unused_walls;
    AdjustmentLog log;
};

/// Snaps nearby endpoints, finds the largest closed loop in the wall graph and
/// joins loose ends when no loop exists. Throws LayoutError when closure is impossible.
WallClosure close_walls(std::span<const WallSegment> segments, const SnapConfig& cfg);

/// Axis-aligns near-axis edges (rotation about the edge midpoint) and quantises
/// vertices to the grid. Snaps that would break simplicity are reverted.
RoomPolygon snap_to_grid(const RoomPolygon& polygon, const SnapConfig& cfg, AdjustmentLog* log = nullptr);

/// Rebuilds wall endpoints from polygon edges (wall i <-> edge i), clamping openings
/// to the new lengths.
std::vector<WallSegment> walls_from_polygon(const RoomPolygon& polygon, std::span<const WallSegment> walls,
                                            AdjustmentLog* log = nullptr);

/// Moves objects whose back faces sit near a wall flush against it and records the attachment.
std::vector<ObjectNode> align_objects_to_walls(std::span<const ObjectNode> objects,
                                               std::span<const WallSegment> walls, const SnapConfig& cfg,
                                               AdjustmentLog* log = nullptr);

struct Containment {
    RoomPolygon polygon;
    std::vector<WallSegment> walls;
    int passes = 0;
    AdjustmentLog log;
};

/// Expands offending walls outward until every object footprint corner lies inside
/// the room. Throws LayoutError if the pass limit is reached.
Containment pull_objects_inside(std::span<const ObjectNode> objects, const RoomPolygon& polygon,
                                std::span<const WallSegment> walls, const SnapConfig& cfg);

/// Translates polygon edge `edge` outward by `delta`, re-closing the loop. Adjacent
/// parallel edges get a short connecting wall.
void offset_edge(RoomPolygon& polygon, std::vector<WallSegment>& walls, size_t edge, double delta);

struct ParsedScene {
    Scan scan; // walls replaced by the room walls, objects adjusted
    RoomPolygon polygon;
    std::vector<std::string> unused_walls;
    AdjustmentLog log;
    std::string image_root; // directory that frame and crop image paths are relative to
};

/// Wall closure, grid snapping, wall alignment and in-room adjustment, in that order.
ParsedScene parse_scan(const Scan& scan, const SnapConfig& cfg);

json to_json(const ParsedScene& parsed);
ParsedScene parsed_scene_from_json(const json& j);

} // namespace scenesmith
