#pragma once

#include <scenesmith/geometry.hpp>

#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scenesmith {

using json = nlohmann::json;

/// Closed set of room-defining categories recognised by the capture system.
enum class Category {
    bathtub,
    bed,
    chair,
    door,
    fireplace,
    oven,
    refrigerator,
    sink,
    sofa,
    stairs,
    storage,
    stove,
    table,
    television,
    toilet,
    washer_dryer,
    window,
};

inline constexpr int kCategoryCount = 17;

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view name);

/// Box with a yaw about +Z. dims = (width along the lateral axis, height along Z,
/// length along the facing axis). At yaw 0 the object faces +Y.
struct OrientedBox {
    Vec3 center = Vec3::Zero();
    Vec3 dims = Vec3::Ones();
    double yaw = 0.0;
    // carried through for export only; layout math is planar
    double pitch = 0.0;
    double roll = 0.0;

    double width() const { return dims.x(); }
    double height() const { return dims.y(); }
    double length() const { return dims.z(); }
    double bottom() const { return center.z() - 0.5 * dims.y(); }
    double top() const { return center.z() + 0.5 * dims.y(); }

    Vec2 center2() const { return center.head<2>(); }
    Vec2 facing() const { return heading(yaw); }
    Vec2 lateral() const { return {std::cos(yaw), std::sin(yaw)}; }

    /// Plan-view corners, counter-clockwise.
    std::array<Vec2, 4> footprint() const;
    double footprint_area() const { return dims.x() * dims.z(); }

    /// Midpoint of the face opposite the facing direction, in plan view.
    Vec2 back_anchor() const { return center2() - 0.5 * dims.z() * facing(); }

    bool operator==(const OrientedBox&) const = default;
};

/// The eight corners: center plus rotated half extents.
std::array<Vec3, 8> box_corners(const OrientedBox& box);

struct CropRef {
    std::string frame_id;
    std::array<int, 4> bbox_px{0, 0, 0, 0}; // x, y, w, h
    double visibility = 0.0;
    std::string image; // optional direct path to a pre-cropped image
    bool operator==(const CropRef&) const = default;
};

struct ObjectNode {
    std::string id;
    OrientedBox box;
    Category category = Category::chair;
    std::string subcategory;
    std::vector<CropRef> crops; // non-increasing visibility
    std::optional<std::string> wall_attachment;
    bool articulated = false;
    bool movable = true;
    bool operator==(const ObjectNode&) const = default;
};

enum class OpeningKind { door, window };
std::string_view to_string(OpeningKind k);

/// A cut in a wall: [start, end] metres along the wall from p0, [bottom, top] metres above the floor.
struct Opening {
    std::string id;
    OpeningKind kind = OpeningKind::door;
    double start = 0.0;
    double end = 0.0;
    double bottom = 0.0;
    double top = 0.0;
    bool operator==(const Opening&) const = default;
};

struct WallSegment {
    std::string id;
    Vec2 p0 = Vec2::Zero();
    Vec2 p1 = Vec2::Zero();
    double height = 2.5;
    std::vector<Opening> openings;

    double length() const { return (p1 - p0).norm(); }
    Vec2 direction() const { return (p1 - p0).normalized(); }
    /// Left-hand normal; points into the room when the wall follows a CCW polygon.
    Vec2 inward_normal() const
    {
        const Vec2 d = direction();
        return {-d.y(), d.x()};
    }
    bool operator==(const WallSegment&) const = default;
};

/// Simple CCW room boundary. Edge i runs from vertices[i] to vertices[i+1] and came
/// from wall source_segment_ids[i].
struct RoomPolygon {
    std::vector<Vec2> vertices;
    std::vector<std::string> source_segment_ids;

    double area() const { return signed_area(vertices); }
    bool operator==(const RoomPolygon&) const = default;
};

enum class NodeKind { wall, object, door, window };
enum class Relation { attached_to_wall, on_top, table_chair_pair, connecting_to };

std::string_view to_string(NodeKind k);
std::string_view to_string(Relation r);
std::optional<Relation> parse_relation(std::string_view s);

struct GraphNode {
    std::string id;
    NodeKind kind = NodeKind::object;
    bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
    Relation kind = Relation::on_top;
    std::string src;
    std::string dst;
    auto operator<=>(const GraphEdge&) const = default;
};

struct SceneGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;

    const GraphNode* find(std::string_view id) const;
    std::vector<GraphEdge> edges_of(Relation kind) const;

    /// Returns a description of the first violated invariant, or nullopt.
    std::optional<std::string> check_invariants() const;
};

struct CameraFrame {
    std::string id;
    Mat3 rotation = Mat3::Identity(); // world -> camera
    Vec3 translation = Vec3::Zero();
    double fx = 500.0, fy = 500.0, cx = 320.0, cy = 240.0;
    int width = 640, height = 480;
    std::string image;
    bool operator==(const CameraFrame&) const = default;
};

struct Scan {
    std::vector<WallSegment> walls;
    std::vector<ObjectNode> objects;
    std::vector<CameraFrame> frames;

    const CameraFrame* frame(std::string_view id) const;
    const ObjectNode* object(std::string_view id) const;
    const WallSegment* wall(std::string_view id) const;
};

struct ValidationIssue {
    std::string id; // offending element, empty for document-level problems
    std::string message;
};

struct ScanValidation {
    Scan scan;
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    std::string summary() const;
};

/// Parses and checks a raw scan document. Never throws on bad input; every problem
/// is listed in the returned report.
ScanValidation validate_scan(const json& doc);

json to_json(const Scan& scan);
json to_json(const OrientedBox& box);
json to_json(const ObjectNode& obj);
json to_json(const WallSegment& wall);
json to_json(const CameraFrame& frame);
json to_json(const RoomPolygon& poly);
json to_json(const Opening& opening);
json to_json(const SceneGraph& graph);

OrientedBox box_from_json(const json& j);
ObjectNode object_from_json(const json& j);
WallSegment wall_from_json(const json& j);
CameraFrame frame_from_json(const json& j);
RoomPolygon polygon_from_json(const json& j);
SceneGraph graph_from_json(const json& j);

json vec_json(const Vec2& v);
json vec_json(const Vec3& v);
Vec2 vec2_from_json(const json& j);
Vec3 vec3_from_json(const json& j);

/// Serialises with sorted keys and shortest round-trip floats, two-space indent.
std::string dump_canonical(const json& j);

} // namespace scenesmith
