#pragma once

#include <scenesmith/graph_build.hpp>
#include <scenesmith/mesh.hpp>
#include <scenesmith/retrieval.hpp>
#include <scenesmith/services.hpp>

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scenesmith {

struct AssembleConfig {
    double wall_thickness = 0.1;
    double slab_thickness = 0.1;
    double default_density = 150.0;                                 // kg/m^3
    std::map<std::string, double> densities{{"sofa", 60.0}};        // per category
    double structural_density = 1000.0;
    double distortion_tolerance = 0.25;
    bool immovable_passive = false; // objects flagged movable=false become passive bodies

    void validate() const;
};

json to_json(const AssembleConfig& cfg);
AssembleConfig assemble_config_from_json(const json& j);

/// Triangulates a simple CCW polygon by ear clipping.
std::vector<std::array<int, 3>> triangulate(std::span<const Vec2> polygon);

/// Prism over a plan-view polygon between two heights.
Mesh prism_mesh(std::span<const Vec2> footprint, double z0, double z1);

/// Rectangle on a wall face, in wall coordinates: s along the wall from p0, z above the floor.
struct FacePiece {
    double s0 = 0.0, s1 = 0.0, z0 = 0.0, z1 = 0.0;
    double area() const { return (s1 - s0) * (z1 - z0); }
};

struct WallSpec {
    std::string id;
    Vec2 p0, p1;                     // room-side line
    double height = 0.0;
    double thickness = 0.0;
    std::array<Vec2, 4> footprint{}; // p0, p1, outer p1, outer p0 (mitred)
    std::vector<Opening> openings;
    std::vector<FacePiece> pieces;   // solid parts of the face

    double length() const { return (p1 - p0).norm(); }
    double face_area() const;
    /// Outer point matching a position s along the inner line.
    Vec2 outer_at(double s) const;
    Mesh mesh() const;
};

/// One mitred prism per polygon edge, extruded outward; each keeps the matching segment's height.
std::vector<WallSpec> build_walls(const RoomPolygon& polygon, std::span<const WallSegment> segments, double thickness);

/// Largest plan-view distance from sampled boundary points to the nearest wall footprint.
double plan_coverage_gap(const RoomPolygon& polygon, std::span<const WallSpec> walls, int samples = 1000);

struct Transform {
    Vec3 translation = Vec3::Zero();
    double yaw = 0.0;
    Vec3 scale = Vec3::Ones(); // applied in the asset frame (x lateral, y facing, z up)

    Vec3 apply(const Vec3& p) const;
};

Mesh transformed(const Mesh& mesh, const Transform& t);

struct PhysicsSpec {
    double mass_kg = 0.0;
    bool active = false;
    std::string collision_source = "mesh"; // mesh | box
    std::vector<std::string> flags;
};

struct Placement {
    std::string id;
    std::string kind;        // object | wall | floor | ceiling | door | window
    std::string category;
    std::string subcategory;
    std::string asset;       // asset id, "parametric:<kind>", or empty for placeholders and structure
    bool placeholder = false;
    std::string wall;        // openings only
    Transform transform;
    OrientedBox box;         // placed bounding box
    Vec3 canonical = Vec3::Ones(); // asset extents in (w, h, l) order
    Vec3 mesh_center = Vec3::Zero();
    Mesh mesh;               // world-space geometry used for re-seating
    std::vector<std::string> cluster;
    json joints = json::array();
    json materials = json::object();
    PhysicsSpec physics;
    std::vector<std::string> flags;
};

/// Door and window frames for every opening, plus the flag log for clamped openings.
std::vector<Placement> cut_openings(std::vector<WallSpec>& walls, std::vector<std::string>& log);

/// Positions retrieved assets in their detected boxes (placeholders when missing) and re-seats
/// stacked objects onto their supporters' meshes.
std::vector<Placement> place_objects(const GraphDocument& graph, const RetrievalResult& retrieval,
                                     const AssetDatabase& db, const AssembleConfig& cfg);

/// Masses and body types. Oracle masses that are not positive fall back to the density table.
void assign_physics(std::span<Placement> placements, Oracle& oracle, const AssembleConfig& cfg);

struct Provenance {
    std::string config_hash;
    json seeds = json::object();
    json stage_versions = json::object();
    json inputs = json::object();   // artifact hashes
};

/// Assembles and serializes the full scene document.
json assemble_scene(const GraphDocument& graph, const RetrievalResult& retrieval, const json& materials,
                    const AssetDatabase& db, Oracle& physics_oracle, const AssembleConfig& cfg,
                    const Provenance& provenance);

inline constexpr const char* kSceneSchema = "scenesmith/1";

/// Structural checks of a scene document against the published schema.
std::vector<std::string> validate_scene_document(const json& doc);

} // namespace scenesmith
