#pragma once

#include <scenesmith/geometry.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scenesmith {

/// Indexed triangle mesh.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }
    bool operator==(const Mesh&) const = default;
};

struct Aabb {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();
    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
};

/// Reads the v/f subset of Wavefront OBJ. Polygons are fan-triangulated; negative
/// (relative) indices and the v/vt/vn slash forms are accepted.
Mesh parse_obj(std::string_view text);
Mesh load_obj(const std::filesystem::path& path);
std::string to_obj(const Mesh& mesh);
void save_obj(const std::filesystem::path& path, const Mesh& mesh);

Aabb bounds(const Mesh& mesh);
double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
double surface_area(const Mesh& mesh);

/// Centers the bounding box at the origin and scales uniformly so the largest extent is 1.
/// Throws BenchmarkError for an empty or zero-extent mesh.
Mesh normalize_mesh(const Mesh& mesh);

/// Axis-aligned box centered at the origin with the given full extents.
Mesh box_mesh(const Vec3& size);

/// Appends `part` to `mesh`, reindexing its triangles.
void append_mesh(Mesh& mesh, const Mesh& part);

/// Nearest ray/triangle intersection distance (Moller-Trumbore), if any with t >= 0.
std::optional<double> raycast(const Mesh& mesh, const Vec3& origin, const Vec3& dir);

} // namespace scenesmith
