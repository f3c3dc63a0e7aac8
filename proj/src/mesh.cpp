#include <scenesmith/mesh.hpp>
#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace scenesmith {

namespace {

int parse_index(std::string_view token, size_t vertex_count, int line_no)
{
    const auto slash = token.find('/');
    if (slash != std::string_view::npos) token = token.substr(0, slash);
    int idx = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), idx);
    if (ec != std::errc() || ptr != token.data() + token.size() || idx == 0) {
        throw ValidationError(fmt::format("obj line {}: bad face index '{}'", line_no, token));
    }
    const long resolved = idx > 0 ? idx - 1 : static_cast<long>(vertex_count) + idx;
    if (resolved < 0 || resolved >= static_cast<long>(vertex_count)) {
        throw ValidationError(fmt::format("obj line {}: face index {} out of range", line_no, idx));
    }
    return static_cast<int>(resolved);
}

} // namespace

Mesh parse_obj(std::string_view text)
{
    Mesh mesh;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw ValidationError(fmt::format("obj line {}: bad vertex", line_no));
            if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
                throw ValidationError(fmt::format("obj line {}: non-finite vertex", line_no));
            }
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ls >> tok) poly.push_back(parse_index(tok, mesh.vertices.size(), line_no));
            if (poly.size() < 3) throw ValidationError(fmt::format("obj line {}: face needs 3 vertices", line_no));
            for (size_t i = 1; i + 1 < poly.size(); ++i) mesh.triangles.push_back({poly[0], poly[i], poly[i + 1]});
        }
    }
    return mesh;
}

Mesh load_obj(const std::filesystem::path& path)
{
    try {
        return parse_obj(read_text_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string to_obj(const Mesh& mesh)
{
    std::string out;
    for (const auto& v : mesh.vertices) out += fmt::format("v {} {} {}\n", v.x(), v.y(), v.z());
    for (const auto& t : mesh.triangles) out += fmt::format("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1);
    return out;
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) { write_text_file(path, to_obj(mesh)); }

Aabb bounds(const Mesh& mesh)
{
    Aabb box;
    if (mesh.vertices.empty()) return box;
    box.min = box.max = mesh.vertices.front();
    for (const auto& v : mesh.vertices) {
        box.min = box.min.cwiseMin(v);
        box.max = box.max.cwiseMax(v);
    }
    return box;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

double surface_area(const Mesh& mesh)
{
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    }
    return total;
}

Mesh normalize_mesh(const Mesh& mesh)
{
    if (mesh.triangles.empty()) throw BenchmarkError("degenerate mesh: no triangles");
    const Aabb box = bounds(mesh);
    const Vec3 center = box.center();
    const double extent = box.extent().maxCoeff();
    if (!(extent > 0.0) || !std::isfinite(extent)) throw BenchmarkError("degenerate mesh: zero extent");
    // A normalized mesh is returned as is, so normalization is an exact fixpoint.
    if (center.cwiseAbs().maxCoeff() <= 1e-12 && std::abs(extent - 1.0) <= 1e-12) return mesh;
    Mesh out = mesh;
    for (auto& v : out.vertices) v = (v - center) / extent;
    return out;
}

Mesh box_mesh(const Vec3& size)
{
    const Vec3 h = 0.5 * size;
    Mesh m;
    for (int i = 0; i < 8; ++i) {
        m.vertices.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
    }
    // outward-facing, counter-clockwise
    m.triangles = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                   {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
    return m;
}

void append_mesh(Mesh& mesh, const Mesh& part)
{
    const int base = static_cast<int>(mesh.vertices.size());
    mesh.vertices.insert(mesh.vertices.end(), part.vertices.begin(), part.vertices.end());
    for (const auto& t : part.triangles) mesh.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
}

std::optional<double> raycast(const Mesh& mesh, const Vec3& origin, const Vec3& dir)
{
    constexpr double eps = 1e-12;
    std::optional<double> best;
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3 e1 = mesh.vertices[t[1]] - a;
        const Vec3 e2 = mesh.vertices[t[2]] - a;
        const Vec3 p = dir.cross(e2);
        const double det = e1.dot(p);
        if (std::abs(det) < eps) continue;
        const double inv = 1.0 / det;
        const Vec3 s = origin - a;
        const double u = s.dot(p) * inv;
        if (u < -eps || u > 1.0 + eps) continue;
        const Vec3 q = s.cross(e1);
        const double v = dir.dot(q) * inv;
        if (v < -eps || u + v > 1.0 + eps) continue;
        const double dist = e2.dot(q) * inv;
        if (dist >= 0.0 && (!best || dist < *best)) best = dist;
    }
    return best;
}

} // namespace scenesmith
