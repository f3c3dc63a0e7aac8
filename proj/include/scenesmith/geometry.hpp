#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace scenesmith {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

/// Wraps an angle into [-pi, pi).
double normalize_angle(double rad);

/// Smallest absolute difference between two angles, in [0, pi].
double angle_between(double a, double b);

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Unit direction for a plan-view heading.
inline Vec2 heading(double yaw) { return {-std::sin(yaw), std::cos(yaw)}; }

/// Shoelace area, positive for counter-clockwise vertex order.
double signed_area(std::span<const Vec2> poly);

double perimeter(std::span<const Vec2> poly);

/// True when no two non-adjacent edges touch and no edge is degenerate.
bool is_simple_polygon(std::span<const Vec2> poly);

/// Point-in-polygon with the boundary (within `tol`) counted as inside.
bool point_in_polygon(std::span<const Vec2> poly, const Vec2& p, double tol = 1e-9);

Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b);
double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b);

/// Distance from `p` to the polygon boundary.
double distance_to_boundary(std::span<const Vec2> poly, const Vec2& p);

/// Closed segment intersection test, collinear overlap included.
bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2);

double segment_distance(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2);

/// Intersection of the infinite lines p + s*d and q + t*e; nullopt when parallel.
std::optional<Vec2> line_intersection(const Vec2& p, const Vec2& d, const Vec2& q, const Vec2& e);

/// Sutherland-Hodgman clip of `subject` by the convex CCW polygon `clip`.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Minimum distance between two convex polygons, zero when they intersect.
double convex_distance(std::span<const Vec2> a, std::span<const Vec2> b);

/// Ray parameter t >= 0 of the first hit of origin + t*dir against a convex polygon.
std::optional<double> ray_convex_hit(const Vec2& origin, const Vec2& dir, std::span<const Vec2> poly);

} // namespace scenesmith
