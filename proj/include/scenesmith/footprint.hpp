#pragma once

#include <scenesmith/scene_model.hpp>

#include <array>
#include <vector>

namespace scenesmith {

/// Plan-view rectangle of an object: center, half extents along (lateral, facing), yaw.
struct Footprint {
    Vec2 center = Vec2::Zero();
    Vec2 half = Vec2(0.5, 0.5);
    double yaw = 0.0;

    static Footprint of(const OrientedBox& box);

    Vec2 axis_u() const { return {std::cos(yaw), std::sin(yaw)}; }
    Vec2 axis_v() const { return heading(yaw); }
    std::array<Vec2, 4> corners() const;
    double area() const { return 4.0 * half.x() * half.y(); }
};

/// Separating-axis result. `mtv` is the shortest translation of the first footprint
/// that separates it from the second (zero when already separated).
struct SatResult {
    bool overlapping = false;
    double depth = 0.0;
    Vec2 mtv = Vec2::Zero();
};

/// Overlap below this depth counts as touching, not overlapping.
inline constexpr double kOverlapEpsilon = 1e-9;

SatResult sat_test(const Footprint& a, const Footprint& b);

/// Every axis-wise translation of `a` that separates it from `b`, one per
/// direction of each of the four candidate axes. Empty when they do not overlap.
std::vector<SatResult> separating_translations(const Footprint& a, const Footprint& b);

double intersection_area(const Footprint& a, const Footprint& b);

/// Minimum plan distance between two footprints, zero when they intersect.
double footprint_gap(const Footprint& a, const Footprint& b);

} // namespace scenesmith
