#include <scenesmith/footprint.hpp>

#include <limits>

namespace scenesmith {

Footprint Footprint::of(const OrientedBox& box)
{
    return {box.center2(), Vec2(0.5 * box.dims.x(), 0.5 * box.dims.z()), box.yaw};
}

std::array<Vec2, 4> Footprint::corners() const
{
    const Vec2 u = half.x() * axis_u();
    const Vec2 v = half.y() * axis_v();
    return {center - u - v, center + u - v, center + u + v, center - u + v};
}

namespace {

void project(const Footprint& f, const Vec2& axis, double& lo, double& hi)
{
    const double c = f.center.dot(axis);
    const double r = f.half.x() * std::abs(f.axis_u().dot(axis)) + f.half.y() * std::abs(f.axis_v().dot(axis));
    lo = c - r;
    hi = c + r;
}

} // namespace

SatResult sat_test(const Footprint& a, const Footprint& b)
{
    SatResult res;
    double best = std::numeric_limits<double>::infinity();
    Vec2 best_dir = Vec2::Zero();
    for (const Vec2& axis : {a.axis_u(), a.axis_v(), b.axis_u(), b.axis_v()}) {
        double alo, ahi, blo, bhi;
        project(a, axis, alo, ahi);
        project(b, axis, blo, bhi);
        const double push_pos = bhi - alo; // move a along +axis
        const double push_neg = ahi - blo; // move a along -axis
        if (push_pos <= kOverlapEpsilon || push_neg <= kOverlapEpsilon) return res;
        if (push_pos < best) {
            best = push_pos;
            best_dir = axis;
        }
        if (push_neg < best) {
            best = push_neg;
            best_dir = -axis;
        }
    }
    res.overlapping = true;
    res.depth = best;
    res.mtv = best * best_dir;
    return res;
}

std::vector<SatResult> separating_translations(const Footprint& a, const Footprint& b)
{
    std::vector<SatResult> out;
    for (const Vec2& axis : {a.axis_u(), a.axis_v(), b.axis_u(), b.axis_v()}) {
        double alo, ahi, blo, bhi;
        project(a, axis, alo, ahi);
        project(b, axis, blo, bhi);
        const double push_pos = bhi - alo;
        const double push_neg = ahi - blo;
        if (push_pos <= kOverlapEpsilon || push_neg <= kOverlapEpsilon) return {};
        out.push_back({true, push_pos, push_pos * axis});
        out.push_back({true, push_neg, -push_neg * axis});
    }
    return out;
}

double intersection_area(const Footprint& a, const Footprint& b)
{
    const auto ca = a.corners();
    const auto cb = b.corners();
    const auto clipped = clip_convex(ca, cb);
    return clipped.size() < 3 ? 0.0 : std::abs(signed_area(clipped));
}

double footprint_gap(const Footprint& a, const Footprint& b)
{
    const auto ca = a.corners();
    const auto cb = b.corners();
    return convex_distance(ca, cb);
}

} // namespace scenesmith
