#include <scenesmith/geometry.hpp>

#include <algorithm>
#include <limits>

namespace scenesmith {

double normalize_angle(double rad)
{
    double r = std::fmod(rad + kPi, 2.0 * kPi);
    if (r < 0.0) r += 2.0 * kPi;
    r -= kPi;
    // fmod can land exactly on +pi through rounding
    if (r >= kPi) r -= 2.0 * kPi;
    return r;
}

double angle_between(double a, double b)
{
    return std::abs(normalize_angle(a - b));
}

double signed_area(std::span<const Vec2> poly)
{
    const size_t n = poly.size();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += cross2(poly[i], poly[(i + 1) % n]);
    }
    return 0.5 * acc;
}

double perimeter(std::span<const Vec2> poly)
{
    double acc = 0.0;
    for (size_t i = 0; i < poly.size(); ++i) {
        acc += (poly[(i + 1) % poly.size()] - poly[i]).norm();
    }
    return acc;
}

namespace {

int orientation(const Vec2& a, const Vec2& b, const Vec2& c)
{
    const double v = cross2(b - a, c - a);
    const double scale = std::max({1.0, (b - a).norm(), (c - a).norm()});
    if (std::abs(v) <= 1e-12 * scale * scale) return 0;
    return v > 0 ? 1 : -1;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p)
{
    return std::min(a.x(), b.x()) - 1e-12 <= p.x() && p.x() <= std::max(a.x(), b.x()) + 1e-12 &&
           std::min(a.y(), b.y()) - 1e-12 <= p.y() && p.y() <= std::max(a.y(), b.y()) + 1e-12;
}

} // namespace

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2)
{
    const int o1 = orientation(p1, p2, q1);
    const int o2 = orientation(p1, p2, q2);
    const int o3 = orientation(q1, q2, p1);
    const int o4 = orientation(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

bool is_simple_polygon(std::span<const Vec2> poly)
{
    const size_t n = poly.size();
    if (n < 3) return false;
    for (size_t i = 0; i < n; ++i) {
        if ((poly[(i + 1) % n] - poly[i]).norm() <= 1e-12) return false;
    }
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a1 = poly[i];
        const Vec2& a2 = poly[(i + 1) % n];
        for (size_t j = i + 1; j < n; ++j) {
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            const Vec2& b1 = poly[j];
            const Vec2& b2 = poly[(j + 1) % n];
            if (adjacent) {
                // adjacent edges may only share their common vertex: reject folding back
                const Vec2& shared = (j == i + 1) ? a2 : a1;
                const Vec2& other_a = (j == i + 1) ? a1 : a2;
                const Vec2& other_b = (j == i + 1) ? b2 : b1;
                if (orientation(other_a, shared, other_b) == 0 &&
                    (other_a - shared).dot(other_b - shared) > 0.0) {
                    return false;
                }
                continue;
            }
            if (segments_intersect(a1, a2, b1, b2)) return false;
        }
    }
    return true;
}

Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b)
{
    const Vec2 d = b - a;
    const double len2 = d.squaredNorm();
    if (len2 <= 0.0) return a;
    const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    return a + t * d;
}

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b)
{
    return (p - closest_point_on_segment(p, a, b)).norm();
}

double distance_to_boundary(std::span<const Vec2> poly, const Vec2& p)
{
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < poly.size(); ++i) {
        best = std::min(best, distance_to_segment(p, poly[i], poly[(i + 1) % poly.size()]));
    }
    return best;
}

bool point_in_polygon(std::span<const Vec2> poly, const Vec2& p, double tol)
{
    if (distance_to_boundary(poly, p) <= tol) return true;
    bool inside = false;
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

double segment_distance(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2)
{
    if (segments_intersect(p1, p2, q1, q2)) return 0.0;
    return std::min({distance_to_segment(p1, q1, q2), distance_to_segment(p2, q1, q2),
                     distance_to_segment(q1, p1, p2), distance_to_segment(q2, p1, p2)});
}

std::optional<Vec2> line_intersection(const Vec2& p, const Vec2& d, const Vec2& q, const Vec2& e)
{
    const double denom = cross2(d, e);
    if (std::abs(denom) <= 1e-12 * d.norm() * e.norm()) return std::nullopt;
    const double s = cross2(q - p, e) / denom;
    return p + s * d;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip)
{
    std::vector<Vec2> out(subject.begin(), subject.end());
    const size_t m = clip.size();
    for (size_t i = 0; i < m && !out.empty(); ++i) {
        const Vec2& a = clip[i];
        const Vec2& b = clip[(i + 1) % m];
        const Vec2 edge = b - a;
        std::vector<Vec2> in = std::move(out);
        out.clear();
        for (size_t k = 0; k < in.size(); ++k) {
            const Vec2& cur = in[k];
            const Vec2& prev = in[(k + in.size() - 1) % in.size()];
            const double dc = cross2(edge, cur - a);
            const double dp = cross2(edge, prev - a);
            if (dc >= 0.0) {
                if (dp < 0.0) out.push_back(prev + (cur - prev) * (dp / (dp - dc)));
                out.push_back(cur);
            } else if (dp >= 0.0) {
                out.push_back(prev + (cur - prev) * (dp / (dp - dc)));
            }
        }
    }
    return out;
}

double convex_distance(std::span<const Vec2> a, std::span<const Vec2> b)
{
    if (point_in_polygon(a, b[0], 0.0) || point_in_polygon(b, a[0], 0.0)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < a.size(); ++i) {
        for (size_t j = 0; j < b.size(); ++j) {
            best = std::min(best, segment_distance(a[i], a[(i + 1) % a.size()], b[j],
                                                   b[(j + 1) % b.size()]));
        }
    }
    return best;
}

std::optional<double> ray_convex_hit(const Vec2& origin, const Vec2& dir, std::span<const Vec2> poly)
{
    if (point_in_polygon(poly, origin, 0.0)) return 0.0;
    std::optional<double> best;
    for (size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2 e = poly[(i + 1) % poly.size()] - a;
        const double denom = cross2(dir, e);
        if (std::abs(denom) < 1e-15) continue;
        const double t = cross2(a - origin, e) / denom;
        const double u = cross2(a - origin, dir) / denom;
        if (t >= 0.0 && u >= 0.0 && u <= 1.0) {
            if (!best || t < *best) best = t;
        }
    }
    return best;
}

} // namespace scenesmith
