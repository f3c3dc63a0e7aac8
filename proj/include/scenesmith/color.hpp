#pragma once

#include <scenesmith/geometry.hpp>

namespace scenesmith {

/// D65 reference white, 2 degree observer.
inline const Vec3 kD65White{0.95047, 1.0, 1.08883};

/// sRGB in [0, 255] (unclamped doubles allowed) to CIE L*a*b*.
Vec3 srgb_to_lab(const Vec3& rgb);
/// CIE L*a*b* to sRGB in [0, 255], not clamped.
Vec3 lab_to_srgb(const Vec3& lab);

double srgb_to_linear(double c); // c in [0, 1]
double linear_to_srgb(double c);

} // namespace scenesmith
