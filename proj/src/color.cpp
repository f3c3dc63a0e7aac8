#include <scenesmith/color.hpp>

#include <cmath>

namespace scenesmith {

namespace {

constexpr double kEpsilon = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

double f(double t) { return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; }

double f_inv(double t)
{
    const double t3 = t * t * t;
    return t3 > kEpsilon ? t3 : (116.0 * t - 16.0) / kKappa;
}

} // namespace

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double linear_to_srgb(double c) { return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055; }

Vec3 srgb_to_lab(const Vec3& rgb)
{
    const double r = srgb_to_linear(rgb.x() / 255.0);
    const double g = srgb_to_linear(rgb.y() / 255.0);
    const double b = srgb_to_linear(rgb.z() / 255.0);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const double fx = f(x / kD65White.x());
    const double fy = f(y / kD65White.y());
    const double fz = f(z / kD65White.z());
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Vec3 lab_to_srgb(const Vec3& lab)
{
    const double fy = (lab.x() + 16.0) / 116.0;
    const double fx = fy + lab.y() / 500.0;
    const double fz = fy - lab.z() / 200.0;
    const double x = kD65White.x() * f_inv(fx);
    const double y = lab.x() > kKappa * kEpsilon ? kD65White.y() * fy * fy * fy : kD65White.y() * lab.x() / kKappa;
    const double z = kD65White.z() * f_inv(fz);
    const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
    auto enc = [](double c) { return 255.0 * (c < 0.0 ? -linear_to_srgb(-c) : linear_to_srgb(c)); };
    return {enc(r), enc(g), enc(b)};
}

} // namespace scenesmith
