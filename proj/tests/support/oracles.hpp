#pragma once

// Slow reference implementations used to check the library.

#include <scenesmith/evalbench.hpp>
#include <scenesmith/footprint.hpp>
#include <scenesmith/image.hpp>
#include <scenesmith/material.hpp>
#include <scenesmith/random.hpp>
#include <scenesmith/retrieval.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace oracle {

using namespace scenesmith;

/// Bidirectional mean nearest-neighbour L1 distance by exhaustive search.
double chamfer_bruteforce(std::span<const Vec3> a, std::span<const Vec3> b);

/// Largest all-true rectangle area by checking every rectangle.
long largest_rectangle_area(const Mask& mask);
bool rectangle_all_true(const Mask& mask, const PixelRect& r);

/// Overlap verdict from 1 mm cells: a cell counts when its centre lies inside both footprints.
bool raster_overlap(const Footprint& a, const Footprint& b, double cell = 1e-3);

/// Mean silhouette straight from the definition (Euclidean distances).
double silhouette(const EmbeddingMatrix& points, std::span<const int> labels);

/// Mean SSIM over all valid 8x8 windows of the luma, each window summed directly.
double ssim_windows(const Image& a, const Image& b);

/// Two-sided central interval holding at least `mass` of Binomial(n, p).
std::pair<long, long> binomial_interval(long n, double p, double mass);

/// True when both labelings induce the same partition.
bool same_partition(std::span<const int> a, std::span<const int> b);

Image random_image(int w, int h, int channels, Rng& rng);
Mask random_mask(int w, int h, double density, Rng& rng);

std::filesystem::path temp_dir(const std::string& tag);

} // namespace oracle
