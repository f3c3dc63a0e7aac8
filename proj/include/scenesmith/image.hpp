#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace scenesmith {

/// 8-bit interleaved raster, row-major, 1 (gray) or 3 (RGB) channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0);

    bool empty() const { return width <= 0 || height <= 0; }
    std::uint8_t& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    std::uint8_t at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }

    /// Sub-image, clamped to the raster bounds.
    Image crop(int x, int y, int w, int h) const;

    /// Converts gray to RGB by replication; RGB is returned unchanged.
    Image to_rgb() const;

    bool operator==(const Image&) const = default;
};

/// Binary mask stored one byte per pixel (0 / 1).
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int w, int h, bool fill = false);

    bool at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
};

Image read_png(const std::filesystem::path& path);
Image decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

/// Nonzero pixels of the first channel become mask pixels.
Mask mask_from_image(const Image& image);

} // namespace scenesmith
