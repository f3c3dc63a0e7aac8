#include <scenesmith/image.hpp>
#include <scenesmith/digest.hpp>
#include <scenesmith/errors.hpp>

#include <png.h>

#include <algorithm>
#include <cstring>

namespace scenesmith {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill)
{}

Image Image::crop(int x, int y, int w, int h) const
{
    const int x0 = std::clamp(x, 0, width);
    const int y0 = std::clamp(y, 0, height);
    const int x1 = std::clamp(x + w, 0, width);
    const int y1 = std::clamp(y + h, 0, height);
    Image out(std::max(0, x1 - x0), std::max(0, y1 - y0), channels);
    for (int yy = y0; yy < y1; ++yy) {
        const auto* src = &data[(static_cast<size_t>(yy) * width + x0) * channels];
        std::copy_n(src, static_cast<size_t>(x1 - x0) * channels,
                    &out.data[static_cast<size_t>(yy - y0) * out.width * channels]);
    }
    return out;
}

Image Image::to_rgb() const
{
    if (channels == 3) return *this;
    Image out(width, height, 3);
    for (size_t i = 0; i < static_cast<size_t>(width) * height; ++i) {
        const std::uint8_t v = data[i * channels];
        out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = v;
    }
    return out;
}

Mask::Mask(int w, int h, bool fill) : width(w), height(h), bits(static_cast<size_t>(w) * h, fill ? 1 : 0) {}

Image decode_png(std::span<const std::uint8_t> bytes)
{
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw Error(std::string("png decode failed: ") + img.message);
    }
    const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
    img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    Image out(static_cast<int>(img.width), static_cast<int>(img.height), gray ? 1 : 3);
    if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
        png_image_free(&img);
        throw Error(std::string("png decode failed: ") + img.message);
    }
    return out;
}

Image read_png(const std::filesystem::path& path)
{
    try {
        return decode_png(read_file_bytes(path));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Image& image)
{
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.data.data(), 0, nullptr)) {
        throw Error(std::string("png encode failed: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.data.data(), 0, nullptr)) {
        throw Error(std::string("png encode failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

void write_png(const std::filesystem::path& path, const Image& image)
{
    write_file_bytes(path, encode_png(image));
}

Mask mask_from_image(const Image& image)
{
    Mask m(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) m.set(x, y, image.at(x, y, 0) != 0);
    }
    return m;
}

} // namespace scenesmith
