#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace numgen {

// Opaque 8-bit RGB image, row-major, interleaved.
struct Image {
    int w = 0;
    int h = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int width, int height, std::uint8_t gray);

    std::uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * w + x); }
    const std::uint8_t* pixel(int x, int y) const {
        return rgb.data() + 3 * (static_cast<std::size_t>(y) * w + x);
    }

    friend bool operator==(const Image&, const Image&) = default;
};

// 8-bit RGBA with straight (non-premultiplied) alpha.
struct LayerImage {
    int w = 0;
    int h = 0;
    std::vector<std::uint8_t> rgba;

    LayerImage() = default;
    LayerImage(int width, int height);  // fully transparent

    std::uint8_t* pixel(int x, int y) { return rgba.data() + 4 * (static_cast<std::size_t>(y) * w + x); }
    const std::uint8_t* pixel(int x, int y) const {
        return rgba.data() + 4 * (static_cast<std::size_t>(y) * w + x);
    }
    std::uint8_t alpha(int x, int y) const { return pixel(x, y)[3]; }

    friend bool operator==(const LayerImage&, const LayerImage&) = default;
};

LayerImage resize_nearest(const LayerImage& layer, int w, int h);

void write_png(const std::filesystem::path& path, const Image& image);
void write_png(const std::filesystem::path& path, const LayerImage& layer);
Image read_png_rgb(const std::filesystem::path& path);
LayerImage read_png_rgba(const std::filesystem::path& path);

} // namespace numgen
