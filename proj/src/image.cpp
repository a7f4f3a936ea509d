#include "numgen/image.hpp"

#include <png.h>

#include <cstring>

#include "numgen/error.hpp"

namespace numgen {

Image::Image(int width, int height, std::uint8_t gray)
    : w(width), h(height), rgb(3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height), gray) {}

LayerImage::LayerImage(int width, int height)
    : w(width), h(height), rgba(4 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {}

LayerImage resize_nearest(const LayerImage& layer, int w, int h) {
    if (w == layer.w && h == layer.h) return layer;
    LayerImage out(w, h);
    for (int y = 0; y < h; ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y) * layer.h / h);
        for (int x = 0; x < w; ++x) {
            const int sx = static_cast<int>(static_cast<long long>(x) * layer.w / w);
            std::memcpy(out.pixel(x, y), layer.pixel(sx, sy), 4);
        }
    }
    return out;
}

namespace {

void write_png_impl(const std::filesystem::path& path, int w, int h, png_uint_32 format, const void* data) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = format;
    image.flags = PNG_IMAGE_FLAG_FAST;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, data, 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw Error("write_png: " + path.string() + ": " + msg);
    }
}

template <typename Out>
Out read_png_impl(const std::filesystem::path& path, png_uint_32 format, int channels) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw FormatError("read_png: " + path.string() + ": " + image.message);
    image.format = format;
    Out out;
    out.w = static_cast<int>(image.width);
    out.h = static_cast<int>(image.height);
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("read_png: " + path.string() + ": " + msg);
    }
    if (buffer.size() != static_cast<std::size_t>(channels) * out.w * out.h)
        throw FormatError("read_png: unexpected buffer size for " + path.string());
    if constexpr (requires { out.rgba; })
        out.rgba = std::move(buffer);
    else
        out.rgb = std::move(buffer);
    return out;
}

} // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
    write_png_impl(path, image.w, image.h, PNG_FORMAT_RGB, image.rgb.data());
}

void write_png(const std::filesystem::path& path, const LayerImage& layer) {
    write_png_impl(path, layer.w, layer.h, PNG_FORMAT_RGBA, layer.rgba.data());
}

Image read_png_rgb(const std::filesystem::path& path) {
    return read_png_impl<Image>(path, PNG_FORMAT_RGB, 3);
}

LayerImage read_png_rgba(const std::filesystem::path& path) {
    return read_png_impl<LayerImage>(path, PNG_FORMAT_RGBA, 4);
}

} // namespace numgen
