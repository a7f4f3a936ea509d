#include "numgen/noise_prior.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "numgen/error.hpp"
#include "numgen/rng.hpp"

namespace numgen {

NoiseTensor::NoiseTensor(int c, int height, int width, float fill)
    : channels(c), h(height), w(width),
      values(static_cast<std::size_t>(c) * static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {
    if (c < 1 || height < 1 || width < 1) throw ShapeError("NoiseTensor: dimensions must be positive");
}

NoiseTensor sample_noise(int channels, int h, int w, std::uint64_t seed) {
    NoiseTensor out(channels, h, w);
    Rng rng(seed);
    for (float& v : out.values) v = static_cast<float>(rng.normal());
    return out;
}

std::vector<LatentBox> map_boxes_to_latent(const LayoutSpec& layout, int latent_h, int latent_w) {
    if (layout.canvas_w <= 0 || layout.canvas_h <= 0) throw ShapeError("map_boxes_to_latent: empty canvas");
    const double sx = static_cast<double>(latent_w) / layout.canvas_w;
    const double sy = static_cast<double>(latent_h) / layout.canvas_h;
    std::vector<LatentBox> out;
    out.reserve(layout.boxes.size());
    for (const BBox& b : layout.boxes) out.push_back({b.x * sx, b.y * sy, b.w * sx, b.h * sy});
    return out;
}

namespace {

double overlap_1d(double lo, double hi, int cell) {
    return std::max(0.0, std::min(hi, cell + 1.0) - std::max(lo, static_cast<double>(cell)));
}

void check_in_grid(std::span<const LatentBox> boxes, int h, int w) {
    constexpr double kSlack = 1e-9;
    for (const LatentBox& b : boxes)
        if (b.x < -kSlack || b.y < -kSlack || b.x + b.w > w + kSlack || b.y + b.h > h + kSlack)
            throw ShapeError("noise prior: box lies outside the latent grid");
}

} // namespace

std::vector<Cell> rasterize_box(const LatentBox& box, int grid_h, int grid_w) {
    std::vector<Cell> cells;
    if (box.w <= 0.0 || box.h <= 0.0) return cells;
    const int r0 = std::max(0, static_cast<int>(std::floor(box.y)));
    const int r1 = std::min(grid_h - 1, static_cast<int>(std::ceil(box.y + box.h)) - 1);
    const int c0 = std::max(0, static_cast<int>(std::floor(box.x)));
    const int c1 = std::min(grid_w - 1, static_cast<int>(std::ceil(box.x + box.w)) - 1);
    for (int r = r0; r <= r1; ++r) {
        const double cover_y = overlap_1d(box.y, box.y + box.h, r);
        for (int c = c0; c <= c1; ++c)
            if (cover_y * overlap_1d(box.x, box.x + box.w, c) > 0.5) cells.push_back({r, c});
    }
    return cells;
}

NoiseTensor apply_uniform_scaled(const NoiseTensor& noise, std::span<const LatentBox> boxes, double gamma) {
    if (!(gamma > 0.0)) throw DegenerateInput("apply_uniform_scaled: gamma must be > 0");
    check_in_grid(boxes, noise.h, noise.w);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(noise.h) * noise.w, 0);
    for (const LatentBox& b : boxes)
        for (const Cell& cell : rasterize_box(b, noise.h, noise.w))
            mask[static_cast<std::size_t>(cell.row) * noise.w + cell.col] = 1;

    NoiseTensor out = noise;
    const auto g = static_cast<float>(gamma);
    for (int c = 0; c < noise.channels; ++c)
        for (int r = 0; r < noise.h; ++r)
            for (int col = 0; col < noise.w; ++col)
                if (mask[static_cast<std::size_t>(r) * noise.w + col]) out.at(c, r, col) *= g;
    return out;
}

NoiseTensor apply_fixed(const NoiseTensor& noise, std::span<const LatentBox> boxes, std::uint64_t fixed_seed) {
    check_in_grid(boxes, noise.h, noise.w);
    NoiseTensor out = noise;
    if (boxes.empty()) return out;
    const NoiseTensor z_star = sample_noise(1, noise.h, noise.w, fixed_seed);
    std::vector<std::uint8_t> taken(static_cast<std::size_t>(noise.h) * noise.w, 0);
    for (const LatentBox& b : boxes) {
        const std::vector<Cell> cells = rasterize_box(b, noise.h, noise.w);
        if (cells.empty()) continue;
        int r0 = cells.front().row;
        int c0 = cells.front().col;
        for (const Cell& cell : cells) c0 = std::min(c0, cell.col);
        for (const Cell& cell : cells) {
            auto& flag = taken[static_cast<std::size_t>(cell.row) * noise.w + cell.col];
            if (flag) continue;
            flag = 1;
            const float z = z_star.at(0, cell.row - r0, cell.col - c0);
            for (int c = 0; c < noise.channels; ++c) out.at(c, cell.row, cell.col) = z;
        }
    }
    return out;
}

NoiseTensor apply_gaussian_kernel(const NoiseTensor& noise, std::span<const LatentBox> boxes, double w,
                                  double alpha) {
    if (!(alpha > 0.0)) throw DegenerateInput("apply_gaussian_kernel: alpha must be > 0");
    for (const LatentBox& b : boxes)
        if (!(b.w > 0.0 && b.h > 0.0)) throw DegenerateInput("apply_gaussian_kernel: zero-area box");
    check_in_grid(boxes, noise.h, noise.w);

    std::vector<double> bump(static_cast<std::size_t>(noise.h) * noise.w, 0.0);
    for (const LatentBox& b : boxes) {
        const double mx = b.x + b.w / 2.0;
        const double my = b.y + b.h / 2.0;
        const double sigma = alpha * std::hypot(b.w, b.h);
        const double cutoff2 = kGaussianCutoffSigmas * kGaussianCutoffSigmas * sigma * sigma;
        for (int r = 0; r < noise.h; ++r) {
            const double dy = r + 0.5 - my;
            for (int c = 0; c < noise.w; ++c) {
                const double dx = c + 0.5 - mx;
                const double d2 = dx * dx + dy * dy;
                if (d2 > cutoff2) continue;
                bump[static_cast<std::size_t>(r) * noise.w + c] += w * std::exp(-0.5 * d2 / (sigma * sigma));
            }
        }
    }
    NoiseTensor out = noise;
    for (int c = 0; c < noise.channels; ++c)
        for (int r = 0; r < noise.h; ++r)
            for (int col = 0; col < noise.w; ++col) {
                const double add = bump[static_cast<std::size_t>(r) * noise.w + col];
                if (add != 0.0) out.at(c, r, col) = static_cast<float>(noise.at(c, r, col) + add);
            }
    return out;
}

std::string_view to_string(PriorMethod method) noexcept {
    switch (method) {
        case PriorMethod::none: return "none";
        case PriorMethod::uniform_scaled: return "scaled";
        case PriorMethod::fixed: return "fixed";
        case PriorMethod::gaussian: return "gaussian";
    }
    return "none";
}

PriorMethod prior_method_from_string(std::string_view name) {
    if (name == "none") return PriorMethod::none;
    if (name == "scaled" || name == "uniform_scaled") return PriorMethod::uniform_scaled;
    if (name == "fixed") return PriorMethod::fixed;
    if (name == "gaussian") return PriorMethod::gaussian;
    throw FormatError("unknown prior method '" + std::string(name) + "'");
}

NoiseTensor apply_prior(const NoiseTensor& noise, std::span<const LatentBox> boxes, const PriorConfig& config) {
    switch (config.method) {
        case PriorMethod::none: return noise;
        case PriorMethod::uniform_scaled: return apply_uniform_scaled(noise, boxes, config.gamma);
        case PriorMethod::fixed: return apply_fixed(noise, boxes, config.fixed_seed);
        case PriorMethod::gaussian: return apply_gaussian_kernel(noise, boxes, config.w, config.alpha);
    }
    return noise;
}

namespace {

constexpr std::array<char, 4> kMagic{'N', 'T', 'F', '1'};

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

std::uint64_t get_le(const std::string& buf, std::size_t pos, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
    return v;
}

} // namespace

void write_ntf(const std::filesystem::path& path, const NtfArray& array) {
    if (array.dtype > 1) throw FormatError("write_ntf: unsupported dtype");
    if (array.dims.size() > 255) throw FormatError("write_ntf: too many dimensions");
    std::size_t expected = 1;
    for (auto d : array.dims) expected *= d;
    if (expected != array.data.size()) throw ShapeError("write_ntf: dims do not match payload");

    std::string buf(kMagic.begin(), kMagic.end());
    buf.push_back(static_cast<char>(array.dtype));
    buf.push_back(static_cast<char>(array.dims.size()));
    buf.append(10, '\0');
    for (auto d : array.dims) put_u32(buf, d);
    for (double v : array.data) {
        if (array.dtype == 0)
            put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        else
            put_u64(buf, std::bit_cast<std::uint64_t>(v));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_ntf: cannot open " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("write_ntf: write failed for " + path.string());
}

NtfArray read_ntf(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("read_ntf: cannot open " + path.string());
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || !std::equal(kMagic.begin(), kMagic.end(), buf.begin()))
        throw FormatError("read_ntf: bad magic in " + path.string());
    NtfArray array;
    array.dtype = static_cast<std::uint8_t>(buf[4]);
    if (array.dtype > 1) throw FormatError("read_ntf: unsupported dtype in " + path.string());
    const auto ndim = static_cast<std::size_t>(static_cast<unsigned char>(buf[5]));
    std::size_t pos = 16;
    if (buf.size() < pos + 4 * ndim) throw FormatError("read_ntf: truncated header in " + path.string());
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndim; ++i, pos += 4) {
        array.dims.push_back(static_cast<std::uint32_t>(get_le(buf, pos, 4)));
        count *= array.dims.back();
    }
    const std::size_t width = array.dtype == 0 ? 4 : 8;
    if (buf.size() != pos + width * count) throw FormatError("read_ntf: payload size mismatch in " + path.string());
    array.data.resize(count);
    for (std::size_t i = 0; i < count; ++i, pos += width) {
        if (array.dtype == 0)
            array.data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(buf, pos, 4)));
        else
            array.data[i] = std::bit_cast<double>(get_le(buf, pos, 8));
    }
    return array;
}

void write_noise(const std::filesystem::path& path, const NoiseTensor& noise) {
    NtfArray array;
    array.dtype = 0;
    array.dims = {static_cast<std::uint32_t>(noise.channels), static_cast<std::uint32_t>(noise.h),
                  static_cast<std::uint32_t>(noise.w)};
    array.data.assign(noise.values.begin(), noise.values.end());
    write_ntf(path, array);
}

NoiseTensor read_noise(const std::filesystem::path& path) {
    const NtfArray array = read_ntf(path);
    if (array.dtype != 0 || array.dims.size() != 3) throw FormatError("read_noise: expected a 3-d f32 tensor");
    NoiseTensor out(static_cast<int>(array.dims[0]), static_cast<int>(array.dims[1]), static_cast<int>(array.dims[2]));
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = static_cast<float>(array.data[i]);
    return out;
}

} // namespace numgen
