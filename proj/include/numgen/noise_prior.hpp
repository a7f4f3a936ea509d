#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "numgen/layout.hpp"

namespace numgen {

// Row-major [channel][row][col] grid of 32-bit floats.
struct NoiseTensor {
    int channels = 0;
    int h = 0;
    int w = 0;
    std::vector<float> values;

    NoiseTensor() = default;
    NoiseTensor(int c, int height, int width, float fill = 0.0f);

    std::size_t size() const noexcept { return values.size(); }
    std::size_t index(int c, int row, int col) const noexcept {
        return (static_cast<std::size_t>(c) * h + row) * w + col;
    }
    float& at(int c, int row, int col) noexcept { return values[index(c, row, col)]; }
    float at(int c, int row, int col) const noexcept { return values[index(c, row, col)]; }
    bool same_shape(const NoiseTensor& o) const noexcept {
        return channels == o.channels && h == o.h && w == o.w;
    }

    friend bool operator==(const NoiseTensor&, const NoiseTensor&) = default;
};

// i.i.d. N(0, 1) entries drawn in storage order from Rng(seed).
NoiseTensor sample_noise(int channels, int h, int w, std::uint64_t seed);

// Box in continuous latent-grid coordinates; cell (r, c) spans [c, c+1) x [r, r+1).
struct LatentBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};

std::vector<LatentBox> map_boxes_to_latent(const LayoutSpec& layout, int latent_h, int latent_w);

struct Cell {
    int row = 0;
    int col = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

// Cells whose area is covered by more than half, in row-major order.
std::vector<Cell> rasterize_box(const LatentBox& box, int grid_h, int grid_w);

NoiseTensor apply_uniform_scaled(const NoiseTensor& noise, std::span<const LatentBox> boxes, double gamma);

// Every box region receives a crop of one canonical single-channel z* field
// (sample_noise(1, H, W, fixed_seed)) anchored at the region's top-left cell,
// broadcast over channels. Where boxes overlap the first box wins.
NoiseTensor apply_fixed(const NoiseTensor& noise, std::span<const LatentBox> boxes, std::uint64_t fixed_seed);

// z(x) = eps(x) + sum_j w exp(-|x - mu_j|^2 / (2 sigma_j^2)), sigma_j = alpha * |(w_j, h_j)|_2,
// evaluated at cell centers. Each bump is cut off beyond 5 sigma_j.
NoiseTensor apply_gaussian_kernel(const NoiseTensor& noise, std::span<const LatentBox> boxes, double w,
                                  double alpha);

inline constexpr double kGaussianCutoffSigmas = 5.0;

enum class PriorMethod { none, uniform_scaled, fixed, gaussian };

std::string_view to_string(PriorMethod method) noexcept;
// Accepts "none", "scaled"/"uniform_scaled", "fixed", "gaussian".
PriorMethod prior_method_from_string(std::string_view name);

struct PriorConfig {
    PriorMethod method = PriorMethod::none;
    double gamma = 0.1;
    std::uint64_t fixed_seed = 0;
    double w = 0.3;
    double alpha = 0.8;
};

NoiseTensor apply_prior(const NoiseTensor& noise, std::span<const LatentBox> boxes, const PriorConfig& config);

// NTF1 container: 16-byte header ("NTF1", u8 dtype, u8 ndim, 10 zero bytes),
// ndim little-endian u32 dims, row-major little-endian payload.
// dtype 0 = f32, 1 = f64.
struct NtfArray {
    std::uint8_t dtype = 0;
    std::vector<std::uint32_t> dims;
    std::vector<double> data;
};

void write_ntf(const std::filesystem::path& path, const NtfArray& array);
NtfArray read_ntf(const std::filesystem::path& path);

void write_noise(const std::filesystem::path& path, const NoiseTensor& noise);
NoiseTensor read_noise(const std::filesystem::path& path);

} // namespace numgen
