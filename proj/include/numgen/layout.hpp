#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace numgen {

// Axis-aligned box in integer pixels; (x, y) is the top-left corner.
struct BBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    friend bool operator==(const BBox&, const BBox&) = default;
};

enum class LayoutType { random, grid };

std::string_view to_string(LayoutType type) noexcept;
LayoutType layout_type_from_string(std::string_view name);

struct LayoutSpec {
    int canvas_w = 0;
    int canvas_h = 0;
    std::vector<BBox> boxes;
    std::size_t count = 0;
    LayoutType layout_type = LayoutType::random;
    std::uint64_t seed = 0;

    friend bool operator==(const LayoutSpec&, const LayoutSpec&) = default;
};

inline constexpr double kDefaultFillFraction = 0.25;
inline constexpr int kDefaultMaxAttempts = 1000;
inline constexpr int kMinObjectSide = 4;
inline constexpr double kGridMarginFraction = 0.10;

// floor(sqrt(fill * W * H / count)) clamped to [4, min(W, H)].
int object_side_for_count(int count, int canvas_w, int canvas_h,
                          double fill_fraction = kDefaultFillFraction);

// Open-interior intersection test; boxes that only share an edge do not overlap.
bool boxes_overlap(const BBox& a, const BBox& b) noexcept;

bool box_in_canvas(const BBox& box, int canvas_w, int canvas_h) noexcept;

struct RandomLayoutOptions {
    double fill_fraction = kDefaultFillFraction;
    int max_attempts = kDefaultMaxAttempts;
    // Per-object side jitter in [0.7, 1.3] x base side.
    bool size_jitter = false;
};

// Rejection-sampling placement: each object draws x in [0, W - side],
// y in [0, H - side] until it clears every placed box, for at most
// max_attempts draws. Throws PlacementFailure naming the object index.
LayoutSpec plan_random_layout(int count, int canvas_w, int canvas_h, std::uint64_t seed,
                              const RandomLayoutOptions& options = {});

// Row-major fill of a rows x cols grid from the top-left cell; every box is
// its cell shrunk by 10% per side.
LayoutSpec plan_grid_layout(int count, int canvas_w, int canvas_h, int rows = 7, int cols = 7);

// Checks count, containment and pairwise non-overlap.
bool layout_is_valid(const LayoutSpec& layout) noexcept;

void to_json(nlohmann::json& j, const BBox& box);
void from_json(const nlohmann::json& j, BBox& box);
void to_json(nlohmann::json& j, const LayoutSpec& layout);
void from_json(const nlohmann::json& j, LayoutSpec& layout);

} // namespace numgen
