#include "numgen/layout.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "numgen/error.hpp"
#include "numgen/rng.hpp"

namespace numgen {

std::string_view to_string(LayoutType type) noexcept {
    return type == LayoutType::grid ? "grid" : "random";
}

LayoutType layout_type_from_string(std::string_view name) {
    if (name == "random") return LayoutType::random;
    if (name == "grid") return LayoutType::grid;
    throw FormatError("unknown layout type '" + std::string(name) + "'");
}

int object_side_for_count(int count, int canvas_w, int canvas_h, double fill_fraction) {
    if (count < 1) throw DegenerateInput("object_side_for_count: count must be >= 1");
    if (canvas_w < kMinObjectSide || canvas_h < kMinObjectSide)
        throw DegenerateInput("object_side_for_count: canvas smaller than minimum object side");
    if (!(fill_fraction > 0.0 && fill_fraction <= 1.0))
        throw DegenerateInput("object_side_for_count: fill_fraction must lie in (0, 1]");

    const double area = fill_fraction * static_cast<double>(canvas_w) *
                        static_cast<double>(canvas_h) / static_cast<double>(count);
    const int side = static_cast<int>(std::floor(std::sqrt(area)));
    return std::clamp(side, kMinObjectSide, std::min(canvas_w, canvas_h));
}

bool boxes_overlap(const BBox& a, const BBox& b) noexcept {
    return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

bool box_in_canvas(const BBox& box, int canvas_w, int canvas_h) noexcept {
    return box.w > 0 && box.h > 0 && box.x >= 0 && box.y >= 0 && box.x + box.w <= canvas_w &&
           box.y + box.h <= canvas_h;
}

LayoutSpec plan_random_layout(int count, int canvas_w, int canvas_h, std::uint64_t seed,
                              const RandomLayoutOptions& options) {
    if (count < 0) throw DegenerateInput("plan_random_layout: negative count");
    if (options.max_attempts < 1) throw DegenerateInput("plan_random_layout: max_attempts must be >= 1");

    LayoutSpec layout;
    layout.canvas_w = canvas_w;
    layout.canvas_h = canvas_h;
    layout.layout_type = LayoutType::random;
    layout.seed = seed;
    if (count == 0) return layout;

    const int base_side = object_side_for_count(count, canvas_w, canvas_h, options.fill_fraction);
    const int max_side = std::min(canvas_w, canvas_h);
    Rng rng(seed);
    layout.boxes.reserve(static_cast<std::size_t>(count));

    for (int i = 0; i < count; ++i) {
        int side = base_side;
        if (options.size_jitter) {
            const double scale = 0.7 + 0.6 * rng.uniform();
            side = std::clamp(static_cast<int>(std::lround(base_side * scale)), kMinObjectSide, max_side);
        }
        bool placed = false;
        for (int attempt = 0; attempt < options.max_attempts && !placed; ++attempt) {
            const BBox candidate{static_cast<int>(rng.uniform_int(0, canvas_w - side)),
                                 static_cast<int>(rng.uniform_int(0, canvas_h - side)), side, side};
            const bool clear = std::none_of(layout.boxes.begin(), layout.boxes.end(),
                                            [&](const BBox& b) { return boxes_overlap(candidate, b); });
            if (clear) {
                layout.boxes.push_back(candidate);
                placed = true;
            }
        }
        if (!placed) throw PlacementFailure(static_cast<std::size_t>(i), static_cast<std::size_t>(options.max_attempts));
    }
    layout.count = layout.boxes.size();
    return layout;
}

LayoutSpec plan_grid_layout(int count, int canvas_w, int canvas_h, int rows, int cols) {
    if (rows < 1 || cols < 1) throw DegenerateInput("plan_grid_layout: grid must have at least one cell");
    if (count < 0) throw DegenerateInput("plan_grid_layout: negative count");
    if (count > rows * cols)
        throw CapacityError("plan_grid_layout: count " + std::to_string(count) + " exceeds grid capacity " +
                            std::to_string(rows * cols));

    LayoutSpec layout;
    layout.canvas_w = canvas_w;
    layout.canvas_h = canvas_h;
    layout.layout_type = LayoutType::grid;
    layout.count = static_cast<std::size_t>(count);
    layout.boxes.reserve(layout.count);

    for (int i = 0; i < count; ++i) {
        const int r = i / cols;
        const int c = i % cols;
        const int x0 = static_cast<int>(static_cast<long long>(c) * canvas_w / cols);
        const int x1 = static_cast<int>(static_cast<long long>(c + 1) * canvas_w / cols);
        const int y0 = static_cast<int>(static_cast<long long>(r) * canvas_h / rows);
        const int y1 = static_cast<int>(static_cast<long long>(r + 1) * canvas_h / rows);
        const int mx = static_cast<int>(std::lround(kGridMarginFraction * (x1 - x0)));
        const int my = static_cast<int>(std::lround(kGridMarginFraction * (y1 - y0)));
        const BBox box{x0 + mx, y0 + my, x1 - x0 - 2 * mx, y1 - y0 - 2 * my};
        if (box.w < 1 || box.h < 1) throw DegenerateInput("plan_grid_layout: canvas too small for grid");
        layout.boxes.push_back(box);
    }
    return layout;
}

bool layout_is_valid(const LayoutSpec& layout) noexcept {
    if (layout.count != layout.boxes.size()) return false;
    for (std::size_t i = 0; i < layout.boxes.size(); ++i) {
        if (!box_in_canvas(layout.boxes[i], layout.canvas_w, layout.canvas_h)) return false;
        for (std::size_t j = i + 1; j < layout.boxes.size(); ++j)
            if (boxes_overlap(layout.boxes[i], layout.boxes[j])) return false;
    }
    return true;
}

void to_json(nlohmann::json& j, const BBox& box) {
    j = nlohmann::json{{"x", box.x}, {"y", box.y}, {"w", box.w}, {"h", box.h}};
}

void from_json(const nlohmann::json& j, BBox& box) {
    box.x = j.at("x").get<int>();
    box.y = j.at("y").get<int>();
    box.w = j.at("w").get<int>();
    box.h = j.at("h").get<int>();
}

void to_json(nlohmann::json& j, const LayoutSpec& layout) {
    j = nlohmann::json::object();
    j["canvas_w"] = layout.canvas_w;
    j["canvas_h"] = layout.canvas_h;
    j["count"] = layout.count;
    j["layout_type"] = std::string(to_string(layout.layout_type));
    j["seed"] = layout.seed;
    j["boxes"] = layout.boxes;
}

void from_json(const nlohmann::json& j, LayoutSpec& layout) {
    layout.canvas_w = j.at("canvas_w").get<int>();
    layout.canvas_h = j.at("canvas_h").get<int>();
    layout.count = j.at("count").get<std::size_t>();
    layout.layout_type = layout_type_from_string(j.at("layout_type").get<std::string>());
    layout.seed = j.at("seed").get<std::uint64_t>();
    layout.boxes = j.at("boxes").get<std::vector<BBox>>();
    if (layout.boxes.size() != layout.count) throw FormatError("layout: count does not match number of boxes");
}

} // namespace numgen
