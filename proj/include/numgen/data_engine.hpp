#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "numgen/image.hpp"
#include "numgen/layout.hpp"

namespace numgen {

enum class GlyphStyle { disc, ring, cross, polygon };

std::string_view to_string(GlyphStyle style) noexcept;
GlyphStyle glyph_style_from_string(std::string_view name);

// Default style cycle: category_id % 4 -> disc, ring, cross, polygon.
GlyphStyle style_for_category(int category_id) noexcept;

// Procedural black line-art glyph on a transparent side x side layer. The
// outermost row and column on every side stay transparent so that glyphs in
// edge-touching boxes never touch.
LayerImage synthesize_layer(int category_id, GlyphStyle style, int side);

inline constexpr std::uint8_t kDefaultBackgroundGray = 200;

// Alpha-composites `layer` (nearest-neighbor scaled to each box) over a
// uniform gray canvas. Pixels outside every box keep the background value.
Image composite_scene(const LayoutSpec& layout, const LayerImage& layer,
                      std::uint8_t background_gray = kDefaultBackgroundGray);

using LayerForBox = std::function<LayerImage(const BBox&)>;
Image composite_scene(const LayoutSpec& layout, const LayerForBox& layer_for_box,
                      std::uint8_t background_gray = kDefaultBackgroundGray);

enum class CountStyle { numeral, word };

inline constexpr int kPromptTemplateCount = 10;

std::string count_to_words(int count);

// Fills the {count} and {animal} slots of one of the ten line-art templates.
std::string render_prompt(int template_id, int count, std::string_view category,
                          CountStyle count_style = CountStyle::numeral);

// Static text resources for the layer-generation and naturalistic prompt stages.
std::string_view transparent_layer_prompt_template() noexcept;
std::string_view naturalistic_prompt_request_template() noexcept;

// Built-in category vocabulary; indices beyond it become "category_<i>".
std::vector<std::string> default_categories(std::size_t n);

struct DatasetRecord {
    std::size_t id = 0;
    std::string image_path;  // relative to the manifest directory
    std::string prompt;
    int count = 0;
    std::string category;
    int category_id = 0;
    int template_id = 0;
    LayoutSpec layout;
    std::uint64_t image_seed = 0;
    std::uint8_t background_gray = kDefaultBackgroundGray;

    friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

void to_json(nlohmann::json& j, const DatasetRecord& record);
void from_json(const nlohmann::json& j, DatasetRecord& record);

struct DatasetConfig {
    std::vector<std::string> categories = default_categories(10);
    int count_min = 1;
    int count_max = 50;
    int per_cell = 2;
    LayoutType layout_type = LayoutType::random;
    int canvas_w = 512;
    int canvas_h = 512;
    double fill_fraction = kDefaultFillFraction;
    int max_attempts = kDefaultMaxAttempts;
    bool size_jitter = false;
    int grid_rows = 7;
    int grid_cols = 7;
    std::uint8_t background_gray = kDefaultBackgroundGray;
    CountStyle count_style = CountStyle::numeral;
    std::optional<GlyphStyle> style;                 // overrides the per-category cycle
    std::optional<std::filesystem::path> layer_dir;  // <category>.png RGBA layers
    // Failed random layouts are re-planned with derive_seed(image_seed, retry).
    int placement_retries = 8;
    std::filesystem::path output_dir;
    std::uint64_t master_seed = 0;
    bool layout_sidecar = false;
    int jobs = 1;
};

std::size_t dataset_size(const DatasetConfig& config);

struct RenderedRecord {
    DatasetRecord record;
    Image image;
};

// Renders record `index` in memory. Record order is category-major, then
// count, then sample; image_seed = derive_seed(master_seed, index).
RenderedRecord render_record(const DatasetConfig& config, std::size_t index);

// Writes images/<id>.png, manifest.jsonl (and layouts/<id>.json when asked)
// under config.output_dir. Returns the records in index order.
std::vector<DatasetRecord> generate_dataset(const DatasetConfig& config);

void write_manifest(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_manifest(const std::filesystem::path& path);

} // namespace numgen
