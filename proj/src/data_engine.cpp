#include "numgen/data_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "numgen/error.hpp"
#include "numgen/parallel.hpp"
#include "numgen/rng.hpp"

namespace numgen {

namespace fs = std::filesystem;

std::string_view to_string(GlyphStyle style) noexcept {
    switch (style) {
        case GlyphStyle::disc: return "disc";
        case GlyphStyle::ring: return "ring";
        case GlyphStyle::cross: return "cross";
        case GlyphStyle::polygon: return "polygon";
    }
    return "disc";
}

GlyphStyle glyph_style_from_string(std::string_view name) {
    if (name == "disc") return GlyphStyle::disc;
    if (name == "ring") return GlyphStyle::ring;
    if (name == "cross") return GlyphStyle::cross;
    if (name == "polygon") return GlyphStyle::polygon;
    throw FormatError("unknown glyph style '" + std::string(name) + "'");
}

GlyphStyle style_for_category(int category_id) noexcept {
    static constexpr std::array kCycle{GlyphStyle::disc, GlyphStyle::ring, GlyphStyle::cross, GlyphStyle::polygon};
    return kCycle[static_cast<std::size_t>(std::abs(category_id) % 4)];
}

namespace {

constexpr double kMaxOpaqueFraction = 0.6;

// Squared distance from the pixel center to the glyph center.
double center_dist2(int x, int y, int side) {
    const double c = side / 2.0;
    const double dx = x + 0.5 - c;
    const double dy = y + 0.5 - c;
    return dx * dx + dy * dy;
}

int count_within(int side, double radius) {
    int n = 0;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            if (center_dist2(x, y, side) <= radius * radius) ++n;
    return n;
}

// Nominal radius 7/16 of the side, kept one pixel clear of the border and
// shrunk in quarter-pixel steps until the disc fits the opacity budget.
double disc_radius(int side) {
    double r = std::min(7.0 * side / 16.0, side / 2.0 - 1.0);
    const double budget = kMaxOpaqueFraction * side * side;
    while (r > 0.5 && count_within(side, r) > budget) r -= 0.25;
    return r;
}

struct HalfPlane {
    double nx, ny, offset;  // inside iff nx * x + ny * y <= offset
};

std::vector<HalfPlane> regular_polygon(int k, double radius, double phase) {
    std::vector<HalfPlane> planes;
    const double apothem = radius * std::cos(std::numbers::pi / k);
    for (int i = 0; i < k; ++i) {
        const double angle = phase + (i + 0.5) * 2.0 * std::numbers::pi / k;
        planes.push_back({std::cos(angle), std::sin(angle), apothem});
    }
    return planes;
}

bool inside(const std::vector<HalfPlane>& planes, double x, double y) {
    return std::all_of(planes.begin(), planes.end(),
                       [&](const HalfPlane& p) { return p.nx * x + p.ny * y <= p.offset; });
}

} // namespace

LayerImage synthesize_layer(int category_id, GlyphStyle style, int side) {
    if (side < kMinObjectSide) throw DegenerateInput("synthesize_layer: side must be >= 4");
    LayerImage layer(side, side);
    auto paint = [&](int x, int y) {
        std::uint8_t* p = layer.pixel(x, y);
        p[0] = p[1] = p[2] = 0;
        p[3] = 255;
    };

    switch (style) {
        case GlyphStyle::disc: {
            const double r = disc_radius(side);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x)
                    if (center_dist2(x, y, side) <= r * r) paint(x, y);
            break;
        }
        case GlyphStyle::ring: {
            const double outer = std::min(7.0 * side / 16.0, side / 2.0 - 1.0);
            const double inner = outer - std::max(1.0, side / 10.0);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const double d2 = center_dist2(x, y, side);
                    if (d2 <= outer * outer && (inner <= 0.0 || d2 > inner * inner)) paint(x, y);
                }
            break;
        }
        case GlyphStyle::cross: {
            const int t = std::max(2, static_cast<int>(std::lround(side / 5.0)));
            const int lo = (side - t) / 2;
            for (int y = 1; y < side - 1; ++y)
                for (int x = 1; x < side - 1; ++x)
                    if ((x >= lo && x < lo + t) || (y >= lo && y < lo + t)) paint(x, y);
            break;
        }
        case GlyphStyle::polygon: {
            const int k = 3 + (std::abs(category_id) / 4) % 4;
            const double phase = -std::numbers::pi / 2.0 - std::numbers::pi / k + 0.15 * (category_id % 5);
            const double radius = side / 2.0 - 1.0;
            const double thickness = std::max(1.0, side / 10.0);
            const auto outer = regular_polygon(k, radius, phase);
            const double inner_radius = radius - thickness / std::cos(std::numbers::pi / k);
            const auto inner = regular_polygon(k, std::max(inner_radius, 0.0), phase);
            const double c = side / 2.0;
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const double px = x + 0.5 - c;
                    const double py = y + 0.5 - c;
                    if (inside(outer, px, py) && (inner_radius <= 0.0 || !inside(inner, px, py))) paint(x, y);
                }
            // Very small polygons can lose every pixel center; keep a 2x2 core.
            int opaque = 0;
            for (int i = 3; i < static_cast<int>(layer.rgba.size()); i += 4) opaque += layer.rgba[i] != 0;
            if (opaque < 4) {
                const int lo = side / 2 - 1;
                for (int y = lo; y < lo + 2; ++y)
                    for (int x = lo; x < lo + 2; ++x) paint(x, y);
            }
            break;
        }
    }
    return layer;
}

Image composite_scene(const LayoutSpec& layout, const LayerImage& layer, std::uint8_t background_gray) {
    return composite_scene(
        layout, [&](const BBox& box) { return resize_nearest(layer, box.w, box.h); }, background_gray);
}

Image composite_scene(const LayoutSpec& layout, const LayerForBox& layer_for_box, std::uint8_t background_gray) {
    if (!layout_is_valid(layout)) throw DegenerateInput("composite_scene: invalid layout");
    Image image(layout.canvas_w, layout.canvas_h, background_gray);
    for (const BBox& box : layout.boxes) {
        const LayerImage scaled = layer_for_box(box);
        if (scaled.w != box.w || scaled.h != box.h) throw ShapeError("composite_scene: layer does not match box");
        for (int y = 0; y < box.h; ++y) {
            for (int x = 0; x < box.w; ++x) {
                const std::uint8_t* src = scaled.pixel(x, y);
                const unsigned a = src[3];
                if (a == 0) continue;
                std::uint8_t* dst = image.pixel(box.x + x, box.y + y);
                for (int ch = 0; ch < 3; ++ch)
                    dst[ch] = static_cast<std::uint8_t>((a * src[ch] + (255U - a) * dst[ch] + 127U) / 255U);
            }
        }
    }
    return image;
}

namespace {

constexpr std::array<std::string_view, kPromptTemplateCount> kLineArtTemplates{
    "A minimalist black line drawing of {count} {animal}, set against a soft gray background, each outlined with "
    "smooth, precise lines to create an elegant and harmonious composition.",
    "A sleek and simple black line art depiction of {count} {animal}, all drawn with clean, straight lines against "
    "a soft gray background, highlighting their graceful yet minimalist form.",
    "An artistic, minimalist rendering of {count} {animal} in black line art, featuring sharp, clean outlines and "
    "a neutral gray backdrop, providing a balanced and sophisticated aesthetic.",
    "A charming collection of {count} {animal}, each drawn with minimalist black lines, creating a graceful and "
    "balanced visual impression on a soft gray canvas.",
    "A simple yet elegant black line drawing of {count} {animal}, captured in clear, refined lines on a gray "
    "background, emphasizing their sleek shapes and natural beauty.",
    "An understated illustration of {count} {animal} in black line art, gracefully outlined against a soft gray "
    "backdrop. The simplicity of the design brings out the elegant beauty of each {animal}.",
    "A refined, minimalist black line art of {count} {animal}, with each figure outlined with clean precision "
    "against a subtle gray background, creating a serene and balanced visual composition.",
    "A modern take on black line art, featuring {count} {animal} drawn with smooth and clear lines, set against a "
    "soft gray backdrop, exuding simplicity and elegance.",
    "A clean, minimalist design of {count} {animal} in black line art, placed against a soft gray background, with "
    "each {animal} portrayed in a calm and graceful manner.",
    "An elegant black line illustration of {count} {animal}, outlined in precise, simple lines, against a smooth "
    "gray background, capturing their minimalist charm and beauty.",
};

constexpr std::string_view kTransparentLayerTemplate =
    "Generate an image of a {animal} in a minimalist black line art style. The {animal} should be depicted using "
    "clean, uniform black lines with no shading or fill, focusing on its shape and essential features. The lines "
    "should be crisp and precise, creating a modern and elegant design. Ensure the overall composition is balanced "
    "and visually appealing, isolated on a solid gray background.";

constexpr std::string_view kNaturalisticRequestTemplate =
    "Please generate [number] counting prompts for text-to-image models with the following classes: "
    "[${class_names}]. Each prompt should contain a number between 2 and 6 and follow this format: \n"
    "index.prompt|number of objects|object name\n\n"
    "For example:\n\n"
    "1.Three dogs are playing with each other|3|dog\n\n"
    "2.An image of four cars driving down the street.|4|car\n\n"
    "Ensure diversity by varying sentence structures, actions, and environments. Use different verbs, adjectives, "
    "and locations to make each prompt unique. The prompts should be reasonable. Return exactly ten prompts, "
    "starting from index 1, and separate them by '\\n'.";

constexpr std::array<std::string_view, 30> kCategories{
    "koala",   "panda",    "crocodile", "sea lion", "rabbit",   "penguin", "giraffe", "elephant",
    "fox",     "owl",      "turtle",    "zebra",    "kangaroo", "hedgehog", "dolphin", "flamingo",
    "squirrel", "tiger",   "camel",     "frog",     "deer",     "bear",    "cat",     "dog",
    "horse",   "duck",     "lion",      "monkey",   "snail",    "whale",
};

void replace_all(std::string& text, std::string_view token, std::string_view value) {
    for (std::size_t pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size()))
        text.replace(pos, token.size(), value);
}

} // namespace

std::string count_to_words(int count) {
    static constexpr std::array<std::string_view, 20> kSmall{
        "zero",    "one",     "two",       "three",    "four",     "five",    "six",
        "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
        "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen"};
    static constexpr std::array<std::string_view, 10> kTens{"", "", "twenty", "thirty", "forty",
                                                            "fifty", "sixty", "seventy", "eighty", "ninety"};
    if (count < 0 || count > 999) return std::to_string(count);
    if (count < 20) return std::string(kSmall[static_cast<std::size_t>(count)]);
    if (count < 100) {
        std::string out(kTens[static_cast<std::size_t>(count / 10)]);
        if (count % 10 != 0) out += "-" + std::string(kSmall[static_cast<std::size_t>(count % 10)]);
        return out;
    }
    std::string out = std::string(kSmall[static_cast<std::size_t>(count / 100)]) + " hundred";
    if (count % 100 != 0) out += " and " + count_to_words(count % 100);
    return out;
}

std::string render_prompt(int template_id, int count, std::string_view category, CountStyle count_style) {
    if (template_id < 0 || template_id >= kPromptTemplateCount)
        throw FormatError("render_prompt: unknown template id " + std::to_string(template_id));
    std::string text(kLineArtTemplates[static_cast<std::size_t>(template_id)]);
    replace_all(text, "{count}", count_style == CountStyle::word ? count_to_words(count) : std::to_string(count));
    replace_all(text, "{animal}", category);
    return text;
}

std::string_view transparent_layer_prompt_template() noexcept { return kTransparentLayerTemplate; }
std::string_view naturalistic_prompt_request_template() noexcept { return kNaturalisticRequestTemplate; }

std::vector<std::string> default_categories(std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(i < kCategories.size() ? std::string(kCategories[i]) : "category_" + std::to_string(i));
    return out;
}

void to_json(nlohmann::json& j, const DatasetRecord& r) {
    j = nlohmann::json{{"id", r.id},
                       {"image_path", r.image_path},
                       {"prompt", r.prompt},
                       {"count", r.count},
                       {"category", r.category},
                       {"category_id", r.category_id},
                       {"template_id", r.template_id},
                       {"layout", r.layout},
                       {"image_seed", r.image_seed},
                       {"background_gray", r.background_gray}};
}

void from_json(const nlohmann::json& j, DatasetRecord& r) {
    r.id = j.at("id").get<std::size_t>();
    r.image_path = j.at("image_path").get<std::string>();
    r.prompt = j.value("prompt", std::string{});
    r.count = j.at("count").get<int>();
    r.category = j.value("category", std::string{});
    r.category_id = j.value("category_id", 0);
    r.template_id = j.value("template_id", 0);
    r.layout = j.at("layout").get<LayoutSpec>();
    r.image_seed = j.value("image_seed", std::uint64_t{0});
    r.background_gray = j.value("background_gray", kDefaultBackgroundGray);
}

std::size_t dataset_size(const DatasetConfig& config) {
    if (config.count_max < config.count_min || config.per_cell < 0) return 0;
    return config.categories.size() * static_cast<std::size_t>(config.count_max - config.count_min + 1) *
           static_cast<std::size_t>(config.per_cell);
}

namespace {

LayoutSpec plan_for_record(const DatasetConfig& config, int count, std::uint64_t image_seed, std::size_t index) {
    if (config.layout_type == LayoutType::grid)
        return plan_grid_layout(count, config.canvas_w, config.canvas_h, config.grid_rows, config.grid_cols);
    const RandomLayoutOptions options{config.fill_fraction, config.max_attempts, config.size_jitter};
    for (int retry = 0;; ++retry) {
        try {
            return plan_random_layout(count, config.canvas_w, config.canvas_h, derive_seed(image_seed, retry), options);
        } catch (const PlacementFailure& failure) {
            if (retry >= config.placement_retries)
                throw Error("record " + std::to_string(index) + " (count " + std::to_string(count) +
                            "): " + failure.what());
        }
    }
}

std::string image_name(std::size_t id) {
    std::string digits = std::to_string(id);
    if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
    return digits + ".png";
}

} // namespace

RenderedRecord render_record(const DatasetConfig& config, std::size_t index) {
    const std::size_t total = dataset_size(config);
    if (index >= total) throw DegenerateInput("render_record: index out of range");
    const auto n_counts = static_cast<std::size_t>(config.count_max - config.count_min + 1);
    const auto per_cell = static_cast<std::size_t>(config.per_cell);
    const std::size_t category_id = index / (n_counts * per_cell);
    const int count = config.count_min + static_cast<int>((index / per_cell) % n_counts);

    RenderedRecord out;
    DatasetRecord& rec = out.record;
    rec.id = index;
    rec.image_path = "images/" + image_name(index);
    rec.count = count;
    rec.category = config.categories[category_id];
    rec.category_id = static_cast<int>(category_id);
    rec.template_id = static_cast<int>(index % kPromptTemplateCount);
    rec.prompt = render_prompt(rec.template_id, count, rec.category, config.count_style);
    rec.image_seed = derive_seed(config.master_seed, index);
    rec.background_gray = config.background_gray;
    rec.layout = plan_for_record(config, count, rec.image_seed, index);

    const GlyphStyle style = config.style.value_or(style_for_category(rec.category_id));
    std::optional<LayerImage> external;
    if (config.layer_dir) {
        const fs::path candidate = *config.layer_dir / (rec.category + ".png");
        if (fs::exists(candidate)) external = read_png_rgba(candidate);
    }
    if (external) {
        out.image = composite_scene(rec.layout, *external, config.background_gray);
    } else {
        out.image = composite_scene(
            rec.layout,
            [&](const BBox& box) {
                LayerImage layer = synthesize_layer(rec.category_id, style, std::min(box.w, box.h));
                return resize_nearest(layer, box.w, box.h);
            },
            config.background_gray);
    }
    return out;
}

std::vector<DatasetRecord> generate_dataset(const DatasetConfig& config) {
    const std::size_t total = dataset_size(config);
    std::error_code ec;
    fs::create_directories(config.output_dir / "images", ec);
    if (ec) throw Error("generate_dataset: cannot create " + (config.output_dir / "images").string() + ": " + ec.message());
    if (config.layout_sidecar) fs::create_directories(config.output_dir / "layouts", ec);
    if (ec) throw Error("generate_dataset: cannot create layouts directory: " + ec.message());

    std::vector<DatasetRecord> records(total);
    parallel_for(total, config.jobs, [&](std::size_t i) {
        RenderedRecord rendered = render_record(config, i);
        write_png(config.output_dir / rendered.record.image_path, rendered.image);
        if (config.layout_sidecar) {
            std::ofstream sidecar(config.output_dir / "layouts" / (std::to_string(i) + ".json"));
            sidecar << nlohmann::json(rendered.record.layout).dump() << '\n';
        }
        records[i] = std::move(rendered.record);
    });
    write_manifest(config.output_dir / "manifest.jsonl", records);
    return records;
}

void write_manifest(const fs::path& path, const std::vector<DatasetRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_manifest: cannot open " + path.string());
    for (const DatasetRecord& r : records) out << nlohmann::json(r).dump() << '\n';
    if (!out) throw Error("write_manifest: write failed for " + path.string());
}

std::vector<DatasetRecord> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("read_manifest: cannot open " + path.string());
    std::vector<DatasetRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(nlohmann::json::parse(line).get<DatasetRecord>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

} // namespace numgen
