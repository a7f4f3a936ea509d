#include "doctest.h"

#include <map>
#include <set>

#include "numgen/count_oracle.hpp"
#include "numgen/data_engine.hpp"
#include "numgen/error.hpp"
#include "test_support.hpp"

using namespace numgen;

namespace {

double opaque_fraction(const LayerImage& layer) {
    int n = 0;
    for (int y = 0; y < layer.h; ++y)
        for (int x = 0; x < layer.w; ++x) n += layer.alpha(x, y) == 255;
    return static_cast<double>(n) / (layer.w * layer.h);
}

std::vector<std::uint8_t> alpha_mask(const LayerImage& layer) {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(layer.w * layer.h));
    for (int y = 0; y < layer.h; ++y)
        for (int x = 0; x < layer.w; ++x) m[static_cast<std::size_t>(y * layer.w + x)] = layer.alpha(x, y) > 0;
    return m;
}

const GlyphStyle kStyles[] = {GlyphStyle::disc, GlyphStyle::ring, GlyphStyle::cross, GlyphStyle::polygon};

}  // namespace

TEST_SUITE("data_engine") {

TEST_CASE("disc layer at side 32") {
    const LayerImage disc = synthesize_layer(0, GlyphStyle::disc, 32);
    CHECK(disc.w == 32);
    CHECK(disc.h == 32);
    CHECK(disc.alpha(16, 16) == 255);
    CHECK(disc.alpha(15, 15) == 255);
    CHECK(disc.alpha(0, 0) == 0);
    CHECK(disc.alpha(31, 31) == 0);
    // radius close to 7/16 of the side: the pixel 13 away from the center axis is inside
    CHECK(disc.alpha(16 + 13, 16) == 255);
    CHECK(disc.alpha(16 + 15, 16) == 0);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const std::uint8_t* p = disc.pixel(x, y);
            REQUIRE((p[3] == 0 || p[3] == 255));
            if (p[3]) REQUIRE((p[0] == 0 && p[1] == 0 && p[2] == 0));
        }
}

TEST_CASE("ring layer has a hollow center") {
    const LayerImage ring = synthesize_layer(1, GlyphStyle::ring, 32);
    CHECK(ring.alpha(16, 16) == 0);
    CHECK(opaque_fraction(ring) > 0.05);
}

TEST_CASE("side below four is rejected") {
    CHECK_THROWS_AS(synthesize_layer(0, GlyphStyle::disc, 3), DegenerateInput);
}

TEST_CASE("layers are deterministic") {
    for (GlyphStyle s : kStyles) CHECK(synthesize_layer(5, s, 40) == synthesize_layer(5, s, 40));
}

TEST_CASE("every style and side: fraction bounds, one component, clear border") {
    for (GlyphStyle s : kStyles) {
        for (int side = 4; side <= 160; ++side) {
            CAPTURE(to_string(s));
            CAPTURE(side);
            for (int cat : {0, 4, 9}) {
                const LayerImage layer = synthesize_layer(cat, s, side);
                const double f = opaque_fraction(layer);
                REQUIRE(f >= 0.05);
                REQUIRE(f <= 0.6);
                REQUIRE(testing::flood_fill_count(alpha_mask(layer), side, side, 8, 1) == 1);
                for (int i = 0; i < side; ++i) {
                    REQUIRE(layer.alpha(i, 0) == 0);
                    REQUIRE(layer.alpha(i, side - 1) == 0);
                    REQUIRE(layer.alpha(0, i) == 0);
                    REQUIRE(layer.alpha(side - 1, i) == 0);
                }
            }
        }
    }
}

TEST_CASE("edge-touching boxes stay separate components") {
    for (GlyphStyle s : kStyles) {
        for (int side = 4; side <= 48; ++side) {
            LayoutSpec layout;
            layout.canvas_w = 2 * side;
            layout.canvas_h = 2 * side;
            layout.boxes = {{0, 0, side, side}, {side, 0, side, side}, {0, side, side, side}, {side, side, side, side}};
            layout.count = 4;
            const Image img = composite_scene(layout, synthesize_layer(2, s, side));
            REQUIRE(count_components(img).count == 4);
        }
    }
}

TEST_CASE("style names") {
    for (GlyphStyle s : kStyles) CHECK(glyph_style_from_string(to_string(s)) == s);
    CHECK_THROWS(glyph_style_from_string("star"));
    CHECK(style_for_category(0) == GlyphStyle::disc);
    CHECK(style_for_category(5) == GlyphStyle::ring);
}

TEST_CASE("composite of an empty layout is uniform gray") {
    LayoutSpec layout;
    layout.canvas_w = 40;
    layout.canvas_h = 30;
    const Image img = composite_scene(layout, synthesize_layer(0, GlyphStyle::disc, 8), 123);
    CHECK(img.w == 40);
    CHECK(img.h == 30);
    for (std::uint8_t v : img.rgb) REQUIRE(v == 123);
}

TEST_CASE("fully opaque layer fills its box") {
    LayerImage solid(6, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) {
            std::uint8_t* p = solid.pixel(x, y);
            p[0] = 10;
            p[1] = 20;
            p[2] = 30;
            p[3] = 255;
        }
    LayoutSpec layout;
    layout.canvas_w = 32;
    layout.canvas_h = 32;
    layout.boxes = {{4, 5, 12, 12}};
    layout.count = 1;
    const Image img = composite_scene(layout, solid, 200);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const bool inside = x >= 4 && x < 16 && y >= 5 && y < 17;
            const std::uint8_t* p = img.pixel(x, y);
            if (inside) {
                REQUIRE(p[0] == 10);
                REQUIRE(p[1] == 20);
                REQUIRE(p[2] == 30);
            } else {
                REQUIRE(p[0] == 200);
                REQUIRE(p[1] == 200);
                REQUIRE(p[2] == 200);
            }
        }
}

TEST_CASE("half alpha blends with rounding") {
    LayerImage half(1, 1);
    half.pixel(0, 0)[3] = 128;  // black at alpha 128 over 200
    LayoutSpec layout;
    layout.canvas_w = 1;
    layout.canvas_h = 1;
    layout.boxes = {{0, 0, 1, 1}};
    layout.count = 1;
    const Image img = composite_scene(layout, half, 200);
    CHECK(img.pixel(0, 0)[0] == (127 * 200 + 127) / 255);
}

TEST_CASE("fifty objects are counted exactly and background is untouched") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const LayoutSpec layout = plan_random_layout(50, 512, 512, seed);
        const Image img = composite_scene(layout, synthesize_layer(static_cast<int>(seed), style_for_category(static_cast<int>(seed)),
                                                                   layout.boxes[0].w));
        CHECK(count_components(img).count == 50);
        for (int y = 0; y < 512; y += 3)
            for (int x = 0; x < 512; x += 3) {
                bool inside = false;
                for (const BBox& b : layout.boxes) inside |= x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
                if (!inside) REQUIRE(img.pixel(x, y)[0] == kDefaultBackgroundGray);
            }
    }
}

TEST_CASE("prompt templates") {
    const std::string p = render_prompt(0, 8, "koala");
    CHECK(p.rfind("A minimalist black line drawing of 8 koala, set against a soft gray background, ", 0) == 0);
    CHECK(render_prompt(0, 8, "koala") == p);
    std::set<std::string> all;
    for (int i = 0; i < kPromptTemplateCount; ++i) {
        const std::string s = render_prompt(i, 8, "koala");
        CHECK(s.find("{count}") == std::string::npos);
        CHECK(s.find("{animal}") == std::string::npos);
        CHECK(s.find("8") != std::string::npos);
        all.insert(s);
    }
    CHECK(all.size() == 10);
    CHECK_THROWS(render_prompt(10, 8, "koala"));
    CHECK_THROWS(render_prompt(-1, 8, "koala"));
    CHECK(render_prompt(0, 8, "koala", CountStyle::word).find("eight koala") != std::string::npos);
    CHECK(count_to_words(42) == "forty-two");
    CHECK(count_to_words(13) == "thirteen");
    CHECK(!transparent_layer_prompt_template().empty());
    CHECK(!naturalistic_prompt_request_template().empty());
}

TEST_CASE("categories") {
    const auto cats = default_categories(32);
    CHECK(cats.size() == 32);
    CHECK(std::set<std::string>(cats.begin(), cats.end()).size() == 32);
}

TEST_CASE("stratified dataset arithmetic") {
    DatasetConfig c;
    c.categories = {"cat", "dog"};
    c.count_min = 1;
    c.count_max = 5;
    c.per_cell = 2;
    c.canvas_w = c.canvas_h = 64;
    c.output_dir = testing::scratch_dir("stratified");
    const auto records = generate_dataset(c);
    REQUIRE(records.size() == 20);
    std::map<int, int> per_count;
    std::map<std::string, int> per_category;
    for (const auto& r : records) {
        ++per_count[r.count];
        ++per_category[r.category];
        CHECK(r.layout.count == static_cast<std::size_t>(r.count));
        CHECK(r.prompt.find(std::to_string(r.count)) != std::string::npos);
        CHECK(std::filesystem::exists(c.output_dir / r.image_path));
    }
    for (int k = 1; k <= 5; ++k) CHECK(per_count[k] == 4);
    CHECK(per_category["cat"] == 10);
    CHECK(read_manifest(c.output_dir / "manifest.jsonl") == records);
}

TEST_CASE("dataset is byte-identical across runs and job counts") {
    DatasetConfig c;
    c.categories = default_categories(3);
    c.count_min = 1;
    c.count_max = 12;
    c.per_cell = 2;
    c.canvas_w = c.canvas_h = 96;
    c.layout_sidecar = true;
    c.master_seed = 11;
    const auto dir_a = testing::scratch_dir("det_a");
    const auto dir_b = testing::scratch_dir("det_b");
    c.output_dir = dir_a;
    const auto a = generate_dataset(c);
    c.output_dir = dir_b;
    c.jobs = 3;
    const auto b = generate_dataset(c);
    CHECK(a == b);
    CHECK(testing::read_file(dir_a / "manifest.jsonl") == testing::read_file(dir_b / "manifest.jsonl"));
    for (const auto& r : a) REQUIRE(testing::read_file(dir_a / r.image_path) == testing::read_file(dir_b / r.image_path));
    CHECK(std::filesystem::exists(c.output_dir / "layouts"));
}

TEST_CASE("oracle is exact on a mini dataset") {
    DatasetConfig c;
    c.categories = default_categories(4);
    c.count_min = 1;
    c.count_max = 50;
    c.per_cell = 1;
    c.canvas_w = c.canvas_h = 256;
    c.master_seed = 5;
    c.output_dir = testing::scratch_dir("mini");
    generate_dataset(c);
    const EvalResult r = evaluate_set(c.output_dir / "manifest.jsonl");
    CHECK(r.errors.empty());
    REQUIRE(r.pairs.size() == 200);
    for (const auto& p : r.pairs) REQUIRE(p.requested == p.predicted);
}

TEST_CASE("grid datasets and external layers") {
    const auto dir = testing::scratch_dir("layers");
    LayerImage square(8, 8);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) square.pixel(x, y)[3] = 255;
    std::filesystem::create_directories(dir / "layers");
    write_png(dir / "layers" / "cat.png", square);

    DatasetConfig c;
    c.categories = {"cat"};
    c.count_min = 1;
    c.count_max = 49;
    c.per_cell = 1;
    c.canvas_w = c.canvas_h = 224;
    c.layout_type = LayoutType::grid;
    c.layer_dir = dir / "layers";
    c.output_dir = dir / "out";
    const auto records = generate_dataset(c);
    for (const auto& r : records) CHECK(r.layout.layout_type == LayoutType::grid);
    const EvalResult eval = evaluate_set(c.output_dir / "manifest.jsonl");
    for (const auto& p : eval.pairs) REQUIRE(p.requested == p.predicted);
}

TEST_CASE("render_record matches generated files") {
    DatasetConfig c;
    c.categories = {"owl"};
    c.count_min = 3;
    c.count_max = 4;
    c.per_cell = 1;
    c.canvas_w = c.canvas_h = 64;
    c.output_dir = testing::scratch_dir("render");
    const auto records = generate_dataset(c);
    const RenderedRecord rr = render_record(c, 1);
    CHECK(rr.record == records[1]);
    CHECK(read_png_rgb(c.output_dir / records[1].image_path) == rr.image);
    CHECK_THROWS(render_record(c, 2));
}

}
