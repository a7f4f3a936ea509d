#include "numgen/count_oracle.hpp"

#include <algorithm>
#include <cstdlib>
#include <optional>

#include "numgen/data_engine.hpp"
#include "numgen/error.hpp"
#include "numgen/parallel.hpp"

namespace numgen {

namespace {

class DisjointSets {
public:
    std::uint32_t make_set() {
        parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
        return parent_.back();
    }

    std::uint32_t find(std::uint32_t x) {
        std::uint32_t root = x;
        while (parent_[root] != root) root = parent_[root];
        while (parent_[x] != root) {
            const std::uint32_t next = parent_[x];
            parent_[x] = root;
            x = next;
        }
        return root;
    }

    // The smaller label becomes the root so roots follow raster order.
    void join(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b)
            parent_[b] = a;
        else
            parent_[a] = b;
    }

    std::size_t size() const noexcept { return parent_.size(); }

private:
    std::vector<std::uint32_t> parent_;
};

constexpr std::uint32_t kBackground = 0xFFFFFFFFU;

} // namespace

ComponentReport count_components(const Image& image, const OracleParams& params) {
    if (params.connectivity != 4 && params.connectivity != 8)
        throw DegenerateInput("count_components: connectivity must be 4 or 8");
    const int w = image.w;
    const int h = image.h;
    std::vector<std::uint32_t> labels(static_cast<std::size_t>(w) * h, kBackground);
    auto is_fg = [&](int x, int y) {
        const std::uint8_t* p = image.pixel(x, y);
        int diff = 0;
        for (int ch = 0; ch < 3; ++ch) diff = std::max(diff, std::abs(int{p[ch]} - int{params.background_gray}));
        return diff > params.delta;
    };
    auto label_at = [&](int x, int y) -> std::uint32_t& { return labels[static_cast<std::size_t>(y) * w + x]; };

    DisjointSets sets;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!is_fg(x, y)) continue;
            std::uint32_t current = kBackground;
            auto visit = [&](int nx, int ny) {
                if (nx < 0 || ny < 0 || nx >= w) return;
                const std::uint32_t n = label_at(nx, ny);
                if (n == kBackground) return;
                if (current == kBackground)
                    current = n;
                else
                    sets.join(current, n);
            };
            visit(x - 1, y);
            visit(x, y - 1);
            if (params.connectivity == 8) {
                visit(x - 1, y - 1);
                visit(x + 1, y - 1);
            }
            label_at(x, y) = current == kBackground ? sets.make_set() : current;
        }
    }

    struct Accumulator {
        int x0, y0, x1, y1, area;
    };
    std::vector<std::optional<Accumulator>> stats(sets.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint32_t l = label_at(x, y);
            if (l == kBackground) continue;
            auto& acc = stats[sets.find(l)];
            if (!acc) {
                acc = Accumulator{x, y, x, y, 0};
            }
            acc->x0 = std::min(acc->x0, x);
            acc->x1 = std::max(acc->x1, x);
            acc->y1 = std::max(acc->y1, y);
            ++acc->area;
        }
    }

    ComponentReport report;
    report.threshold_used = params.delta;
    for (const auto& acc : stats) {
        if (!acc || acc->area < params.min_area) continue;
        report.components.push_back({BBox{acc->x0, acc->y0, acc->x1 - acc->x0 + 1, acc->y1 - acc->y0 + 1}, acc->area});
    }
    report.count = static_cast<int>(report.components.size());
    return report;
}

EvalResult evaluate_set(const std::filesystem::path& manifest, const OracleParams& params, int jobs) {
    const std::vector<DatasetRecord> records = read_manifest(manifest);
    const std::filesystem::path root = manifest.parent_path();
    std::vector<std::optional<ComponentReport>> reports(records.size());
    std::vector<std::string> failures(records.size());

    parallel_for(records.size(), jobs, [&](std::size_t i) {
        try {
            const Image image = read_png_rgb(root / records[i].image_path);
            OracleParams p = params;
            p.background_gray = records[i].background_gray;
            reports[i] = count_components(image, p);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    EvalResult result;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!reports[i]) {
            result.errors.push_back({records[i].id, failures[i]});
            continue;
        }
        result.record_ids.push_back(records[i].id);
        result.pairs.push_back({records[i].count, reports[i]->count});
        result.reports.push_back(std::move(*reports[i]));
    }
    return result;
}

void to_json(nlohmann::json& j, const ComponentReport& report) {
    j = nlohmann::json{{"count", report.count}, {"threshold_used", report.threshold_used}};
    auto& comps = j["components"] = nlohmann::json::array();
    for (const Component& c : report.components) comps.push_back({{"box", c.box}, {"area", c.area}});
}

void from_json(const nlohmann::json& j, ComponentReport& report) {
    report.count = j.at("count").get<int>();
    report.threshold_used = j.value("threshold_used", std::uint8_t{0});
    report.components.clear();
    for (const auto& c : j.at("components")) report.components.push_back({c.at("box").get<BBox>(), c.at("area").get<int>()});
    if (static_cast<std::size_t>(report.count) != report.components.size())
        throw FormatError("component report: count does not match components");
}

} // namespace numgen
