#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "numgen/image.hpp"
#include "numgen/layout.hpp"
#include "numgen/metrics.hpp"

namespace numgen {

struct Component {
    BBox box;
    int area = 0;
};

struct ComponentReport {
    int count = 0;
    std::vector<Component> components;  // raster order of first pixel
    std::uint8_t threshold_used = 0;
};

struct OracleParams {
    std::uint8_t background_gray = 200;
    std::uint8_t delta = 16;  // foreground iff max_channel |pixel - background| > delta
    int connectivity = 8;     // 4 or 8
    int min_area = 4;
};

// Two-pass union-find labeling of the foreground mask.
ComponentReport count_components(const Image& image, const OracleParams& params = {});

struct EvalError {
    std::size_t record_id = 0;
    std::string message;
};

struct EvalResult {
    std::vector<std::size_t> record_ids;  // parallel to pairs and reports
    std::vector<CountPair> pairs;
    std::vector<ComponentReport> reports;
    std::vector<EvalError> errors;
};

// Counts every record of a manifest. Each record's background_gray overrides
// params.background_gray. Unreadable images become error entries.
EvalResult evaluate_set(const std::filesystem::path& manifest, const OracleParams& params = {}, int jobs = 1);

void to_json(nlohmann::json& j, const ComponentReport& report);
void from_json(const nlohmann::json& j, ComponentReport& report);

} // namespace numgen
