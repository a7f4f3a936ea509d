#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace numgen {

struct CountPair {
    int requested = 0;
    int predicted = 0;

    friend bool operator==(const CountPair&, const CountPair&) = default;
};

inline constexpr int kDefaultTolerance = 2;

// All three throw DegenerateInput on an empty list.
double exact_accuracy(std::span<const CountPair> pairs);
double mean_absolute_error(std::span<const CountPair> pairs);
double tolerance_accuracy(std::span<const CountPair> pairs, int tolerance = kDefaultTolerance);

struct BucketMetrics {
    double exact_accuracy = 0.0;
    double tolerance_accuracy = 0.0;
    double mae = 0.0;
};

struct BucketRow {
    std::string label;
    int lo = 0;
    std::optional<int> hi;  // exclusive; empty for the open-ended last bucket
    std::size_t n = 0;
    std::optional<BucketMetrics> metrics;  // empty bucket -> no metrics
};

struct MetricsReport {
    std::vector<int> edges;
    int tolerance = kDefaultTolerance;
    std::vector<BucketRow> buckets;
    BucketRow overall;
    std::size_t below_first_edge = 0;  // pairs folded into the first bucket
};

inline const std::vector<int> kDefaultBucketEdges{1, 10, 20, 30};

// Buckets are half-open on the requested count, [edge_i, edge_{i+1}), with the
// last bucket open-ended. Requested counts below the first edge fall into the
// first bucket and are tallied in below_first_edge.
MetricsReport bucket_report(std::span<const CountPair> pairs, const std::vector<int>& edges = kDefaultBucketEdges,
                            int tolerance = kDefaultTolerance);

// Rows: buckets then "overall"; columns: bucket,lo,hi,n,exact_accuracy,tolerance_accuracy,mae.
std::string report_csv(const MetricsReport& report);
nlohmann::json report_json(const MetricsReport& report);

} // namespace numgen
