#include "numgen/metrics.hpp"

#include <cstdlib>
#include <sstream>

#include "numgen/error.hpp"

namespace numgen {

namespace {

void require_pairs(std::span<const CountPair> pairs, const char* what) {
    if (pairs.empty()) throw DegenerateInput(std::string(what) + ": empty pair list");
}

BucketMetrics compute(std::span<const CountPair> pairs, int tolerance) {
    std::size_t exact = 0;
    std::size_t within = 0;
    double abs_sum = 0.0;
    for (const CountPair& p : pairs) {
        const int diff = std::abs(p.predicted - p.requested);
        exact += diff == 0;
        within += diff <= tolerance;
        abs_sum += static_cast<double>(diff);
    }
    const auto n = static_cast<double>(pairs.size());
    return {static_cast<double>(exact) / n, static_cast<double>(within) / n, abs_sum / n};
}

BucketRow make_row(std::string label, int lo, std::optional<int> hi, const std::vector<CountPair>& members,
                   int tolerance) {
    BucketRow row{std::move(label), lo, hi, members.size(), std::nullopt};
    if (!members.empty()) row.metrics = compute(members, tolerance);
    return row;
}

} // namespace

double exact_accuracy(std::span<const CountPair> pairs) {
    require_pairs(pairs, "exact_accuracy");
    return compute(pairs, 0).exact_accuracy;
}

double mean_absolute_error(std::span<const CountPair> pairs) {
    require_pairs(pairs, "mean_absolute_error");
    return compute(pairs, 0).mae;
}

double tolerance_accuracy(std::span<const CountPair> pairs, int tolerance) {
    require_pairs(pairs, "tolerance_accuracy");
    if (tolerance < 0) throw DegenerateInput("tolerance_accuracy: negative tolerance");
    return compute(pairs, tolerance).tolerance_accuracy;
}

MetricsReport bucket_report(std::span<const CountPair> pairs, const std::vector<int>& edges, int tolerance) {
    if (edges.empty()) throw DegenerateInput("bucket_report: no bucket edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i] <= edges[i - 1]) throw DegenerateInput("bucket_report: edges must be strictly increasing");
    if (tolerance < 0) throw DegenerateInput("bucket_report: negative tolerance");

    MetricsReport report;
    report.edges = edges;
    report.tolerance = tolerance;
    std::vector<std::vector<CountPair>> members(edges.size());
    for (const CountPair& p : pairs) {
        std::size_t b = 0;
        if (p.requested < edges.front()) {
            ++report.below_first_edge;
        } else {
            while (b + 1 < edges.size() && p.requested >= edges[b + 1]) ++b;
        }
        members[b].push_back(p);
    }
    for (std::size_t b = 0; b < edges.size(); ++b) {
        const bool last = b + 1 == edges.size();
        std::string label = last ? ">=" + std::to_string(edges[b])
                                 : std::to_string(edges[b]) + "-" + std::to_string(edges[b + 1]);
        report.buckets.push_back(make_row(std::move(label), edges[b],
                                          last ? std::nullopt : std::optional<int>(edges[b + 1]), members[b],
                                          tolerance));
    }
    report.overall = make_row("overall", edges.front(), std::nullopt,
                              std::vector<CountPair>(pairs.begin(), pairs.end()), tolerance);
    return report;
}

std::string report_csv(const MetricsReport& report) {
    std::ostringstream out;
    out.precision(6);
    out << "# buckets are half-open [lo,hi) on the requested count; tolerance T=" << report.tolerance << '\n';
    out << "bucket,lo,hi,n,exact_accuracy,tolerance_accuracy,mae\n";
    auto emit = [&](const BucketRow& row) {
        out << row.label << ',' << row.lo << ',' << (row.hi ? std::to_string(*row.hi) : std::string("inf")) << ','
            << row.n << ',';
        if (row.metrics)
            out << row.metrics->exact_accuracy << ',' << row.metrics->tolerance_accuracy << ',' << row.metrics->mae;
        else
            out << ",,";
        out << '\n';
    };
    for (const BucketRow& row : report.buckets) emit(row);
    emit(report.overall);
    return out.str();
}

nlohmann::json report_json(const MetricsReport& report) {
    auto row_json = [](const BucketRow& row) {
        nlohmann::json j{{"label", row.label}, {"lo", row.lo}, {"n", row.n}};
        j["hi"] = row.hi ? nlohmann::json(*row.hi) : nlohmann::json(nullptr);
        if (row.metrics) {
            j["exact_accuracy"] = row.metrics->exact_accuracy;
            j["tolerance_accuracy"] = row.metrics->tolerance_accuracy;
            j["mae"] = row.metrics->mae;
        } else {
            j["exact_accuracy"] = nullptr;
            j["tolerance_accuracy"] = nullptr;
            j["mae"] = nullptr;
        }
        return j;
    };
    nlohmann::json j;
    j["bucket_semantics"] = "half-open [lo,hi) on requested count";
    j["edges"] = report.edges;
    j["tolerance"] = report.tolerance;
    j["below_first_edge"] = report.below_first_edge;
    j["buckets"] = nlohmann::json::array();
    for (const BucketRow& row : report.buckets) j["buckets"].push_back(row_json(row));
    j["overall"] = row_json(report.overall);
    return j;
}

} // namespace numgen
