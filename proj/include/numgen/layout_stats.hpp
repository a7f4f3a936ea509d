#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace numgen {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

double distance(const Point2& a, const Point2& b) noexcept;

struct ClusterResult {
    int k = 0;
    std::vector<Point2> centers;
    double inertia = 0.0;  // sum_i min_j |c_i - mu_j|^2 for the returned centers
    int iterations = 0;
    std::vector<double> inertia_history;  // after each assignment step of the winning run
};

// Lloyd iterations from a seeded k-means++ start. Stops once no center moves
// by tol or more, or after max_iter iterations. With restarts > 1 the run with
// the lowest inertia wins; restart r is seeded with derive_seed(seed, r).
ClusterResult kmeans(std::span<const Point2> points, int k, std::uint64_t seed, int max_iter = 100,
                     double tol = 1e-9, int restarts = 1);

struct Assignment {
    std::vector<int> match;      // match[j] = index in B assigned to A[j]
    std::vector<int> unmatched;  // B indices left over ("newly emerged"), ascending
    double total_cost = 0.0;     // sum of Euclidean distances
};

// Minimum total Euclidean cost injection A -> B (|A| <= |B|), Kuhn-Munkres
// with potentials, O(|A|^2 |B|).
Assignment hungarian_match(std::span<const Point2> a, std::span<const Point2> b);

struct StabilityRecord {
    int n = 0;
    double tau = 0.0;
    double matched_fraction = 0.0;
    std::vector<double> displacements;  // per center of the n-set
    std::vector<Point2> new_centers;
};

// (1/n) * #{ j : |mu_j^(n) - mu_pi(j)^(n+1)| < tau } with pi from hungarian_match.
StabilityRecord stability_score(std::span<const Point2> centers_n, std::span<const Point2> centers_n1, double tau);

struct ModePreference {
    int mode = 0;              // most frequent value, ties -> smallest
    double concentration = 0;  // fraction within +-1 of the mode
};

ModePreference mode_preference(std::span<const int> counts);

struct EvolutionTrace {
    std::vector<StabilityRecord> records;
    std::vector<int> skipped;  // n values whose n+1 group is missing
};

// One stability record per consecutive pair (n, n+1) present in the map.
EvolutionTrace evolution_trace(const std::map<int, std::vector<Point2>>& centers_by_n, double tau);

inline const std::vector<double> kStabilityTaus{0.05, 0.10, 0.15, 0.20};

// Rows: tau; columns: n (the smaller count of each consecutive pair).
std::string stability_table_csv(const std::map<int, std::vector<Point2>>& centers_by_n,
                                const std::vector<double>& taus = kStabilityTaus);

} // namespace numgen
