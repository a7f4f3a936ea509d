#include "numgen/layout_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "numgen/error.hpp"
#include "numgen/rng.hpp"

namespace numgen {

double distance(const Point2& a, const Point2& b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

namespace {

double dist2(const Point2& a, const Point2& b) noexcept {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

std::size_t nearest(const Point2& p, const std::vector<Point2>& centers) {
    std::size_t best = 0;
    double best_d = dist2(p, centers[0]);
    for (std::size_t j = 1; j < centers.size(); ++j) {
        const double d = dist2(p, centers[j]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

double inertia_of(std::span<const Point2> points, const std::vector<Point2>& centers) {
    double total = 0.0;
    for (const Point2& p : points) total += dist2(p, centers[nearest(p, centers)]);
    return total;
}

std::vector<Point2> kmeanspp_init(std::span<const Point2> points, int k, Rng& rng) {
    const std::size_t n = points.size();
    std::vector<Point2> centers;
    std::vector<bool> chosen(n, false);
    std::size_t first = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    centers.push_back(points[first]);
    chosen[first] = true;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = dist2(points[i], centers[0]);

    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && acc > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n)  // rounding at the tail
                for (std::size_t i = n; i-- > 0;)
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
        } else {
            // All remaining points coincide with a center; take any unchosen one.
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) free.push_back(i);
            pick = free[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(free.size()) - 1))];
        }
        chosen[pick] = true;
        centers.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], dist2(points[i], centers.back()));
    }
    return centers;
}

ClusterResult lloyd(std::span<const Point2> points, int k, std::uint64_t seed, int max_iter, double tol) {
    Rng rng(seed);
    ClusterResult result;
    result.k = k;
    result.centers = kmeanspp_init(points, k, rng);
    std::vector<std::size_t> assign(points.size());

    for (int it = 0; it < max_iter; ++it) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            assign[i] = nearest(points[i], result.centers);
            inertia += dist2(points[i], result.centers[assign[i]]);
        }
        result.inertia_history.push_back(inertia);
        result.iterations = it + 1;

        std::vector<Point2> sums(static_cast<std::size_t>(k));
        std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            sums[assign[i]].x += points[i].x;
            sums[assign[i]].y += points[i].y;
            ++sizes[assign[i]];
        }
        double max_move = 0.0;
        for (std::size_t j = 0; j < sums.size(); ++j) {
            if (sizes[j] == 0) continue;  // empty cluster keeps its center
            const Point2 next{sums[j].x / static_cast<double>(sizes[j]), sums[j].y / static_cast<double>(sizes[j])};
            max_move = std::max(max_move, distance(next, result.centers[j]));
            result.centers[j] = next;
        }
        if (max_move < tol) break;
    }
    result.inertia = inertia_of(points, result.centers);
    return result;
}

} // namespace

ClusterResult kmeans(std::span<const Point2> points, int k, std::uint64_t seed, int max_iter, double tol,
                     int restarts) {
    if (k < 1) throw DegenerateInput("kmeans: k must be >= 1");
    if (points.size() < static_cast<std::size_t>(k)) throw DegenerateInput("kmeans: fewer points than clusters");
    if (max_iter < 1 || restarts < 1) throw DegenerateInput("kmeans: max_iter and restarts must be >= 1");
    ClusterResult best = lloyd(points, k, derive_seed(seed, 0), max_iter, tol);
    for (int r = 1; r < restarts; ++r) {
        ClusterResult candidate = lloyd(points, k, derive_seed(seed, static_cast<std::uint64_t>(r)), max_iter, tol);
        if (candidate.inertia < best.inertia) best = std::move(candidate);
    }
    return best;
}

Assignment hungarian_match(std::span<const Point2> a, std::span<const Point2> b) {
    const std::size_t m = a.size();
    const std::size_t n = b.size();
    if (m > n) throw DegenerateInput("hungarian_match: more centers in A than in B");
    Assignment result;
    if (m == 0) {
        for (std::size_t j = 0; j < n; ++j) result.unmatched.push_back(static_cast<int>(j));
        return result;
    }

    // 1-based potentials formulation; row i of A, column j of B.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(m + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        owner[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = owner[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = distance(a[i0 - 1], b[j - 1]) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (owner[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    result.match.assign(m, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        if (owner[j] != 0)
            result.match[owner[j] - 1] = static_cast<int>(j - 1);
        else
            result.unmatched.push_back(static_cast<int>(j - 1));
    }
    for (std::size_t i = 0; i < m; ++i) result.total_cost += distance(a[i], b[static_cast<std::size_t>(result.match[i])]);
    return result;
}

StabilityRecord stability_score(std::span<const Point2> centers_n, std::span<const Point2> centers_n1, double tau) {
    if (centers_n.empty() || centers_n1.size() != centers_n.size() + 1)
        throw DegenerateInput("stability_score: expected n >= 1 and n + 1 centers");
    if (!(tau > 0.0)) throw DegenerateInput("stability_score: tau must be > 0");
    const Assignment assignment = hungarian_match(centers_n, centers_n1);
    StabilityRecord record;
    record.n = static_cast<int>(centers_n.size());
    record.tau = tau;
    std::size_t stable = 0;
    for (std::size_t j = 0; j < centers_n.size(); ++j) {
        const double d = distance(centers_n[j], centers_n1[static_cast<std::size_t>(assignment.match[j])]);
        record.displacements.push_back(d);
        stable += d < tau;
    }
    record.matched_fraction = static_cast<double>(stable) / static_cast<double>(centers_n.size());
    for (int j : assignment.unmatched) record.new_centers.push_back(centers_n1[static_cast<std::size_t>(j)]);
    return record;
}

ModePreference mode_preference(std::span<const int> counts) {
    if (counts.empty()) throw DegenerateInput("mode_preference: empty count list");
    std::map<int, std::size_t> freq;
    for (int c : counts) ++freq[c];
    ModePreference out;
    std::size_t best = 0;
    for (const auto& [value, n] : freq)  // ascending, so ties keep the smallest
        if (n > best) {
            best = n;
            out.mode = value;
        }
    std::size_t near = 0;
    for (int c : counts) near += std::abs(c - out.mode) <= 1;
    out.concentration = static_cast<double>(near) / static_cast<double>(counts.size());
    return out;
}

EvolutionTrace evolution_trace(const std::map<int, std::vector<Point2>>& centers_by_n, double tau) {
    EvolutionTrace trace;
    for (const auto& [n, centers] : centers_by_n) {
        const auto next = centers_by_n.find(n + 1);
        if (next == centers_by_n.end()) {
            if (std::next(centers_by_n.find(n)) != centers_by_n.end()) trace.skipped.push_back(n);
            continue;
        }
        trace.records.push_back(stability_score(centers, next->second, tau));
    }
    return trace;
}

std::string stability_table_csv(const std::map<int, std::vector<Point2>>& centers_by_n,
                                const std::vector<double>& taus) {
    std::ostringstream out;
    out.precision(6);
    std::vector<int> ns;
    for (const auto& [n, centers] : centers_by_n)
        if (centers_by_n.count(n + 1)) ns.push_back(n);
    out << "tau";
    for (int n : ns) out << ",n=" << n;
    out << '\n';
    for (double tau : taus) {
        out << tau;
        for (const StabilityRecord& r : evolution_trace(centers_by_n, tau).records) out << ',' << r.matched_fraction;
        out << '\n';
    }
    return out.str();
}

} // namespace numgen
