#include "numgen/classifier.hpp"

#include <algorithm>
#include <set>

#include "numgen/error.hpp"
#include "numgen/parallel.hpp"
#include "numgen/rng.hpp"

namespace numgen {

namespace {

int rank_of(const std::vector<int>& ranking, int count) {
    const auto it = std::find(ranking.begin(), ranking.end(), count);
    return it == ranking.end() ? 0 : static_cast<int>(it - ranking.begin()) + 1;
}

} // namespace

int ClassifierResult::coarse_rank(int count) const { return rank_of(coarse_ranking, count); }
int ClassifierResult::final_rank(int count) const { return rank_of(final_ranking, count); }
bool ClassifierResult::in_top_set(int count) const {
    return std::find(top_set.begin(), top_set.end(), count) != top_set.end();
}

std::vector<int> resolve_candidates(const ClassifierConfig& config, const FlowArch& arch) {
    std::vector<int> out = config.candidates;
    if (out.empty())
        for (int k = 1; k <= arch.max_count; ++k) out.push_back(k);
    std::set<int> seen;
    for (int k : out) {
        if (k < 1 || k > arch.max_count)
            throw DegenerateInput("classifier: candidate count " + std::to_string(k) + " out of range");
        if (!seen.insert(k).second) throw DegenerateInput("classifier: duplicate candidate " + std::to_string(k));
    }
    if (config.coarse_timesteps < 1 || config.refine_timesteps < 1)
        throw DegenerateInput("classifier: timestep counts must be >= 1");
    if (config.top_m < 1 || config.top_m > static_cast<int>(out.size()))
        throw DegenerateInput("classifier: top_m must lie in 1..|candidates|");
    return out;
}

std::vector<int> rank_by_loss(std::span<const CandidateLoss> losses) {
    std::vector<CandidateLoss> sorted(losses.begin(), losses.end());
    std::sort(sorted.begin(), sorted.end(), [](const CandidateLoss& a, const CandidateLoss& b) {
        if (a.loss != b.loss) return a.loss < b.loss;
        return a.count < b.count;
    });
    std::vector<int> out;
    for (const auto& c : sorted) out.push_back(c.count);
    return out;
}

std::vector<CandidateLoss> score_candidates(const FlowModel& model, const NoiseTensor& image,
                                            std::span<const int> candidates, int timesteps, std::uint64_t seed,
                                            bool shared_pairs, int jobs) {
    std::vector<CandidateLoss> out(candidates.size());
    const auto shared = shared_pairs ? make_timestep_pairs(timesteps, model.arch(), seed) : std::vector<TimestepPair>{};
    parallel_for(candidates.size(), jobs, [&](std::size_t i) {
        const int k = candidates[i];
        if (shared_pairs) {
            out[i] = {k, count_loss(model, image, k, shared)};
        } else {
            const auto own = make_timestep_pairs(timesteps, model.arch(), derive_seed(seed, static_cast<std::uint64_t>(k)));
            out[i] = {k, count_loss(model, image, k, own)};
        }
    });
    return out;
}

ClassifierResult classify_coarse_to_fine(const FlowModel& model, const NoiseTensor& image,
                                         const ClassifierConfig& config) {
    const std::vector<int> candidates = resolve_candidates(config, model.arch());
    ClassifierResult result;
    result.coarse = score_candidates(model, image, candidates, config.coarse_timesteps, derive_seed(config.seed, 0),
                                     config.shared_pairs, config.jobs);
    result.coarse_ranking = rank_by_loss(result.coarse);
    result.top_set.assign(result.coarse_ranking.begin(), result.coarse_ranking.begin() + config.top_m);

    result.refined = score_candidates(model, image, result.top_set, config.refine_timesteps,
                                      derive_seed(config.seed, 1), config.shared_pairs, config.jobs);
    result.final_ranking = rank_by_loss(result.refined);
    for (int k : result.coarse_ranking)
        if (!result.in_top_set(k)) result.final_ranking.push_back(k);
    result.predicted = result.final_ranking.front();
    return result;
}

int exhaustive_argmin(const FlowModel& model, const NoiseTensor& image, std::span<const int> candidates,
                      std::span<const TimestepPair> pairs) {
    if (candidates.empty()) throw DegenerateInput("exhaustive_argmin: no candidates");
    int best = candidates[0];
    double best_loss = count_loss(model, image, best, pairs);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double loss = count_loss(model, image, candidates[i], pairs);
        if (loss < best_loss || (loss == best_loss && candidates[i] < best)) {
            best = candidates[i];
            best_loss = loss;
        }
    }
    return best;
}

} // namespace numgen
