#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "numgen/flow_model.hpp"
#include "numgen/noise_prior.hpp"
#include "numgen/toy_flow.hpp"

namespace numgen {

struct ClassifierConfig {
    std::vector<int> candidates;  // empty -> 1..max_count
    int coarse_timesteps = 8;
    int top_m = 4;
    int refine_timesteps = 32;
    // same (t, eps) list for every candidate inside a stage
    bool shared_pairs = true;
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct CandidateLoss {
    int count = 0;
    double loss = 0.0;
};

struct ClassifierResult {
    int predicted = 0;
    std::vector<CandidateLoss> coarse;   // in candidate order
    std::vector<int> coarse_ranking;     // best first
    std::vector<int> top_set;
    std::vector<CandidateLoss> refined;  // in top_set order
    std::vector<int> final_ranking;      // refined top_set, then the rest in coarse order

    // 1-based; 0 when the count is not a candidate
    [[nodiscard]] int coarse_rank(int count) const;
    [[nodiscard]] int final_rank(int count) const;
    [[nodiscard]] bool in_top_set(int count) const;
};

std::vector<int> resolve_candidates(const ClassifierConfig& config, const FlowArch& arch);

// ascending loss, ties broken by the smaller count
std::vector<int> rank_by_loss(std::span<const CandidateLoss> losses);

std::vector<CandidateLoss> score_candidates(const FlowModel& model, const NoiseTensor& image,
                                            std::span<const int> candidates, int timesteps, std::uint64_t seed,
                                            bool shared_pairs, int jobs);

ClassifierResult classify_coarse_to_fine(const FlowModel& model, const NoiseTensor& image,
                                         const ClassifierConfig& config);

int exhaustive_argmin(const FlowModel& model, const NoiseTensor& image, std::span<const int> candidates,
                      std::span<const TimestepPair> pairs);

} // namespace numgen
