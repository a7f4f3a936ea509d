#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "numgen/count_oracle.hpp"
#include "numgen/data_engine.hpp"
#include "numgen/flow_model.hpp"
#include "numgen/image.hpp"
#include "numgen/layout_stats.hpp"
#include "numgen/metrics.hpp"
#include "numgen/noise_prior.hpp"
#include "numgen/rng.hpp"

namespace numgen {

// x_t = (1 - t) x0 + t eps.
NoiseTensor forward_interpolate(const NoiseTensor& x0, const NoiseTensor& eps, double t);

// v* = eps - x0, the time derivative of forward_interpolate.
NoiseTensor velocity_target(const NoiseTensor& x0, const NoiseTensor& eps);

// Gray 8-bit value v <-> model range: x = v / 127.5 - 1.
NoiseTensor image_to_tensor(const Image& image);
Image tensor_to_image(const NoiseTensor& tensor);

Eigen::MatrixXd to_matrix(const NoiseTensor& tensor);
NoiseTensor from_matrix(const Eigen::MatrixXd& m, int channels, int h, int w);

enum class TimestepStrategy { uniform, logit_normal };
enum class OptimizerKind { sgd, adam };

std::string_view to_string(TimestepStrategy strategy) noexcept;
TimestepStrategy timestep_strategy_from_string(std::string_view name);
std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind optimizer_from_string(std::string_view name);

struct TrainConfig {
    int batch_size = 8;
    int steps = 2000;
    double learning_rate = 0.05;
    TimestepStrategy timestep_strategy = TimestepStrategy::uniform;
    double logit_mean = 0.0;
    double logit_std = 1.0;
    bool shared_noise_batching = false;
    double cond_dropout_prob = 0.1;
    std::uint64_t seed = 0;
    // Global gradient-norm clip; 0 disables it.
    double grad_clip = 1.0;
    OptimizerKind optimizer = OptimizerKind::sgd;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    // Probability that a sample's noise is reshaped by a count-aware prior
    // built from its own layout; the prior is drawn uniformly from `priors`.
    double prior_probability = 0.0;
    std::vector<PriorConfig> priors;
};

void validate(const TrainConfig& config);

struct TrainSample {
    NoiseTensor image;  // model range [-1, 1]
    int count = 0;
    LayoutSpec layout;
};

double sample_timestep(const TrainConfig& config, Rng& rng);

// What one step drew for each batch element.
struct StepTrace {
    std::vector<double> t;
    std::vector<NoiseTensor> noise;  // after any prior
    std::vector<int> cond;
};

// Moment estimates for Adam; unused by plain SGD.
struct OptimizerState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::uint64_t t = 0;
};

// One optimizer step on the given batch: loss = mean_b mean_elems |v(x_t, t, c) - (eps - x0)|^2
// evaluated before the update. Randomness comes from derive_seed(config.seed, step_index).
double train_step(FlowModel& model, std::span<const TrainSample> batch, const TrainConfig& config,
                  std::uint64_t step_index, StepTrace* trace = nullptr, OptimizerState* state = nullptr);

// Batch indices for a step, drawn with replacement.
std::vector<std::size_t> batch_indices(std::size_t dataset_size, const TrainConfig& config, std::uint64_t step_index);

struct TrainLog {
    std::vector<double> losses;
    double initial_loss() const { return losses.empty() ? 0.0 : losses.front(); }
    // Mean of the last `window` step losses.
    double tail_mean(std::size_t window = 100) const;
};

TrainLog train(FlowModel& model, std::span<const TrainSample> dataset, const TrainConfig& config);

struct SampleConfig {
    int ode_steps = 50;
    double cfg_scale = 3.5;
    PriorConfig prior;              // method none -> unmodified noise
    std::uint64_t layout_seed = 0;  // seed of the layout planned for the prior
    RandomLayoutOptions layout_options;
};

// Plans the layout euler_sample would use for a prior.
LayoutSpec prior_layout(const FlowArch& arch, int count, const SampleConfig& config);

// Initial noise after the optional count-aware prior.
NoiseTensor prepare_noise(const FlowArch& arch, const NoiseTensor& noise, int count, const SampleConfig& config);

// Guided velocity: v_u + s (v_c - v_u) for s > 0, v_c otherwise.
Eigen::MatrixXd guided_velocity(const FlowModel& model, const Eigen::MatrixXd& x, double t, int count, double cfg_scale);

// Euler integration from t = 1 to t = 0 in uniform steps, x <- x - dt v.
// The result is clamped to [-1, 1] once at the end.
NoiseTensor euler_sample(const FlowModel& model, const NoiseTensor& initial_noise, int count,
                         const SampleConfig& config);

struct TimestepPair {
    double t = 0.0;
    NoiseTensor noise;
};

// n pairs with stratified t_i = (i + 0.5) / n and eps_i = sample_noise(derive_seed(seed, i)).
std::vector<TimestepPair> make_timestep_pairs(int n, const FlowArch& arch, std::uint64_t seed);

// L_k(x) = mean over pairs of mean |v((1-t) x + t eps, t, k) - (eps - x)|^2.
double count_loss(const FlowModel& model, const NoiseTensor& image, int count, std::span<const TimestepPair> pairs);

struct GradCheckOptions {
    double h = 1e-3;
    int subset = 64;
    std::uint64_t seed = 0;
    std::optional<FlowModel::Group> group;  // restrict the subset to one group
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::vector<std::size_t> indices;
};

// Compares backward() with central differences of the single-sample loss.
GradCheckResult grad_check(const FlowModel& model, const NoiseTensor& x0, int count, double t, const NoiseTensor& eps,
                           const GradCheckOptions& options = {});

// Single-sample loss and full gradient (for tests and grad_check).
double sample_loss(const FlowModel& model, const NoiseTensor& x0, int count, double t, const NoiseTensor& eps,
                   Eigen::VectorXd* grad = nullptr);

// Toy corpus: 32x32 disc images, counts 1..8, `per_count` images each.
DatasetConfig toy_dataset_config(int per_count, std::uint64_t seed, int canvas = 32, int max_count = 8);
TrainSample to_train_sample(const RenderedRecord& rendered);
std::vector<TrainSample> build_toy_dataset(const DatasetConfig& config, int jobs = 1);

// Oracle settings for toy-scale generated images.
OracleParams toy_oracle_params();

struct GeneratedCount {
    std::uint64_t noise_seed = 0;
    int requested = 0;
    int predicted = 0;
};

// Samples every (noise_seed, count) cell, counts objects with the oracle and
// returns cells in seed-major order. The layout seed of a cell is
// derive_seed(noise_seed, count).
std::vector<GeneratedCount> sample_and_count(const FlowModel& model, std::span<const std::uint64_t> noise_seeds,
                                             std::span<const int> counts, const SampleConfig& config,
                                             const OracleParams& oracle, int jobs = 1,
                                             std::vector<NoiseTensor>* images = nullptr);

struct NoiseProbeResult {
    std::vector<GeneratedCount> cells;
    std::vector<std::pair<std::uint64_t, ModePreference>> modes;  // per noise seed
    double mean_concentration = 0.0;
    // Concentration a count-faithful generator would show over the same counts.
    double faithful_concentration = 0.0;
    double exact_accuracy = 0.0;
};

NoiseProbeResult probe_noise(const FlowModel& model, std::span<const std::uint64_t> noise_seeds,
                             std::span<const int> counts, const SampleConfig& config, const OracleParams& oracle,
                             int jobs = 1);

} // namespace numgen
