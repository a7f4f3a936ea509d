#include "numgen/toy_flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "numgen/error.hpp"
#include "numgen/parallel.hpp"
#include "numgen/rng.hpp"

namespace numgen {

namespace {

void require_same_shape(const NoiseTensor& a, const NoiseTensor& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": shape mismatch");
}

void require_count(const FlowArch& arch, int count, const char* what) {
    if (count < 1 || count > arch.max_count)
        throw DegenerateInput(std::string(what) + ": count " + std::to_string(count) + " outside 1.." +
                              std::to_string(arch.max_count));
}

void require_model_shape(const FlowArch& arch, const NoiseTensor& x, const char* what) {
    if (x.channels != arch.channels || x.h != arch.height || x.w != arch.width)
        throw ShapeError(std::string(what) + ": tensor does not match the model grid");
}

} // namespace

NoiseTensor forward_interpolate(const NoiseTensor& x0, const NoiseTensor& eps, double t) {
    require_same_shape(x0, eps, "forward_interpolate");
    if (!(t >= 0.0 && t <= 1.0)) throw DegenerateInput("forward_interpolate: t outside [0, 1]");
    NoiseTensor out = x0;
    const auto tf = static_cast<float>(t);
    const float sf = 1.0f - tf;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = sf * x0.values[i] + tf * eps.values[i];
    return out;
}

NoiseTensor velocity_target(const NoiseTensor& x0, const NoiseTensor& eps) {
    require_same_shape(x0, eps, "velocity_target");
    NoiseTensor out = eps;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = eps.values[i] - x0.values[i];
    return out;
}

NoiseTensor image_to_tensor(const Image& image) {
    NoiseTensor out(1, image.h, image.w);
    for (int r = 0; r < image.h; ++r)
        for (int c = 0; c < image.w; ++c) out.at(0, r, c) = static_cast<float>(image.pixel(c, r)[0] / 127.5 - 1.0);
    return out;
}

Image tensor_to_image(const NoiseTensor& tensor) {
    Image image(tensor.w, tensor.h, 0);
    for (int r = 0; r < tensor.h; ++r)
        for (int c = 0; c < tensor.w; ++c) {
            const double v = std::clamp((static_cast<double>(tensor.at(0, r, c)) + 1.0) * 127.5, 0.0, 255.0);
            std::uint8_t* p = image.pixel(c, r);
            p[0] = p[1] = p[2] = static_cast<std::uint8_t>(std::lround(v));
        }
    return image;
}

Eigen::MatrixXd to_matrix(const NoiseTensor& tensor) {
    const int pixels = tensor.h * tensor.w;
    Eigen::MatrixXd m(tensor.channels, pixels);
    for (int c = 0; c < tensor.channels; ++c)
        for (int p = 0; p < pixels; ++p) m(c, p) = tensor.values[static_cast<std::size_t>(c) * pixels + p];
    return m;
}

NoiseTensor from_matrix(const Eigen::MatrixXd& m, int channels, int h, int w) {
    NoiseTensor out(channels, h, w);
    const int pixels = h * w;
    if (m.rows() != channels || m.cols() != pixels) throw ShapeError("from_matrix: shape mismatch");
    for (int c = 0; c < channels; ++c)
        for (int p = 0; p < pixels; ++p) out.values[static_cast<std::size_t>(c) * pixels + p] = static_cast<float>(m(c, p));
    return out;
}

std::string_view to_string(TimestepStrategy strategy) noexcept {
    return strategy == TimestepStrategy::logit_normal ? "logit-normal" : "uniform";
}

TimestepStrategy timestep_strategy_from_string(std::string_view name) {
    if (name == "uniform") return TimestepStrategy::uniform;
    if (name == "logit-normal" || name == "logit_normal") return TimestepStrategy::logit_normal;
    throw FormatError("unknown timestep strategy '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) noexcept { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw FormatError("unknown optimizer '" + std::string(name) + "'");
}

void validate(const TrainConfig& c) {
    if (c.batch_size < 1 || c.steps < 0 || !(c.learning_rate > 0.0))
        throw DegenerateInput("TrainConfig: batch_size, steps and learning_rate must be positive");
    if (!(c.logit_std > 0.0)) throw DegenerateInput("TrainConfig: logit std must be > 0");
    if (!(c.cond_dropout_prob >= 0.0 && c.cond_dropout_prob < 1.0))
        throw DegenerateInput("TrainConfig: cond_dropout_prob must lie in [0, 1)");
    if (!(c.prior_probability >= 0.0 && c.prior_probability <= 1.0))
        throw DegenerateInput("TrainConfig: prior_probability must lie in [0, 1]");
    if (c.prior_probability > 0.0 && c.priors.empty())
        throw DegenerateInput("TrainConfig: prior_probability > 0 needs at least one prior");
    if (c.grad_clip < 0.0) throw DegenerateInput("TrainConfig: grad_clip must be >= 0");
    if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0 && c.adam_eps > 0.0))
        throw DegenerateInput("TrainConfig: adam betas must lie in [0, 1) and eps must be > 0");
}

double sample_timestep(const TrainConfig& config, Rng& rng) {
    if (config.timestep_strategy == TimestepStrategy::logit_normal) {
        const double z = config.logit_mean + config.logit_std * rng.normal();
        return 1.0 / (1.0 + std::exp(-z));
    }
    return rng.uniform();
}

std::vector<std::size_t> batch_indices(std::size_t dataset_size, const TrainConfig& config, std::uint64_t step_index) {
    if (dataset_size == 0) throw DegenerateInput("batch_indices: empty dataset");
    Rng rng(derive_seed(derive_seed(config.seed, step_index), 0));
    std::vector<std::size_t> out(static_cast<std::size_t>(config.batch_size));
    for (auto& i : out) i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dataset_size) - 1));
    return out;
}

double train_step(FlowModel& model, std::span<const TrainSample> batch, const TrainConfig& config,
                  std::uint64_t step_index, StepTrace* trace, OptimizerState* state) {
    validate(config);
    if (config.optimizer == OptimizerKind::adam && !state) throw DegenerateInput("train_step: adam needs optimizer state");
    if (batch.empty()) throw DegenerateInput("train_step: empty batch");
    const FlowArch& arch = model.arch();
    Rng rng(derive_seed(derive_seed(config.seed, step_index), 1));

    std::optional<NoiseTensor> shared;
    if (config.shared_noise_batching) shared = sample_noise(arch.channels, arch.height, arch.width, rng.next_u64());

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));
    const auto elements = static_cast<double>(arch.image_size());
    const auto batch_n = static_cast<double>(batch.size());
    double loss_sum = 0.0;

    for (const TrainSample& sample : batch) {
        require_model_shape(arch, sample.image, "train_step");
        require_count(arch, sample.count, "train_step");
        const double t = sample_timestep(config, rng);
        NoiseTensor eps = shared ? *shared : sample_noise(arch.channels, arch.height, arch.width, rng.next_u64());
        if (config.prior_probability > 0.0 && rng.uniform() < config.prior_probability) {
            const auto which = rng.uniform_int(0, static_cast<std::int64_t>(config.priors.size()) - 1);
            const auto boxes = map_boxes_to_latent(sample.layout, arch.height, arch.width);
            eps = apply_prior(eps, boxes, config.priors[static_cast<std::size_t>(which)]);
        }
        const int cond = rng.uniform() < config.cond_dropout_prob ? 0 : sample.count;

        const Eigen::MatrixXd x0 = to_matrix(sample.image);
        const Eigen::MatrixXd e = to_matrix(eps);
        const Eigen::MatrixXd xt = (1.0 - t) * x0 + t * e;
        const FlowModel::Cache cache = model.forward(xt, t, cond);
        const Eigen::MatrixXd diff = cache.out - (e - x0);
        loss_sum += diff.squaredNorm() / elements;
        model.backward(cache, (2.0 / (elements * batch_n)) * diff, grad);

        if (trace) {
            trace->t.push_back(t);
            trace->noise.push_back(std::move(eps));
            trace->cond.push_back(cond);
        }
    }

    const double loss = loss_sum / batch_n;
    if (!std::isfinite(loss) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "train_step: non-finite loss at step " << step_index << " (loss=" << loss
            << ", |theta|=" << model.parameters().norm() << ", lr=" << config.learning_rate << ")";
        throw Error(msg.str());
    }
    if (config.grad_clip > 0.0) {
        const double norm = grad.norm();
        if (norm > config.grad_clip) grad *= config.grad_clip / norm;
    }
    if (config.optimizer == OptimizerKind::sgd) {
        model.parameters() -= config.learning_rate * grad;
        return loss;
    }
    if (state->m.size() != grad.size()) {
        state->m = Eigen::VectorXd::Zero(grad.size());
        state->v = Eigen::VectorXd::Zero(grad.size());
        state->t = 0;
    }
    ++state->t;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    state->m = b1 * state->m + (1.0 - b1) * grad;
    state->v = b2 * state->v + (1.0 - b2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state->t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state->t));
    model.parameters().array() -=
        config.learning_rate * (state->m.array() / c1) / ((state->v.array() / c2).sqrt() + config.adam_eps);
    return loss;
}

double TrainLog::tail_mean(std::size_t window) const {
    if (losses.empty()) return 0.0;
    const std::size_t n = std::min(window, losses.size());
    double sum = 0.0;
    for (std::size_t i = losses.size() - n; i < losses.size(); ++i) sum += losses[i];
    return sum / static_cast<double>(n);
}

TrainLog train(FlowModel& model, std::span<const TrainSample> dataset, const TrainConfig& config) {
    validate(config);
    TrainLog log;
    log.losses.reserve(static_cast<std::size_t>(config.steps));
    std::vector<TrainSample> batch;
    OptimizerState state;
    for (int step = 0; step < config.steps; ++step) {
        batch.clear();
        for (std::size_t i : batch_indices(dataset.size(), config, static_cast<std::uint64_t>(step)))
            batch.push_back(dataset[i]);
        log.losses.push_back(train_step(model, batch, config, static_cast<std::uint64_t>(step), nullptr, &state));
    }
    return log;
}

LayoutSpec prior_layout(const FlowArch& arch, int count, const SampleConfig& config) {
    return plan_random_layout(count, arch.width, arch.height, config.layout_seed, config.layout_options);
}

NoiseTensor prepare_noise(const FlowArch& arch, const NoiseTensor& noise, int count, const SampleConfig& config) {
    if (config.prior.method == PriorMethod::none) return noise;
    const LayoutSpec layout = prior_layout(arch, count, config);
    const auto boxes = map_boxes_to_latent(layout, arch.height, arch.width);
    return apply_prior(noise, boxes, config.prior);
}

Eigen::MatrixXd guided_velocity(const FlowModel& model, const Eigen::MatrixXd& x, double t, int count,
                                double cfg_scale) {
    Eigen::MatrixXd v_cond = model.velocity(x, t, count);
    if (!(cfg_scale > 0.0)) return v_cond;
    const Eigen::MatrixXd v_uncond = model.velocity(x, t, 0);
    return v_uncond + cfg_scale * (v_cond - v_uncond);
}

NoiseTensor euler_sample(const FlowModel& model, const NoiseTensor& initial_noise, int count,
                         const SampleConfig& config) {
    const FlowArch& arch = model.arch();
    if (config.ode_steps < 1) throw DegenerateInput("euler_sample: ode_steps must be >= 1");
    require_count(arch, count, "euler_sample");
    require_model_shape(arch, initial_noise, "euler_sample");

    Eigen::MatrixXd x = to_matrix(prepare_noise(arch, initial_noise, count, config));
    const double dt = 1.0 / config.ode_steps;
    for (int i = 0; i < config.ode_steps; ++i) {
        const double t = 1.0 - i * dt;
        x -= dt * guided_velocity(model, x, t, count, config.cfg_scale);
    }
    x = x.cwiseMax(-1.0).cwiseMin(1.0);
    return from_matrix(x, arch.channels, arch.height, arch.width);
}

std::vector<TimestepPair> make_timestep_pairs(int n, const FlowArch& arch, std::uint64_t seed) {
    if (n < 1) throw DegenerateInput("make_timestep_pairs: need at least one pair");
    std::vector<TimestepPair> pairs;
    pairs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        pairs.push_back({(i + 0.5) / n, sample_noise(arch.channels, arch.height, arch.width,
                                                     derive_seed(seed, static_cast<std::uint64_t>(i)))});
    return pairs;
}

double count_loss(const FlowModel& model, const NoiseTensor& image, int count, std::span<const TimestepPair> pairs) {
    if (pairs.empty()) throw DegenerateInput("count_loss: empty timestep list");
    const FlowArch& arch = model.arch();
    require_model_shape(arch, image, "count_loss");
    if (count < 0 || count > arch.max_count) throw DegenerateInput("count_loss: count out of range");
    const Eigen::MatrixXd x0 = to_matrix(image);
    const auto elements = static_cast<double>(arch.image_size());
    double total = 0.0;
    for (const TimestepPair& pair : pairs) {
        require_model_shape(arch, pair.noise, "count_loss");
        const Eigen::MatrixXd e = to_matrix(pair.noise);
        const Eigen::MatrixXd v = model.velocity((1.0 - pair.t) * x0 + pair.t * e, pair.t, count);
        total += (v - (e - x0)).squaredNorm() / elements;
    }
    const double loss = total / static_cast<double>(pairs.size());
    if (!std::isfinite(loss)) throw Error("count_loss: non-finite model output");
    return loss;
}

double sample_loss(const FlowModel& model, const NoiseTensor& x0, int count, double t, const NoiseTensor& eps,
                   Eigen::VectorXd* grad) {
    const FlowArch& arch = model.arch();
    const Eigen::MatrixXd x = to_matrix(x0);
    const Eigen::MatrixXd e = to_matrix(eps);
    const FlowModel::Cache cache = model.forward((1.0 - t) * x + t * e, t, count);
    const Eigen::MatrixXd diff = cache.out - (e - x);
    const auto elements = static_cast<double>(arch.image_size());
    if (grad) {
        *grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));
        model.backward(cache, (2.0 / elements) * diff, *grad);
    }
    return diff.squaredNorm() / elements;
}

GradCheckResult grad_check(const FlowModel& model, const NoiseTensor& x0, int count, double t, const NoiseTensor& eps,
                           const GradCheckOptions& options) {
    Eigen::VectorXd analytic;
    sample_loss(model, x0, count, t, eps, &analytic);

    std::size_t lo = 0;
    std::size_t hi = model.parameter_count();
    if (options.group) {
        const auto& info = model.groups()[static_cast<std::size_t>(*options.group)];
        lo = info.offset;
        hi = info.offset + static_cast<std::size_t>(info.rows) * static_cast<std::size_t>(info.cols);
    }
    GradCheckResult result;
    const std::size_t span_size = hi - lo;
    if (span_size <= static_cast<std::size_t>(options.subset)) {
        for (std::size_t i = lo; i < hi; ++i) result.indices.push_back(i);
    } else {
        std::vector<std::size_t> pool(span_size);
        for (std::size_t i = 0; i < span_size; ++i) pool[i] = lo + i;
        Rng rng(options.seed);
        for (int k = 0; k < options.subset; ++k) {  // partial Fisher-Yates
            const auto j = static_cast<std::size_t>(rng.uniform_int(k, static_cast<std::int64_t>(span_size) - 1));
            std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
            result.indices.push_back(pool[static_cast<std::size_t>(k)]);
        }
    }

    FlowModel probe = model;
    for (std::size_t idx : result.indices) {
        const auto i = static_cast<Eigen::Index>(idx);
        const double saved = probe.parameters()[i];
        probe.parameters()[i] = saved + options.h;
        const double plus = sample_loss(probe, x0, count, t, eps);
        probe.parameters()[i] = saved - options.h;
        const double minus = sample_loss(probe, x0, count, t, eps);
        probe.parameters()[i] = saved;
        const double numeric = (plus - minus) / (2.0 * options.h);
        const double a = analytic[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        result.max_relative_error = std::max(result.max_relative_error, rel);
    }
    return result;
}

DatasetConfig toy_dataset_config(int per_count, std::uint64_t seed, int canvas, int max_count) {
    DatasetConfig config;
    config.categories = {"disc"};
    config.count_min = 1;
    config.count_max = max_count;
    config.per_cell = per_count;
    config.canvas_w = canvas;
    config.canvas_h = canvas;
    config.style = GlyphStyle::disc;
    config.master_seed = seed;
    return config;
}

TrainSample to_train_sample(const RenderedRecord& rendered) {
    return {image_to_tensor(rendered.image), rendered.record.count, rendered.record.layout};
}

std::vector<TrainSample> build_toy_dataset(const DatasetConfig& config, int jobs) {
    std::vector<TrainSample> out(dataset_size(config));
    parallel_for(out.size(), jobs, [&](std::size_t i) { out[i] = to_train_sample(render_record(config, i)); });
    return out;
}

OracleParams toy_oracle_params() {
    OracleParams params;
    params.background_gray = kDefaultBackgroundGray;
    params.delta = 64;
    params.connectivity = 8;
    params.min_area = 4;
    return params;
}

std::vector<GeneratedCount> sample_and_count(const FlowModel& model, std::span<const std::uint64_t> noise_seeds,
                                             std::span<const int> counts, const SampleConfig& config,
                                             const OracleParams& oracle, int jobs, std::vector<NoiseTensor>* images) {
    const FlowArch& arch = model.arch();
    const std::size_t n = noise_seeds.size() * counts.size();
    std::vector<GeneratedCount> cells(n);
    if (images) images->assign(n, NoiseTensor{});
    parallel_for(n, jobs, [&](std::size_t i) {
        const std::uint64_t seed = noise_seeds[i / counts.size()];
        const int count = counts[i % counts.size()];
        SampleConfig cell_config = config;
        cell_config.layout_seed = derive_seed(seed, static_cast<std::uint64_t>(count));
        const NoiseTensor noise = sample_noise(arch.channels, arch.height, arch.width, seed);
        NoiseTensor image = euler_sample(model, noise, count, cell_config);
        cells[i] = {seed, count, count_components(tensor_to_image(image), oracle).count};
        if (images) (*images)[i] = std::move(image);
    });
    return cells;
}

NoiseProbeResult probe_noise(const FlowModel& model, std::span<const std::uint64_t> noise_seeds,
                             std::span<const int> counts, const SampleConfig& config, const OracleParams& oracle,
                             int jobs) {
    if (noise_seeds.empty() || counts.empty()) throw DegenerateInput("probe_noise: need seeds and counts");
    NoiseProbeResult result;
    result.cells = sample_and_count(model, noise_seeds, counts, config, oracle, jobs);
    double total = 0.0;
    std::size_t exact = 0;
    for (std::size_t s = 0; s < noise_seeds.size(); ++s) {
        std::vector<int> predicted;
        for (std::size_t c = 0; c < counts.size(); ++c) {
            const GeneratedCount& cell = result.cells[s * counts.size() + c];
            predicted.push_back(cell.predicted);
            exact += cell.predicted == cell.requested;
        }
        const ModePreference mode = mode_preference(predicted);
        result.modes.emplace_back(noise_seeds[s], mode);
        total += mode.concentration;
    }
    result.mean_concentration = total / static_cast<double>(noise_seeds.size());
    result.faithful_concentration = mode_preference(counts).concentration;
    result.exact_accuracy = static_cast<double>(exact) / static_cast<double>(result.cells.size());
    return result;
}

} // namespace numgen
