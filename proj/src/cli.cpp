#include "numgen/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "numgen/classifier.hpp"
#include "numgen/count_oracle.hpp"
#include "numgen/data_engine.hpp"
#include "numgen/error.hpp"
#include "numgen/layout_stats.hpp"
#include "numgen/metrics.hpp"
#include "numgen/noise_prior.hpp"
#include "numgen/parallel.hpp"
#include "numgen/rng.hpp"
#include "numgen/svg.hpp"
#include "numgen/toy_flow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace numgen {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kLossNote = "loss: velocity matching, mean |v(x_t, t, k) - (eps - x0)|^2";

// Bad flag values; reported with exit code 2 before anything is written.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
    static auto log = [] {
        auto l = std::make_shared<spdlog::logger>("numgen", std::make_shared<spdlog::sinks::stderr_sink_mt>());
        l->set_pattern("[%H:%M:%S.%e] [%l] %v");
        return l;
    }();
    return log;
}

struct Globals {
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string log_level = "info";
};

// --- small parsers -------------------------------------------------------

int parse_int(const std::string& s, const std::string& flag) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(flag + ": '" + s + "' is not an integer");
    }
}

double parse_double(const std::string& s, const std::string& flag) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(flag + ": '" + s + "' is not a number");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t\r") + 1);
        out.push_back(item);
    }
    return out;
}

// "a..b", "a,b,c" or a mix such as "1..3,7".
std::vector<int> parse_counts(const std::string& s, const std::string& flag) {
    std::vector<int> out;
    for (const std::string& part : split(s, ',')) {
        if (part.empty()) throw ConfigError(flag + ": empty item in '" + s + "'");
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_int(part, flag));
            continue;
        }
        const int lo = parse_int(part.substr(0, dots), flag);
        const int hi = parse_int(part.substr(dots + 2), flag);
        if (lo > hi) throw ConfigError(flag + ": empty range '" + part + "'");
        for (int k = lo; k <= hi; ++k) out.push_back(k);
    }
    if (out.empty()) throw ConfigError(flag + ": no counts given");
    return out;
}

std::pair<int, int> parse_range(const std::string& s, const std::string& flag) {
    const std::vector<int> counts = parse_counts(s, flag);
    for (std::size_t i = 1; i < counts.size(); ++i)
        if (counts[i] != counts[i - 1] + 1) throw ConfigError(flag + ": expected a contiguous range like 1..50");
    return {counts.front(), counts.back()};
}

std::vector<double> parse_doubles(const std::string& s, const std::string& flag) {
    std::vector<double> out;
    for (const std::string& part : split(s, ',')) out.push_back(parse_double(part, flag));
    if (out.empty()) throw ConfigError(flag + ": empty list");
    return out;
}

template <typename Fn>
auto parse_enum(const std::string& s, const std::string& flag, Fn fn) {
    try {
        return fn(s);
    } catch (const std::exception& e) {
        throw ConfigError(flag + ": " + e.what());
    }
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

// --- output helpers --------------------------------------------------------

// --out wins, then NUMGEN_OUT, then the subcommand default.
fs::path resolve_out(const CLI::Option* flag, const std::string& value) {
    if (flag->count() > 0) return value;
    if (const char* env = std::getenv("NUMGEN_OUT"); env && *env) return env;
    return value;
}

void write_json_file(const fs::path& path, const ordered_json& j) {
    write_text_file(path.string(), j.dump(2) + "\n");
}

void write_run_json(const fs::path& out, const std::string& command, const Globals& g, ordered_json options) {
    ordered_json run;
    run["tool"] = "numgen";
    run["version"] = kVersion;
    run["subcommand"] = command;
    run["master_seed"] = g.seed;
    run["jobs"] = g.jobs;
    run["log_level"] = g.log_level;
    run["options"] = std::move(options);
    write_json_file(out / "run.json", run);
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

ordered_json prior_json(const PriorConfig& p) {
    ordered_json j;
    j["method"] = std::string(to_string(p.method));
    j["gamma"] = p.gamma;
    j["fixed_seed"] = p.fixed_seed;
    j["kernel_w"] = p.w;
    j["alpha"] = p.alpha;
    return j;
}

// --- shared option groups ---------------------------------------------------

struct PriorFlags {
    std::string method = "none";
    double gamma = 0.1;
    std::uint64_t fixed_seed = 0;
    double w = 0.3;
    double alpha = 0.8;

    void add(CLI::App* app) {
        app->add_option("--prior", method, "none, scaled, fixed or gaussian")->capture_default_str();
        app->add_option("--gamma", gamma, "in-box scale of the scaled prior")->capture_default_str();
        app->add_option("--fixed-seed", fixed_seed, "seed of the canonical z* field")->capture_default_str();
        app->add_option("--kernel-w", w, "gaussian bump amplitude")->capture_default_str();
        app->add_option("--alpha", alpha, "gaussian sigma factor")->capture_default_str();
    }

    PriorConfig resolve() const {
        PriorConfig p;
        p.method = parse_enum(method, "--prior", prior_method_from_string);
        p.gamma = gamma;
        p.fixed_seed = fixed_seed;
        p.w = w;
        p.alpha = alpha;
        require(p.method != PriorMethod::uniform_scaled || gamma > 0.0, "--gamma must be > 0");
        require(p.method != PriorMethod::gaussian || alpha > 0.0, "--alpha must be > 0");
        return p;
    }
};

struct OracleFlags {
    int delta;
    int connectivity = 8;
    int min_area = 4;

    explicit OracleFlags(int default_delta) : delta(default_delta) {}

    void add(CLI::App* app) {
        app->add_option("--delta", delta, "foreground threshold on |pixel - background|")->capture_default_str();
        app->add_option("--connectivity", connectivity, "4 or 8")->capture_default_str();
        app->add_option("--min-area", min_area, "smallest component kept")->capture_default_str();
    }

    OracleParams resolve() const {
        require(delta >= 0 && delta <= 255, "--delta must lie in 0..255");
        require(connectivity == 4 || connectivity == 8, "--connectivity must be 4 or 8");
        require(min_area >= 1, "--min-area must be >= 1");
        OracleParams p;
        p.delta = static_cast<std::uint8_t>(delta);
        p.connectivity = connectivity;
        p.min_area = min_area;
        return p;
    }

    ordered_json to_json() const {
        return ordered_json{{"delta", delta}, {"connectivity", connectivity}, {"min_area", min_area}};
    }
};

struct SampleFlags {
    int ode_steps = 50;
    double cfg = 3.5;
    PriorFlags prior;

    void add(CLI::App* app) {
        app->add_option("--ode-steps", ode_steps, "Euler steps")->capture_default_str();
        app->add_option("--cfg", cfg, "classifier-free guidance scale")->capture_default_str();
        prior.add(app);
    }

    SampleConfig resolve() const {
        require(ode_steps >= 1, "--ode-steps must be >= 1");
        require(cfg >= 0.0, "--cfg must be >= 0");
        SampleConfig c;
        c.ode_steps = ode_steps;
        c.cfg_scale = cfg;
        c.prior = prior.resolve();
        return c;
    }
};

// Loads a manifest's images in the model's value range.
std::vector<TrainSample> load_samples(const fs::path& manifest, const std::vector<DatasetRecord>& records) {
    const fs::path base = manifest.parent_path();
    std::vector<TrainSample> out;
    out.reserve(records.size());
    for (const DatasetRecord& r : records) {
        const Image image = read_png_rgb(base / r.image_path);
        out.push_back({image_to_tensor(image), r.count, r.layout});
    }
    return out;
}

std::vector<std::uint64_t> noise_seeds(std::uint64_t master, int n) {
    std::vector<std::uint64_t> out;
    for (int i = 0; i < n; ++i) out.push_back(derive_seed(master, static_cast<std::uint64_t>(i)));
    return out;
}

double median(std::vector<int> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void write_pairs_csv(const fs::path& path, const std::vector<std::size_t>& ids, const std::vector<CountPair>& pairs) {
    std::string text = "record_id,requested,predicted\n";
    for (std::size_t i = 0; i < pairs.size(); ++i)
        text += fmt::format("{},{},{}\n", ids[i], pairs[i].requested, pairs[i].predicted);
    write_text_file(path.string(), text);
}

// --- gen-data ---------------------------------------------------------------

struct GenData {
    std::string counts = "1..50";
    int per_cell = 2;
    int categories = 10;
    std::vector<std::string> category_names;
    std::string layout = "random";
    int canvas = 512;
    double fill = kDefaultFillFraction;
    int max_attempts = kDefaultMaxAttempts;
    bool size_jitter = false;
    int grid_rows = 7;
    int grid_cols = 7;
    int background = kDefaultBackgroundGray;
    std::string count_style = "numeral";
    std::string style;
    std::string layer_dir;
    bool layout_sidecar = false;
    int placement_retries = 8;
    std::string out = "data";
    CLI::Option* out_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--counts", counts, "count range, e.g. 1..50")->capture_default_str();
        app->add_option("--per-cell", per_cell, "images per (category, count)")->capture_default_str();
        app->add_option("--categories", categories, "number of built-in categories")->capture_default_str();
        app->add_option("--category-names", category_names, "explicit category names");
        app->add_option("--layout", layout, "random or grid")->capture_default_str();
        app->add_option("--canvas", canvas, "square canvas side in pixels")->capture_default_str();
        app->add_option("--fill", fill, "fill fraction for object sizing")->capture_default_str();
        app->add_option("--max-attempts", max_attempts, "placement draws per object")->capture_default_str();
        app->add_flag("--size-jitter", size_jitter, "per-object size jitter");
        app->add_option("--grid-rows", grid_rows)->capture_default_str();
        app->add_option("--grid-cols", grid_cols)->capture_default_str();
        app->add_option("--background", background, "background gray level")->capture_default_str();
        app->add_option("--count-style", count_style, "numeral or word")->capture_default_str();
        app->add_option("--style", style, "force one glyph style: disc, ring, cross, polygon");
        app->add_option("--layer-dir", layer_dir, "directory of <category>.png RGBA layers");
        app->add_flag("--layout-sidecar", layout_sidecar, "write layouts/<id>.json");
        app->add_option("--placement-retries", placement_retries)->capture_default_str();
        out_opt = app->add_option("--out", out, "output directory")->capture_default_str();
    }

    int run(const Globals& g) const {
        DatasetConfig c;
        std::tie(c.count_min, c.count_max) = parse_range(counts, "--counts");
        require(c.count_min >= 1, "--counts must start at 1 or more");
        require(per_cell >= 1, "--per-cell must be >= 1");
        if (!category_names.empty()) {
            c.categories = category_names;
        } else {
            require(categories >= 1, "--categories must be >= 1");
            c.categories = default_categories(static_cast<std::size_t>(categories));
        }
        c.per_cell = per_cell;
        c.layout_type = parse_enum(layout, "--layout", layout_type_from_string);
        require(canvas >= kMinObjectSide, "--canvas is too small");
        c.canvas_w = c.canvas_h = canvas;
        require(fill > 0.0 && fill <= 1.0, "--fill must lie in (0, 1]");
        c.fill_fraction = fill;
        require(max_attempts >= 1, "--max-attempts must be >= 1");
        c.max_attempts = max_attempts;
        c.size_jitter = size_jitter;
        require(grid_rows >= 1 && grid_cols >= 1, "--grid-rows/--grid-cols must be >= 1");
        c.grid_rows = grid_rows;
        c.grid_cols = grid_cols;
        require(c.layout_type != LayoutType::grid || c.count_max <= grid_rows * grid_cols,
                "--counts exceeds the grid capacity");
        require(background >= 0 && background <= 255, "--background must lie in 0..255");
        c.background_gray = static_cast<std::uint8_t>(background);
        require(count_style == "numeral" || count_style == "word", "--count-style must be numeral or word");
        c.count_style = count_style == "word" ? CountStyle::word : CountStyle::numeral;
        if (!style.empty()) c.style = parse_enum(style, "--style", glyph_style_from_string);
        if (!layer_dir.empty()) {
            require(fs::is_directory(layer_dir), "--layer-dir: not a directory: " + layer_dir);
            c.layer_dir = layer_dir;
        }
        require(placement_retries >= 0, "--placement-retries must be >= 0");
        c.placement_retries = placement_retries;
        c.layout_sidecar = layout_sidecar;
        c.master_seed = g.seed;
        c.jobs = g.jobs;
        c.output_dir = resolve_out(out_opt, out);

        ordered_json opts;
        opts["count_min"] = c.count_min;
        opts["count_max"] = c.count_max;
        opts["per_cell"] = c.per_cell;
        opts["categories"] = c.categories;
        opts["layout"] = std::string(to_string(c.layout_type));
        opts["canvas"] = canvas;
        opts["fill"] = c.fill_fraction;
        opts["max_attempts"] = c.max_attempts;
        opts["size_jitter"] = c.size_jitter;
        opts["grid_rows"] = c.grid_rows;
        opts["grid_cols"] = c.grid_cols;
        opts["background"] = background;
        opts["count_style"] = count_style;
        opts["style"] = c.style ? std::string(to_string(*c.style)) : "per-category";
        opts["layer_dir"] = layer_dir;
        opts["layout_sidecar"] = c.layout_sidecar;
        opts["placement_retries"] = c.placement_retries;
        opts["out"] = c.output_dir.string();

        logger()->info("gen-data: {} records -> {}", dataset_size(c), c.output_dir.string());
        fs::create_directories(c.output_dir);
        const auto records = generate_dataset(c);
        write_run_json(c.output_dir, "gen-data", g, opts);
        logger()->info("gen-data: wrote {} images", records.size());
        return 0;
    }
};

// --- gen-noise --------------------------------------------------------------

struct GenNoise {
    int channels = 1;
    int height = 32;
    int width = 32;
    PriorFlags prior;
    std::string layout_file;
    int count = 0;
    int canvas = 32;
    double fill = kDefaultFillFraction;
    std::string out = "noise";
    CLI::Option* out_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--channels", channels)->capture_default_str();
        app->add_option("--height", height)->capture_default_str();
        app->add_option("--width", width)->capture_default_str();
        prior.add(app);
        app->add_option("--layout", layout_file, "layout JSON used for the prior")->check(CLI::ExistingFile);
        app->add_option("--count", count, "plan a random layout with this many boxes")->capture_default_str();
        app->add_option("--canvas", canvas, "canvas side of the planned layout")->capture_default_str();
        app->add_option("--fill", fill)->capture_default_str();
        out_opt = app->add_option("--out", out, "output directory")->capture_default_str();
    }

    int run(const Globals& g) const {
        require(channels >= 1 && height >= 1 && width >= 1, "--channels/--height/--width must be >= 1");
        const PriorConfig p = prior.resolve();
        std::optional<LayoutSpec> layout;
        if (!layout_file.empty()) {
            std::ifstream in(layout_file);
            try {
                layout = json::parse(in).get<LayoutSpec>();
            } catch (const std::exception& e) {
                throw ConfigError("--layout: " + std::string(e.what()));
            }
        } else if (count > 0) {
            require(canvas >= kMinObjectSide, "--canvas is too small");
        }
        require(p.method == PriorMethod::none || layout || count > 0, "--prior needs --layout or --count");
        const fs::path dir = resolve_out(out_opt, out);

        if (!layout && count > 0) {
            RandomLayoutOptions lo;
            lo.fill_fraction = fill;
            layout = plan_random_layout(count, canvas, canvas, derive_seed(g.seed, 1), lo);
        }
        const NoiseTensor base = sample_noise(channels, height, width, derive_seed(g.seed, 0));
        NoiseTensor noise = base;
        if (layout) noise = apply_prior(base, map_boxes_to_latent(*layout, height, width), p);

        fs::create_directories(dir);
        write_noise(dir / "noise.ntf", noise);
        if (layout) write_text_file((dir / "layout.json").string(), json(*layout).dump(2) + "\n");

        ordered_json opts;
        opts["channels"] = channels;
        opts["height"] = height;
        opts["width"] = width;
        opts["prior"] = prior_json(p);
        opts["layout"] = layout_file;
        opts["count"] = count;
        opts["canvas"] = canvas;
        opts["fill"] = fill;
        opts["out"] = dir.string();
        write_run_json(dir, "gen-noise", g, opts);
        logger()->info("gen-noise: {}x{}x{} -> {}", channels, height, width, (dir / "noise.ntf").string());
        return 0;
    }
};

// --- train ------------------------------------------------------------------

struct Train {
    std::string manifest;
    int steps = 2000;
    int batch_size = 8;
    double lr = 0.05;
    std::string timesteps = "uniform";
    double logit_mean = 0.0;
    double logit_std = 1.0;
    bool shared_noise = false;
    double cond_dropout = 0.1;
    double grad_clip = 1.0;
    std::string optimizer = "sgd";
    double prior_prob = 0.0;
    std::string train_priors = "gaussian,scaled";
    PriorFlags prior_params;
    int hidden = 32;
    int time_freqs = 8;
    int max_count = 8;
    std::string out = "model";
    CLI::Option* out_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--manifest", manifest, "training manifest.jsonl")->required()->check(CLI::ExistingFile);
        app->add_option("--steps", steps)->capture_default_str();
        app->add_option("--batch-size", batch_size)->capture_default_str();
        app->add_option("--lr", lr, "SGD learning rate")->capture_default_str();
        app->add_option("--timesteps", timesteps, "uniform or logit-normal")->capture_default_str();
        app->add_option("--logit-mean", logit_mean)->capture_default_str();
        app->add_option("--logit-std", logit_std)->capture_default_str();
        app->add_flag("--shared-noise", shared_noise, "one noise sample per batch");
        app->add_option("--cond-dropout", cond_dropout, "probability of the unconditional token")->capture_default_str();
        app->add_option("--grad-clip", grad_clip, "global gradient-norm clip, 0 disables")->capture_default_str();
        app->add_option("--optimizer", optimizer, "sgd or adam")->capture_default_str();
        app->add_option("--prior-prob", prior_prob, "fraction of samples trained on prior-shaped noise")
            ->capture_default_str();
        app->add_option("--train-priors", train_priors, "priors mixed in during training")->capture_default_str();
        prior_params.add(app);
        app->add_option("--hidden", hidden, "hidden channels")->capture_default_str();
        app->add_option("--time-freqs", time_freqs)->capture_default_str();
        app->add_option("--max-count", max_count, "largest count token")->capture_default_str();
        out_opt = app->add_option("--out", out, "checkpoint directory")->capture_default_str();
    }

    int run(const Globals& g) const {
        TrainConfig c;
        c.batch_size = batch_size;
        c.steps = steps;
        c.learning_rate = lr;
        c.timestep_strategy = parse_enum(timesteps, "--timesteps", timestep_strategy_from_string);
        c.logit_mean = logit_mean;
        c.logit_std = logit_std;
        c.shared_noise_batching = shared_noise;
        c.cond_dropout_prob = cond_dropout;
        c.grad_clip = grad_clip;
        c.optimizer = parse_enum(optimizer, "--optimizer", optimizer_from_string);
        c.prior_probability = prior_prob;
        c.seed = derive_seed(g.seed, 1);
        if (prior_prob > 0.0) {
            for (const std::string& name : split(train_priors, ',')) {
                PriorFlags f = prior_params;
                f.method = name;
                const PriorConfig p = f.resolve();
                require(p.method != PriorMethod::none, "--train-priors: 'none' is implied by --prior-prob < 1");
                c.priors.push_back(p);
            }
        }
        try {
            validate(c);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        require(hidden >= 1 && time_freqs >= 1 && max_count >= 1, "--hidden/--time-freqs/--max-count must be >= 1");

        std::vector<DatasetRecord> records;
        try {
            records = read_manifest(manifest);
        } catch (const std::exception& e) {
            throw ConfigError("--manifest: " + std::string(e.what()));
        }
        require(!records.empty(), "--manifest: no records");
        for (const auto& r : records)
            require(r.count >= 1 && r.count <= max_count,
                    fmt::format("--max-count: record {} has count {}", r.id, r.count));
        const fs::path dir = resolve_out(out_opt, out);

        const std::vector<TrainSample> data = load_samples(manifest, records);
        FlowArch arch;
        arch.channels = 1;
        arch.height = data.front().image.h;
        arch.width = data.front().image.w;
        arch.hidden = hidden;
        arch.time_freqs = time_freqs;
        arch.max_count = max_count;
        for (const auto& s : data)
            if (s.image.h != arch.height || s.image.w != arch.width)
                throw ShapeError("train: all images must share one size");

        FlowModel model(arch, derive_seed(g.seed, 0));
        logger()->info("train: {} images {}x{}, {} parameters, {} steps", data.size(), arch.width, arch.height,
                       model.parameter_count(), c.steps);
        TrainLog log;
        OptimizerState state;
        std::vector<TrainSample> batch;
        for (int step = 0; step < c.steps; ++step) {
            batch.clear();
            for (std::size_t i : batch_indices(data.size(), c, static_cast<std::uint64_t>(step))) batch.push_back(data[i]);
            log.losses.push_back(train_step(model, batch, c, static_cast<std::uint64_t>(step), nullptr, &state));
            if ((step + 1) % 100 == 0 || step + 1 == c.steps)
                logger()->info("step {:>6}  loss {:.5f}  (mean of last 100 {:.5f})", step + 1, log.losses.back(),
                               log.tail_mean());
        }

        fs::create_directories(dir);
        model.save(dir);
        std::string losses = "step,loss\n";
        for (std::size_t i = 0; i < log.losses.size(); ++i) losses += fmt::format("{},{}\n", i, fmt_double(log.losses[i]));
        write_text_file((dir / "losses.csv").string(), losses);

        ordered_json summary;
        summary["steps"] = c.steps;
        summary["initial_loss"] = log.initial_loss();
        summary["final_mean_loss_100"] = log.tail_mean();
        summary["ratio"] = log.initial_loss() > 0 ? log.tail_mean() / log.initial_loss() : 0.0;
        write_json_file(dir / "summary.json", summary);

        ordered_json opts;
        opts["manifest"] = manifest;
        opts["steps"] = c.steps;
        opts["batch_size"] = c.batch_size;
        opts["lr"] = c.learning_rate;
        opts["timesteps"] = std::string(to_string(c.timestep_strategy));
        opts["logit_mean"] = c.logit_mean;
        opts["logit_std"] = c.logit_std;
        opts["shared_noise"] = c.shared_noise_batching;
        opts["cond_dropout"] = c.cond_dropout_prob;
        opts["grad_clip"] = c.grad_clip;
        opts["optimizer"] = std::string(to_string(c.optimizer));
        opts["prior_prob"] = c.prior_probability;
        ordered_json priors = ordered_json::array();
        for (const auto& p : c.priors) priors.push_back(prior_json(p));
        opts["train_priors"] = priors;
        opts["hidden"] = hidden;
        opts["time_freqs"] = time_freqs;
        opts["max_count"] = max_count;
        opts["out"] = dir.string();
        write_run_json(dir, "train", g, opts);
        return 0;
    }
};

// --- sample -----------------------------------------------------------------

struct Sample {
    std::string model_dir;
    std::string counts = "1..8";
    int seeds = 4;
    SampleFlags flags;
    std::string out = "samples";
    CLI::Option* out_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--model", model_dir, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
        app->add_option("--counts", counts, "requested counts")->capture_default_str();
        app->add_option("--seeds", seeds, "number of noise seeds")->capture_default_str();
        flags.add(app);
        out_opt = app->add_option("--out", out, "output directory")->capture_default_str();
    }

    int run(const Globals& g) const {
        const std::vector<int> ks = parse_counts(counts, "--counts");
        require(seeds >= 1, "--seeds must be >= 1");
        const SampleConfig base = flags.resolve();
        const fs::path dir = resolve_out(out_opt, out);
        const FlowModel model = FlowModel::load(model_dir);
        const FlowArch& arch = model.arch();
        for (int k : ks) require(k >= 1 && k <= arch.max_count, fmt::format("--counts: {} outside 1..{}", k, arch.max_count));

        const auto seed_list = noise_seeds(g.seed, seeds);
        const std::size_t n = seed_list.size() * ks.size();
        std::vector<DatasetRecord> records(n);
        std::vector<Image> images(n);
        parallel_for(n, g.jobs, [&](std::size_t i) {
            const std::uint64_t seed = seed_list[i / ks.size()];
            const int k = ks[i % ks.size()];
            SampleConfig c = base;
            c.layout_seed = derive_seed(seed, static_cast<std::uint64_t>(k));
            const NoiseTensor noise = sample_noise(arch.channels, arch.height, arch.width, seed);
            images[i] = tensor_to_image(euler_sample(model, noise, k, c));

            DatasetRecord& r = records[i];
            r.id = i;
            r.image_path = fmt::format("images/{:06d}.png", i);
            r.prompt = render_prompt(0, k, "disc");
            r.count = k;
            r.category = "disc";
            r.image_seed = seed;
            if (c.prior.method != PriorMethod::none) {
                r.layout = prior_layout(arch, k, c);
            } else {
                r.layout.canvas_w = arch.width;
                r.layout.canvas_h = arch.height;
                r.layout.seed = c.layout_seed;
            }
        });

        fs::create_directories(dir / "images");
        for (std::size_t i = 0; i < n; ++i) write_png(dir / records[i].image_path, images[i]);
        write_manifest(dir / "manifest.jsonl", records);

        ordered_json opts;
        opts["model"] = model_dir;
        opts["counts"] = ks;
        opts["seeds"] = seeds;
        opts["ode_steps"] = base.ode_steps;
        opts["cfg"] = base.cfg_scale;
        opts["prior"] = prior_json(base.prior);
        opts["out"] = dir.string();
        write_run_json(dir, "sample", g, opts);
        logger()->info("sample: {} images -> {}", n, dir.string());
        return 0;
    }
};

// --- classify ---------------------------------------------------------------

struct Classify {
    std::string model_dir;
    std::string manifest;
    std::string candidates;
    int coarse = 8;
    int top_m = 4;
    int refine = 32;
    bool independent_pairs = false;
    int limit = 0;
    std::string out = "classify";
    CLI::Option* out_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--model", model_dir, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
        app->add_option("--manifest", manifest, "images to classify")->required()->check(CLI::ExistingFile);
        app->add_option("--candidates", candidates, "candidate counts (default 1..max_count)");
        app->add_option("--coarse", coarse, "timesteps per candidate in the coarse stage")->capture_default_str();
        app->add_option("--top-m", top_m, "candidates kept for refinement")->capture_default_str();
        app->add_option("--refine", refine, "timesteps per candidate in the refinement stage")->capture_default_str();
        app->add_flag("--independent-pairs", independent_pairs, "draw separate (t, eps) pairs per candidate");
        app->add_option("--limit", limit, "classify only the first N records, 0 = all")->capture_default_str();
        out_opt = app->add_option("--out", out, "output directory")->capture_default_str();
    }

    int run(const Globals& g) const {
        require(limit >= 0, "--limit must be >= 0");
        std::vector<DatasetRecord> records;
        try {
            records = read_manifest(manifest);
        } catch (const std::exception& e) {
            throw ConfigError("--manifest: " + std::string(e.what()));
        }
        if (limit > 0 && records.size() > static_cast<std::size_t>(limit)) records.resize(static_cast<std::size_t>(limit));
        require(!records.empty(), "--manifest: no records");
        const fs::path dir = resolve_out(out_opt, out);
        const FlowModel model = FlowModel::load(model_dir);

        ClassifierConfig c;
        if (!candidates.empty()) c.candidates = parse_counts(candidates, "--candidates");
        c.coarse_timesteps = coarse;
        c.top_m = top_m;
        c.refine_timesteps = refine;
        c.shared_pairs = !independent_pairs;
        c.jobs = g.jobs;
        std::vector<int> resolved;
        try {
            resolved = resolve_candidates(c, model.arch());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("--candidates/--top-m/--coarse/--refine: ") + e.what());
        }

        const std::vector<TrainSample> data = load_samples(manifest, records);
        std::string pred = fmt::format("# {}\nrecord_id,true_count,predicted,coarse_rank,final_rank,in_top_m", kLossNote);
        for (int k : resolved) pred += fmt::format(",loss_{}", k);
        pred += "\n";
        std::vector<std::size_t> ids;
        std::vector<CountPair> pairs;
        std::vector<int> coarse_ranks, final_ranks;
        std::size_t correct = 0, recalled = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            ClassifierConfig ci = c;
            ci.seed = derive_seed(g.seed, records[i].id);
            const ClassifierResult r = classify_coarse_to_fine(model, data[i].image, ci);
            const int truth = records[i].count;
            correct += r.predicted == truth;
            recalled += r.in_top_set(truth);
            coarse_ranks.push_back(r.coarse_rank(truth));
            final_ranks.push_back(r.final_rank(truth));
            ids.push_back(records[i].id);
            pairs.push_back({truth, r.predicted});
            pred += fmt::format("{},{},{},{},{},{}", records[i].id, truth, r.predicted, r.coarse_rank(truth),
                                r.final_rank(truth), r.in_top_set(truth) ? 1 : 0);
            // coarse losses for every candidate, refined loss where available
            for (const CandidateLoss& cl : r.coarse) {
                double loss = cl.loss;
                for (const CandidateLoss& rl : r.refined)
                    if (rl.count == cl.count) loss = rl.loss;
                pred += "," + fmt_double(loss);
            }
            pred += "\n";
        }

        fs::create_directories(dir);
        write_text_file((dir / "predictions.csv").string(), pred);
        write_pairs_csv(dir / "pairs.csv", ids, pairs);
        const auto n = static_cast<double>(data.size());
        ordered_json summary;
        summary["note"] = kLossNote;
        summary["n"] = data.size();
        summary["top1_accuracy"] = static_cast<double>(correct) / n;
        summary["chance"] = 1.0 / static_cast<double>(resolved.size());
        summary["top_m_recall"] = static_cast<double>(recalled) / n;
        summary["median_rank_coarse"] = median(coarse_ranks);
        summary["median_rank_final"] = median(final_ranks);
        write_json_file(dir / "summary.json", summary);

        ordered_json opts;
        opts["model"] = model_dir;
        opts["manifest"] = manifest;
        opts["candidates"] = resolved;
        opts["coarse"] = coarse;
        opts["top_m"] = top_m;
        opts["refine"] = refine;
        opts["shared_pairs"] = c.shared_pairs;
        opts["limit"] = limit;
        opts["out"] = dir.string();
        write_run_json(dir, "classify", g, opts);
        logger()->info("classify: top-1 {:.3f}, top-{} recall {:.3f}", static_cast<double>(correct) / n, top_m,
                       static_cast<double>(recalled) / n);
        return 0;
    }
};

// --- eval -------------------------------------------------------------------

struct Eval {
    std::string manifest;
    OracleFlags oracle{16};
    std::string out = "eval";
    CLI::Option* out_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--manifest", manifest, "manifest.jsonl to count")->required()->check(CLI::ExistingFile);
        oracle.add(app);
        out_opt = app->add_option("--out", out, "output directory")->capture_default_str();
    }

    int run(const Globals& g) const {
        const OracleParams params = oracle.resolve();
        const fs::path dir = resolve_out(out_opt, out);
        const EvalResult result = evaluate_set(manifest, params, g.jobs);

        fs::create_directories(dir);
        write_pairs_csv(dir / "pairs.csv", result.record_ids, result.pairs);
        std::string comps;
        for (std::size_t i = 0; i < result.reports.size(); ++i) {
            json j = result.reports[i];
            j["record_id"] = result.record_ids[i];
            comps += j.dump() + "\n";
        }
        write_text_file((dir / "components.jsonl").string(), comps);
        std::string errors = "record_id,message\n";
        for (const auto& e : result.errors) errors += fmt::format("{},\"{}\"\n", e.record_id, e.message);
        write_text_file((dir / "errors.csv").string(), errors);

        ordered_json summary;
        summary["n"] = result.pairs.size();
        summary["errors"] = result.errors.size();
        if (!result.pairs.empty()) {
            summary["exact_accuracy"] = exact_accuracy(result.pairs);
            summary["mae"] = mean_absolute_error(result.pairs);
            summary["tolerance_accuracy"] = tolerance_accuracy(result.pairs);
        }
        write_json_file(dir / "summary.json", summary);

        ordered_json opts;
        opts["manifest"] = manifest;
        opts["oracle"] = oracle.to_json();
        opts["out"] = dir.string();
        write_run_json(dir, "eval", g, opts);
        for (const auto& e : result.errors) logger()->warn("record {}: {}", e.record_id, e.message);
        logger()->info("eval: {} counted, {} errors", result.pairs.size(), result.errors.size());
        return 0;
    }
};

// --- analyze ----------------------------------------------------------------

struct Analyze {
    std::string manifest;
    std::string components;
    std::string taus = "0.05,0.10,0.15,0.20";
    int restarts = 1;
    int max_iter = 100;
    bool svg = false;
    std::string out = "analysis";
    CLI::Option* out_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--manifest", manifest, "manifest.jsonl")->required()->check(CLI::ExistingFile);
        app->add_option("--components", components, "components.jsonl from eval")->required()->check(CLI::ExistingFile);
        app->add_option("--taus", taus, "stability thresholds")->capture_default_str();
        app->add_option("--restarts", restarts, "k-means restarts")->capture_default_str();
        app->add_option("--max-iter", max_iter)->capture_default_str();
        app->add_flag("--svg", svg, "scatter plot of object centers per count");
        out_opt = app->add_option("--out", out, "output directory")->capture_default_str();
    }

    int run(const Globals& g) const {
        const std::vector<double> tau_list = parse_doubles(taus, "--taus");
        for (double t : tau_list) require(t > 0.0, "--taus must be > 0");
        require(restarts >= 1 && max_iter >= 1, "--restarts/--max-iter must be >= 1");
        const fs::path dir = resolve_out(out_opt, out);

        std::map<std::size_t, DatasetRecord> by_id;
        for (auto& r : read_manifest(manifest)) by_id.emplace(r.id, std::move(r));

        std::map<int, std::vector<Point2>> points_by_n;
        std::map<std::uint64_t, std::vector<int>> counts_by_seed;
        std::ifstream in(components);
        std::string line;
        std::size_t missing = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            const auto id = j.at("record_id").get<std::size_t>();
            const auto it = by_id.find(id);
            if (it == by_id.end()) {
                ++missing;
                continue;
            }
            const ComponentReport report = j.get<ComponentReport>();
            const LayoutSpec& layout = it->second.layout;
            counts_by_seed[it->second.image_seed].push_back(report.count);
            if (report.count < 1) continue;
            for (const Component& c : report.components)
                points_by_n[report.count].push_back({(c.box.x + c.box.w / 2.0) / layout.canvas_w,
                                                     (c.box.y + c.box.h / 2.0) / layout.canvas_h});
        }
        if (missing) logger()->warn("analyze: {} component rows have no manifest record", missing);

        std::map<int, std::vector<Point2>> centers_by_n;
        ordered_json groups = ordered_json::array();
        for (const auto& [n, pts] : points_by_n) {
            const ClusterResult cr = kmeans(pts, n, derive_seed(g.seed, static_cast<std::uint64_t>(n)), max_iter, 1e-9,
                                            restarts);
            centers_by_n[n] = cr.centers;
            ordered_json gj;
            gj["n"] = n;
            gj["points"] = pts.size();
            gj["inertia"] = cr.inertia;
            gj["iterations"] = cr.iterations;
            ordered_json centers = ordered_json::array();
            for (const auto& c : cr.centers) centers.push_back({c.x, c.y});
            gj["centers"] = centers;
            groups.push_back(gj);
        }
        const EvolutionTrace trace = evolution_trace(centers_by_n, tau_list.front());
        for (int n : trace.skipped) logger()->warn("analyze: no group for n = {}, pair ({}, {}) skipped", n + 1, n, n + 1);

        fs::create_directories(dir);
        write_json_file(dir / "clusters.json", ordered_json{{"groups", groups}});
        write_text_file((dir / "stability.csv").string(), stability_table_csv(centers_by_n, tau_list));
        std::string modes = "noise_seed,images,mode,concentration\n";
        for (const auto& [seed, counts] : counts_by_seed) {
            const ModePreference m = mode_preference(counts);
            modes += fmt::format("{},{},{},{}\n", seed, counts.size(), m.mode, fmt_double(m.concentration));
        }
        write_text_file((dir / "modes.csv").string(), modes);
        if (svg) {
            for (const auto& [n, pts] : points_by_n) {
                std::vector<ScatterPoint> sp;
                for (const auto& p : pts) sp.push_back({p.x, 1.0 - p.y});
                ChartOptions o;
                o.title = fmt::format("object centers, n = {}", n);
                o.x_label = "x";
                o.y_label = "y";
                write_text_file((dir / fmt::format("centers_n{:02d}.svg", n)).string(), scatter_svg(sp, o));
            }
        }

        ordered_json opts;
        opts["manifest"] = manifest;
        opts["components"] = components;
        opts["taus"] = tau_list;
        opts["restarts"] = restarts;
        opts["max_iter"] = max_iter;
        opts["svg"] = svg;
        opts["out"] = dir.string();
        write_run_json(dir, "analyze", g, opts);
        logger()->info("analyze: {} count groups, {} noise seeds", centers_by_n.size(), counts_by_seed.size());
        return 0;
    }
};

// --- probe-noise ------------------------------------------------------------

struct ProbeNoise {
    std::string model_dir;
    int seeds = 50;
    std::string counts = "1..8";
    SampleFlags flags;
    OracleFlags oracle{toy_oracle_params().delta};
    std::string compare_priors;
    std::string out = "probe";
    CLI::Option* out_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--model", model_dir, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
        app->add_option("--seeds", seeds, "number of noise seeds")->capture_default_str();
        app->add_option("--counts", counts, "requested counts")->capture_default_str();
        flags.add(app);
        oracle.add(app);
        app->add_option("--compare-priors", compare_priors, "also sample with these priors, e.g. gaussian,scaled");
        out_opt = app->add_option("--out", out, "output directory")->capture_default_str();
    }

    int run(const Globals& g) const {
        const std::vector<int> ks = parse_counts(counts, "--counts");
        require(seeds >= 1, "--seeds must be >= 1");
        const SampleConfig base = flags.resolve();
        const OracleParams params = oracle.resolve();
        std::vector<PriorConfig> compare;
        if (!compare_priors.empty()) {
            for (const std::string& name : split(compare_priors, ',')) {
                PriorFlags f = flags.prior;
                f.method = name;
                compare.push_back(f.resolve());
            }
        }
        const fs::path dir = resolve_out(out_opt, out);
        const FlowModel model = FlowModel::load(model_dir);
        for (int k : ks)
            require(k >= 1 && k <= model.arch().max_count, fmt::format("--counts: {} out of model range", k));

        const auto seed_list = noise_seeds(g.seed, seeds);
        const NoiseProbeResult probe = probe_noise(model, seed_list, ks, base, params, g.jobs);

        fs::create_directories(dir);
        std::string cells = "noise_seed,requested,predicted\n";
        for (const auto& c : probe.cells) cells += fmt::format("{},{},{}\n", c.noise_seed, c.requested, c.predicted);
        write_text_file((dir / "cells.csv").string(), cells);

        std::string hist = "noise_seed,predicted,n\n";
        for (std::size_t s = 0; s < seed_list.size(); ++s) {
            std::map<int, int> h;
            for (std::size_t c = 0; c < ks.size(); ++c) ++h[probe.cells[s * ks.size() + c].predicted];
            for (const auto& [value, n] : h) hist += fmt::format("{},{},{}\n", seed_list[s], value, n);
        }
        write_text_file((dir / "histograms.csv").string(), hist);

        std::string modes = "noise_seed,mode,concentration\n";
        for (const auto& [seed, m] : probe.modes) modes += fmt::format("{},{},{}\n", seed, m.mode, fmt_double(m.concentration));
        write_text_file((dir / "modes.csv").string(), modes);

        ordered_json summary;
        summary["seeds"] = seeds;
        summary["counts"] = ks;
        summary["mean_concentration"] = probe.mean_concentration;
        summary["faithful_concentration"] = probe.faithful_concentration;
        summary["exact_accuracy"] = probe.exact_accuracy;
        // large-model figure, shown for comparison only
        summary["reference_concentration"] = 0.5;

        if (!compare.empty()) {
            std::string table = "prior,n,exact_accuracy,delta_vs_none\n";
            const double none_acc = probe.exact_accuracy;
            table += fmt::format("none,{},{},0\n", probe.cells.size(), fmt_double(none_acc));
            ordered_json cj = ordered_json::array();
            for (const PriorConfig& p : compare) {
                SampleConfig c = base;
                c.prior = p;
                const auto cellsp = sample_and_count(model, seed_list, ks, c, params, g.jobs);
                std::vector<CountPair> pairs;
                for (const auto& cell : cellsp) pairs.push_back({cell.requested, cell.predicted});
                const double acc = exact_accuracy(pairs);
                table += fmt::format("{},{},{},{}\n", to_string(p.method), pairs.size(), fmt_double(acc),
                                     fmt_double(acc - none_acc));
                cj.push_back({{"prior", std::string(to_string(p.method))}, {"exact_accuracy", acc},
                              {"delta_vs_none", acc - none_acc}});
                logger()->info("prior {}: exact accuracy {:.3f} (none {:.3f}, delta {:+.3f})", to_string(p.method), acc,
                               none_acc, acc - none_acc);
            }
            write_text_file((dir / "prior_comparison.csv").string(), table);
            summary["prior_comparison"] = cj;
        }
        write_json_file(dir / "summary.json", summary);

        ordered_json opts;
        opts["model"] = model_dir;
        opts["seeds"] = seeds;
        opts["counts"] = ks;
        opts["ode_steps"] = base.ode_steps;
        opts["cfg"] = base.cfg_scale;
        opts["prior"] = prior_json(base.prior);
        opts["oracle"] = oracle.to_json();
        ordered_json cp = ordered_json::array();
        for (const auto& p : compare) cp.push_back(prior_json(p));
        opts["compare_priors"] = cp;
        opts["out"] = dir.string();
        write_run_json(dir, "probe-noise", g, opts);

        fmt::print("mean mode concentration    {:.3f}\n", probe.mean_concentration);
        fmt::print("count-faithful expectation {:.3f}\n", probe.faithful_concentration);
        fmt::print("large-model reference      {:.3f}\n", 0.5);
        fmt::print("exact accuracy             {:.3f}\n", probe.exact_accuracy);
        return 0;
    }
};

// --- report -----------------------------------------------------------------

struct Report {
    std::string pairs_file;
    std::string edges = "1,10,20,30";
    int tolerance = kDefaultTolerance;
    bool no_svg = false;
    std::string out = "report";
    CLI::Option* out_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--pairs", pairs_file, "pairs.csv from eval or classify")->required()->check(CLI::ExistingFile);
        app->add_option("--edges", edges, "bucket lower edges on the requested count")->capture_default_str();
        app->add_option("--tolerance", tolerance, "tolerance for tolerance accuracy")->capture_default_str();
        app->add_flag("--no-svg", no_svg, "skip SVG charts");
        out_opt = app->add_option("--out", out, "output directory")->capture_default_str();
    }

    int run(const Globals& g) const {
        std::vector<int> edge_list;
        for (const std::string& e : split(edges, ',')) edge_list.push_back(parse_int(e, "--edges"));
        require(!edge_list.empty() && std::is_sorted(edge_list.begin(), edge_list.end()) &&
                    std::adjacent_find(edge_list.begin(), edge_list.end()) == edge_list.end(),
                "--edges must be strictly increasing");
        require(tolerance >= 0, "--tolerance must be >= 0");

        std::vector<CountPair> pairs;
        std::size_t skipped = 0;
        std::ifstream in(pairs_file);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#' || line.rfind("record_id", 0) == 0) continue;
            const auto fields = split(line, ',');
            try {
                if (fields.size() != 3) throw std::invalid_argument("fields");
                pairs.push_back({parse_int(fields[1], "pairs"), parse_int(fields[2], "pairs")});
            } catch (const std::exception&) {
                ++skipped;
            }
        }
        if (skipped) logger()->warn("report: skipped {} malformed rows", skipped);
        require(!pairs.empty(), "--pairs: no valid rows in " + pairs_file);
        const fs::path dir = resolve_out(out_opt, out);

        const MetricsReport report = bucket_report(pairs, edge_list, tolerance);
        fs::create_directories(dir);
        write_text_file((dir / "metrics.csv").string(), report_csv(report));
        json mj = report_json(report);
        mj["skipped_rows"] = skipped;
        write_text_file((dir / "metrics.json").string(), mj.dump(2) + "\n");

        std::map<std::pair<int, int>, int> joint;
        std::map<int, int> errors;
        for (const auto& p : pairs) {
            ++joint[{p.requested, p.predicted}];
            ++errors[p.predicted - p.requested];
        }
        std::string scatter = "requested,predicted,n\n";
        for (const auto& [k, n] : joint) scatter += fmt::format("{},{},{}\n", k.first, k.second, n);
        write_text_file((dir / "scatter.csv").string(), scatter);
        std::string hist = "error,n\n";
        for (const auto& [e, n] : errors) hist += fmt::format("{},{}\n", e, n);
        write_text_file((dir / "error_histogram.csv").string(), hist);

        if (!no_svg) {
            std::vector<ScatterPoint> sp;
            for (const auto& p : pairs) sp.push_back({static_cast<double>(p.requested), static_cast<double>(p.predicted)});
            ChartOptions o;
            o.title = "predicted vs requested count";
            o.x_label = "requested";
            o.y_label = "predicted";
            o.diagonal = true;
            write_text_file((dir / "scatter.svg").string(), scatter_svg(sp, o));

            std::vector<std::pair<std::string, double>> bars;
            for (const auto& b : report.buckets) bars.emplace_back(b.label, b.metrics ? b.metrics->exact_accuracy : 0.0);
            ChartOptions bo;
            bo.title = "exact accuracy per bucket";
            bo.y_label = "exact accuracy";
            bo.height = 320;
            write_text_file((dir / "accuracy.svg").string(), bar_chart_svg(bars, bo));
        }

        ordered_json opts;
        opts["pairs"] = pairs_file;
        opts["edges"] = edge_list;
        opts["tolerance"] = tolerance;
        opts["svg"] = !no_svg;
        opts["out"] = dir.string();
        write_run_json(dir, "report", g, opts);

        const BucketMetrics& all = *report.overall.metrics;
        fmt::print("{:<10} {:>6} {:>8} {:>8} {:>8}\n", "bucket", "n", "EAcc", "TAcc", "MAE");
        for (const auto& b : report.buckets) {
            if (b.metrics)
                fmt::print("{:<10} {:>6} {:>8.3f} {:>8.3f} {:>8.3f}\n", b.label, b.n, b.metrics->exact_accuracy,
                           b.metrics->tolerance_accuracy, b.metrics->mae);
            else
                fmt::print("{:<10} {:>6} {:>8} {:>8} {:>8}\n", b.label, b.n, "-", "-", "-");
        }
        fmt::print("{:<10} {:>6} {:>8.3f} {:>8.3f} {:>8.3f}\n", "overall", report.overall.n, all.exact_accuracy,
                   all.tolerance_accuracy, all.mae);
        return 0;
    }
};

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"numgen: synthetic counting benchmarks, noise priors and a toy rectified-flow model"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "TOML config file; flags override it");
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--jobs", g.jobs, "worker threads")->capture_default_str();
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")->capture_default_str();

    GenData gen_data;
    GenNoise gen_noise;
    Train train_cmd;
    Sample sample_cmd;
    Classify classify_cmd;
    Eval eval_cmd;
    Analyze analyze_cmd;
    ProbeNoise probe_cmd;
    Report report_cmd;

    struct Entry {
        CLI::App* app;
        std::function<int()> run;
    };
    std::vector<Entry> entries;
    auto reg = [&](const char* name, const char* help, auto& cmd) {
        CLI::App* sub = app.add_subcommand(name, help);
        cmd.add(sub);
        entries.push_back({sub, [&cmd, &g] { return cmd.run(g); }});
    };
    reg("gen-data", "render a synthetic counting dataset", gen_data);
    reg("gen-noise", "write a noise tensor, optionally shaped by a prior", gen_noise);
    reg("train", "train the toy flow model", train_cmd);
    reg("sample", "sample images from a trained model", sample_cmd);
    reg("classify", "coarse-to-fine count classification", classify_cmd);
    reg("eval", "count objects with the connected-component oracle", eval_cmd);
    reg("analyze", "clustering and stability of object layouts", analyze_cmd);
    reg("probe-noise", "fixed-seed count histograms and prior comparison", probe_cmd);
    reg("report", "bucketed metrics and charts from pairs.csv", report_cmd);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    const auto level = spdlog::level::from_str(g.log_level);
    if (level == spdlog::level::off && g.log_level != "off") {
        std::cerr << "--log-level: unknown level '" << g.log_level << "'\n";
        return 2;
    }
    logger()->set_level(level);
    if (g.jobs < 1) {
        std::cerr << "--jobs must be >= 1\n";
        return 2;
    }

    for (const Entry& e : entries) {
        if (!e.app->parsed()) continue;
        try {
            return e.run();
        } catch (const ConfigError& err) {
            std::cerr << "error: " << err.what() << "\n";
            return 2;
        } catch (const std::exception& err) {
            logger()->error("{}: {}", e.app->get_name(), err.what());
            return 1;
        }
    }
    return 2;
}

} // namespace numgen
