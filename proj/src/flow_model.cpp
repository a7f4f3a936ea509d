#include "numgen/flow_model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "numgen/error.hpp"
#include "numgen/noise_prior.hpp"
#include "numgen/rng.hpp"

namespace numgen {

void to_json(nlohmann::json& j, const FlowArch& a) {
    j = nlohmann::json{{"channels", a.channels},     {"height", a.height},       {"width", a.width},
                       {"hidden", a.hidden},         {"time_freqs", a.time_freqs}, {"max_count", a.max_count}};
}

void from_json(const nlohmann::json& j, FlowArch& a) {
    a.channels = j.at("channels").get<int>();
    a.height = j.at("height").get<int>();
    a.width = j.at("width").get<int>();
    a.hidden = j.at("hidden").get<int>();
    a.time_freqs = j.at("time_freqs").get<int>();
    a.max_count = j.at("max_count").get<int>();
}

namespace {

Eigen::MatrixXd im2col(const Eigen::MatrixXd& in, int h, int w) {
    const auto cin = static_cast<int>(in.rows());
    Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(9 * cin, h * w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double* dst = cols.col(r * w + c).data();
            for (int ky = 0; ky < 3; ++ky) {
                const int rr = r + ky - 1;
                if (rr < 0 || rr >= h) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int cc = c + kx - 1;
                    if (cc < 0 || cc >= w) continue;
                    const double* src = in.col(rr * w + cc).data();
                    const int k = ky * 3 + kx;
                    for (int ci = 0; ci < cin; ++ci) dst[ci * 9 + k] = src[ci];
                }
            }
        }
    }
    return cols;
}

Eigen::MatrixXd col2im(const Eigen::MatrixXd& cols, int cin, int h, int w) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cin, h * w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double* src = cols.col(r * w + c).data();
            for (int ky = 0; ky < 3; ++ky) {
                const int rr = r + ky - 1;
                if (rr < 0 || rr >= h) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int cc = c + kx - 1;
                    if (cc < 0 || cc >= w) continue;
                    double* dst = out.col(rr * w + cc).data();
                    const int k = ky * 3 + kx;
                    for (int ci = 0; ci < cin; ++ci) dst[ci] += src[ci * 9 + k];
                }
            }
        }
    }
    return out;
}

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

Eigen::MatrixXd silu(const Eigen::MatrixXd& a) {
    return a.unaryExpr([](double v) { return v * sigmoid(v); });
}

Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& a) {
    return a.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

} // namespace

FlowModel::FlowModel(const FlowArch& arch, std::uint64_t init_seed) : arch_(arch), init_seed_(init_seed) {
    if (arch.channels < 1 || arch.height < 1 || arch.width < 1 || arch.hidden < 1 || arch.time_freqs < 1 ||
        arch.max_count < 1)
        throw DegenerateInput("FlowModel: architecture dimensions must be positive");
    build_groups();
    Rng rng(init_seed);
    const double hidden = arch.hidden;
    auto fill = [&](Group g, double stddev) {
        auto m = param(g);
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = stddev * rng.normal();
    };
    fill(w1, std::sqrt(2.0 / (9.0 * arch.channels)));
    fill(t1, std::sqrt(1.0 / (2.0 * arch.time_freqs)));
    fill(e1, 0.5);
    fill(w2, std::sqrt(2.0 / (9.0 * hidden)));
    fill(g2, std::sqrt(1.0 / hidden));
    fill(t2, std::sqrt(1.0 / (2.0 * arch.time_freqs)));
    fill(e2, 0.5);
    fill(w3, std::sqrt(1.0 / (9.0 * hidden)));
}

void FlowModel::build_groups() {
    const int c = arch_.channels;
    const int h = arch_.hidden;
    const int f = 2 * arch_.time_freqs;
    const int k = arch_.max_count + 1;
    const std::vector<std::tuple<const char*, int, int>> shapes{
        {"w1", h, 9 * c}, {"b1", h, 1}, {"t1", h, f}, {"e1", h, k}, {"w2", h, 9 * h}, {"b2", h, 1},
        {"g2", h, h},     {"t2", h, f}, {"e2", h, k}, {"w3", c, 9 * h}, {"b3", c, 1}};
    groups_.clear();
    std::size_t offset = 0;
    for (const auto& [name, rows, cols] : shapes) {
        groups_.push_back({name, rows, cols, offset});
        offset += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }
    theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

Eigen::Map<Eigen::MatrixXd> FlowModel::param(Group g) {
    const GroupInfo& info = groups_[static_cast<std::size_t>(g)];
    return {theta_.data() + info.offset, info.rows, info.cols};
}

Eigen::Map<const Eigen::MatrixXd> FlowModel::param(Group g) const {
    const GroupInfo& info = groups_[static_cast<std::size_t>(g)];
    return {theta_.data() + info.offset, info.rows, info.cols};
}

Eigen::VectorXd FlowModel::time_embedding(double t) const {
    Eigen::VectorXd e(2 * arch_.time_freqs);
    for (int k = 0; k < arch_.time_freqs; ++k) {
        const double omega = std::numbers::pi * std::ldexp(1.0, k - 1);
        e[k] = std::sin(omega * t);
        e[arch_.time_freqs + k] = std::cos(omega * t);
    }
    return e;
}

FlowModel::Cache FlowModel::forward(const Eigen::MatrixXd& x, double t, int cond) const {
    if (x.rows() != arch_.channels || x.cols() != arch_.pixels()) throw ShapeError("FlowModel: input shape mismatch");
    if (cond < 0 || cond > arch_.max_count) throw DegenerateInput("FlowModel: condition token out of range");
    const int h = arch_.height;
    const int w = arch_.width;
    Cache cache;
    cache.cond = cond;
    cache.temb = time_embedding(t);

    cache.cols1 = im2col(x, h, w);
    const Eigen::VectorXd bias1 = param(b1).col(0) + param(t1) * cache.temb + param(e1).col(cond);
    cache.a1.noalias() = param(w1) * cache.cols1;
    cache.a1.colwise() += bias1;
    cache.h1 = silu(cache.a1);

    cache.pooled = cache.h1.rowwise().mean();
    cache.cols2 = im2col(cache.h1, h, w);
    const Eigen::VectorXd bias2 =
        param(b2).col(0) + param(g2) * cache.pooled + param(t2) * cache.temb + param(e2).col(cond);
    cache.a2.noalias() = param(w2) * cache.cols2;
    cache.a2.colwise() += bias2;
    cache.h2 = silu(cache.a2);

    cache.cols3 = im2col(cache.h2, h, w);
    cache.out.noalias() = param(w3) * cache.cols3;
    cache.out.colwise() += param(b3).col(0);
    return cache;
}

Eigen::MatrixXd FlowModel::velocity(const Eigen::MatrixXd& x, double t, int cond) const {
    return forward(x, t, cond).out;
}

void FlowModel::backward(const Cache& cache, const Eigen::MatrixXd& d_out, Eigen::VectorXd& grad) const {
    if (grad.size() != theta_.size()) grad = Eigen::VectorXd::Zero(theta_.size());
    auto gview = [&](Group g) {
        const GroupInfo& info = groups_[static_cast<std::size_t>(g)];
        return Eigen::Map<Eigen::MatrixXd>(grad.data() + info.offset, info.rows, info.cols);
    };
    const int h = arch_.height;
    const int w = arch_.width;
    const auto pixels = static_cast<double>(arch_.pixels());

    gview(w3).noalias() += d_out * cache.cols3.transpose();
    gview(b3).col(0) += d_out.rowwise().sum();
    const Eigen::MatrixXd d_h2 = col2im(param(w3).transpose() * d_out, arch_.hidden, h, w);

    const Eigen::MatrixXd d_a2 = d_h2.cwiseProduct(silu_grad(cache.a2));
    gview(w2).noalias() += d_a2 * cache.cols2.transpose();
    const Eigen::VectorXd s2 = d_a2.rowwise().sum();
    gview(b2).col(0) += s2;
    gview(g2).noalias() += s2 * cache.pooled.transpose();
    gview(t2).noalias() += s2 * cache.temb.transpose();
    gview(e2).col(cache.cond) += s2;
    const Eigen::VectorXd d_pooled = param(g2).transpose() * s2;

    Eigen::MatrixXd d_h1 = col2im(param(w2).transpose() * d_a2, arch_.hidden, h, w);
    d_h1.colwise() += d_pooled / pixels;

    const Eigen::MatrixXd d_a1 = d_h1.cwiseProduct(silu_grad(cache.a1));
    gview(w1).noalias() += d_a1 * cache.cols1.transpose();
    const Eigen::VectorXd s1 = d_a1.rowwise().sum();
    gview(b1).col(0) += s1;
    gview(t1).noalias() += s1 * cache.temb.transpose();
    gview(e1).col(cache.cond) += s1;
}

void FlowModel::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["arch"] = arch_;
    meta["init_seed"] = init_seed_;
    meta["tensor_format"] = "NTF1 f64, dims [rows, cols], row-major";
    meta["groups"] = nlohmann::json::array();
    for (const GroupInfo& g : groups_) {
        meta["groups"].push_back({{"name", g.name}, {"rows", g.rows}, {"cols", g.cols}, {"file", g.name + ".ntf"}});
        NtfArray array;
        array.dtype = 1;
        array.dims = {static_cast<std::uint32_t>(g.rows), static_cast<std::uint32_t>(g.cols)};
        array.data.resize(static_cast<std::size_t>(g.rows) * static_cast<std::size_t>(g.cols));
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c)
                array.data[static_cast<std::size_t>(r) * g.cols + c] =
                    theta_[static_cast<Eigen::Index>(g.offset + static_cast<std::size_t>(c) * g.rows + r)];
        write_ntf(dir / (g.name + ".ntf"), array);
    }
    std::ofstream out(dir / "model.json");
    out << meta.dump(2) << '\n';
    if (!out) throw Error("FlowModel::save: cannot write " + (dir / "model.json").string());
}

FlowModel FlowModel::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "model.json");
    if (!in) throw Error("FlowModel::load: cannot open " + (dir / "model.json").string());
    const nlohmann::json meta = nlohmann::json::parse(in);
    FlowModel model;
    model.arch_ = meta.at("arch").get<FlowArch>();
    model.init_seed_ = meta.value("init_seed", std::uint64_t{0});
    model.build_groups();
    for (const GroupInfo& g : model.groups_) {
        const NtfArray array = read_ntf(dir / (g.name + ".ntf"));
        if (array.dims.size() != 2 || static_cast<int>(array.dims[0]) != g.rows ||
            static_cast<int>(array.dims[1]) != g.cols)
            throw FormatError("FlowModel::load: shape mismatch for group " + g.name);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c)
                model.theta_[static_cast<Eigen::Index>(g.offset + static_cast<std::size_t>(c) * g.rows + r)] =
                    array.data[static_cast<std::size_t>(r) * g.cols + c];
    }
    return model;
}

} // namespace numgen
