#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace numgen {

struct FlowArch {
    int channels = 1;
    int height = 32;
    int width = 32;
    int hidden = 32;
    int time_freqs = 8;  // embedding = [sin, cos](pi * 2^(k-1) * t), k < time_freqs
    int max_count = 8;   // count tokens 1..max_count; token 0 is unconditional

    int pixels() const noexcept { return height * width; }
    int image_size() const noexcept { return channels * pixels(); }
    friend bool operator==(const FlowArch&, const FlowArch&) = default;
};

void to_json(nlohmann::json& j, const FlowArch& arch);
void from_json(const nlohmann::json& j, FlowArch& arch);

// Velocity network v(x_t, t, c):
//   h1 = silu(conv3x3(x) + b1 + T1 e(t) + E1[c])
//   h2 = silu(conv3x3(h1) + b2 + G mean(h1) + T2 e(t) + E2[c])
//   v  = conv3x3(h2) + b3
// All parameters live in one flat vector; groups are column-major views.
class FlowModel {
public:
    enum Group { w1, b1, t1, e1, w2, b2, g2, t2, e2, w3, b3, kGroupCount };

    struct GroupInfo {
        std::string name;
        int rows = 0;
        int cols = 0;
        std::size_t offset = 0;
    };

    // Intermediate activations of one forward pass.
    struct Cache {
        Eigen::VectorXd temb;
        int cond = 0;
        Eigen::MatrixXd cols1, a1, h1, cols2, a2, h2, cols3;
        Eigen::VectorXd pooled;
        Eigen::MatrixXd out;  // channels x pixels
    };

    FlowModel() = default;
    FlowModel(const FlowArch& arch, std::uint64_t init_seed);

    const FlowArch& arch() const noexcept { return arch_; }
    std::uint64_t init_seed() const noexcept { return init_seed_; }
    const std::vector<GroupInfo>& groups() const noexcept { return groups_; }
    std::size_t parameter_count() const noexcept { return theta_.size(); }

    Eigen::VectorXd& parameters() noexcept { return theta_; }
    const Eigen::VectorXd& parameters() const noexcept { return theta_; }

    Eigen::Map<Eigen::MatrixXd> param(Group g);
    Eigen::Map<const Eigen::MatrixXd> param(Group g) const;

    Eigen::VectorXd time_embedding(double t) const;

    // x: channels x pixels, pixel index = row * width + col.
    Cache forward(const Eigen::MatrixXd& x, double t, int cond) const;
    Eigen::MatrixXd velocity(const Eigen::MatrixXd& x, double t, int cond) const;

    // Accumulates dL/dtheta into grad given dL/d(out).
    void backward(const Cache& cache, const Eigen::MatrixXd& d_out, Eigen::VectorXd& grad) const;

    void save(const std::filesystem::path& dir) const;
    static FlowModel load(const std::filesystem::path& dir);

private:
    FlowArch arch_;
    std::uint64_t init_seed_ = 0;
    std::vector<GroupInfo> groups_;
    Eigen::VectorXd theta_;

    void build_groups();
};

} // namespace numgen
