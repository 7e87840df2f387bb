#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

namespace mbti {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over any parameter set exposing `blocks()` -> std::vector<Eigen::MatrixXd*>
/// in a fixed order.
template <class Params>
class Adam {
public:
    Adam(const Params& like, AdamConfig config) : config_(config), m_(like), v_(like) {
        for (auto* b : m_.blocks()) b->setZero();
        for (auto* b : v_.blocks()) b->setZero();
    }

    void step(Params& params, const Params& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        auto p = params.blocks();
        auto g = const_cast<Params&>(grads).blocks();
        auto m = m_.blocks();
        auto v = v_.blocks();
        for (std::size_t i = 0; i < p.size(); ++i) {
            *m[i] = config_.beta1 * *m[i] + (1.0 - config_.beta1) * *g[i];
            *v[i] = config_.beta2 * *v[i] + (1.0 - config_.beta2) * g[i]->cwiseProduct(*g[i]);
            p[i]->array() -= config_.lr * (m[i]->array() / c1) /
                             ((v[i]->array() / c2).sqrt() + config_.eps);
        }
    }

    long steps() const { return t_; }

private:
    AdamConfig config_;
    Params m_;
    Params v_;
    long t_ = 0;
};

} // namespace mbti
