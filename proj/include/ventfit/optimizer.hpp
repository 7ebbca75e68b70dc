#pragma once

#include "ventfit/common.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ventfit {

// Optimization and loss-weight settings. Defaults are the reference
// configuration used throughout; JSON configs override individual fields.
struct FitConfig {
    double lambda_cf = 2.0;
    double lambda_pm = 1.4;
    double lambda_mp = 0.6;
    double lambda_vert = 1.0;
    double lambda_norm = 1.0;
    double lambda_edge = 1000.0;
    double lambda_cons = 100.0;
    double lambda_lap = 300.0;
    double initial_lr = 5e-4;
    int total_iters = 5000;
    int halve_every = 1000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    bool peri_enabled = true;
    bool joint_enabled = true;
};

inline void validate_fit_config(const FitConfig& c) {
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw parameter_error(std::string("fit config: ") + name + " must be >= 0");
    };
    nonneg(c.lambda_cf, "lambda_cf");
    nonneg(c.lambda_pm, "lambda_pm");
    nonneg(c.lambda_mp, "lambda_mp");
    nonneg(c.lambda_vert, "lambda_vert");
    nonneg(c.lambda_norm, "lambda_norm");
    nonneg(c.lambda_edge, "lambda_edge");
    nonneg(c.lambda_cons, "lambda_cons");
    nonneg(c.lambda_lap, "lambda_lap");
    nonneg(c.weight_decay, "weight_decay");
    if (!(c.initial_lr > 0.0)) throw parameter_error("fit config: initial_lr must be > 0");
    if (c.total_iters <= 0) throw parameter_error("fit config: total_iters must be > 0");
    if (c.halve_every <= 0) throw parameter_error("fit config: halve_every must be > 0");
    if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0))
        throw parameter_error("fit config: betas must lie in [0, 1)");
    if (!(c.eps > 0.0)) throw parameter_error("fit config: eps must be > 0");
}

// Stepwise halving: lr(i) = initial * 0.5^floor(i / halve_every).
inline double lr_schedule(int iteration, const FitConfig& c) {
    if (iteration < 0 || iteration >= c.total_iters)
        throw parameter_error("lr_schedule: iteration " + std::to_string(iteration) +
                              " outside [0, " + std::to_string(c.total_iters) + ")");
    return c.initial_lr * std::pow(0.5, iteration / c.halve_every);
}

// Decoupled-weight-decay Adam over per-vertex coordinates with standard
// bias correction. Moments persist across steps; t counts completed steps.
struct AdamWState {
    std::vector<Vec3> m;
    std::vector<Vec3> v;
    long t = 0;

    explicit AdamWState(std::size_t n = 0) { reset(n); }
    void reset(std::size_t n) {
        m.assign(n, Vec3::Zero());
        v.assign(n, Vec3::Zero());
        t = 0;
    }
};

inline void adamw_step(std::vector<Vec3>& x, const std::vector<Vec3>& grad, AdamWState& state,
                       double lr, const FitConfig& c) {
    if (x.size() != grad.size() || x.size() != state.m.size())
        throw parameter_error("adamw_step: dimension mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            double g = grad[i][a];
            double m = state.m[i][a] = c.beta1 * state.m[i][a] + (1.0 - c.beta1) * g;
            double v = state.v[i][a] = c.beta2 * state.v[i][a] + (1.0 - c.beta2) * g * g;
            double mh = m / bc1;
            double vh = v / bc2;
            x[i][a] -= lr * (mh / (std::sqrt(vh) + c.eps) + c.weight_decay * x[i][a]);
        }
    }
}

}  // namespace ventfit
