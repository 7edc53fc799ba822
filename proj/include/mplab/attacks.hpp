#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>

#include "mplab/errors.hpp"
#include "mplab/models.hpp"

namespace mplab {

struct Box {
    double lo = 0.0;
    double hi = 1.0;
};

struct AttackConfig {
    double epsilon = 0.0;  // L-inf radius; +inf means uncapped
    double step = 0.0;     // per-iteration L-inf step
    int iters = 1;
    bool random_init = false;
    bool early_stop_on_flip = false;
    std::optional<Box> domain;
    std::uint64_t seed = 0;  // used for random_init when no generator is passed in
};

enum class Direction { ascend, descend };

struct AttackResult {
    Vec x;
    int iterations = 0;
    bool flipped = false;
};

inline constexpr double kUncapped = std::numeric_limits<double>::infinity();

// Sign-gradient iteration with a fixed step and no random start.
inline AttackConfig bim_config(double eps, double step, int iters) {
    AttackConfig c;
    c.epsilon = eps;
    c.step = step;
    c.iters = iters;
    return c;
}

inline void validate(const AttackConfig& cfg) {
    require(cfg.epsilon >= 0.0, "attack radius must be >= 0");
    require(cfg.iters >= 1, "attack needs at least one iteration");
    if (cfg.epsilon > 0.0) {
        require(cfg.step > 0.0, "attack step must be > 0");
        if (std::isfinite(cfg.epsilon)) {
            require(cfg.step <= 2.0 * cfg.epsilon, "attack step must not exceed 2 * epsilon");
        }
    }
    if (cfg.domain) {
        require(cfg.domain->lo < cfg.domain->hi, "attack domain must be a nonempty box");
    }
}

namespace detail {

inline void project(Vec& v, ConstSpan x0, double eps, const std::optional<Box>& domain) {
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (std::isfinite(eps)) {
            v[j] = std::min(std::max(v[j], x0[j] - eps), x0[j] + eps);
        }
        if (domain) {
            v[j] = std::min(std::max(v[j], domain->lo), domain->hi);
        }
    }
}

}  // namespace detail

// x + eps * sign(grad_x L). Coordinates with zero gradient stay put.
template <typename Model>
Vec fgsm(const Model& model, ConstSpan x, int y, double eps) {
    require(eps >= 0.0, "fgsm radius must be >= 0");
    Vec out(x.begin(), x.end());
    if (eps == 0.0) return out;
    LossAndGrad lg = loss_and_input_grad(model, x, y);
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = x[j] + eps * sign0(lg.grad[j]);
    }
    return out;
}

// BIM (random_init = false) or PGD (random_init = true) on the loss, or on the
// negated loss when dir = descend.
template <typename Model>
AttackResult iterated_attack(const Model& model, ConstSpan x, int y, const AttackConfig& cfg,
                             Direction dir = Direction::ascend, std::mt19937_64* rng = nullptr) {
    validate(cfg);
    AttackResult res;
    res.x.assign(x.begin(), x.end());
    if (cfg.epsilon == 0.0) return res;

    const double sgn = dir == Direction::ascend ? 1.0 : -1.0;
    const int p0 = predict(model, x);

    if (cfg.random_init) {
        require(std::isfinite(cfg.epsilon), "random init needs a finite radius");
        std::mt19937_64 local(cfg.seed);
        std::mt19937_64& gen = rng != nullptr ? *rng : local;
        std::uniform_real_distribution<double> u(-cfg.epsilon, cfg.epsilon);
        for (double& v : res.x) v += u(gen);
        detail::project(res.x, x, cfg.epsilon, cfg.domain);
    }

    for (int it = 1; it <= cfg.iters; ++it) {
        LossAndGrad lg = loss_and_input_grad(model, res.x, y);
        for (std::size_t j = 0; j < res.x.size(); ++j) {
            res.x[j] = res.x[j] + sgn * cfg.step * sign0(lg.grad[j]);
        }
        detail::project(res.x, x, cfg.epsilon, cfg.domain);
        res.iterations = it;
        if (cfg.early_stop_on_flip && predict(model, res.x) != p0) {
            res.flipped = true;
            return res;
        }
    }
    res.flipped = predict(model, res.x) != p0;
    return res;
}

// Adversarial perturbation of radius eps_i when eps_i >= 0, anti-adversarial
// (loss descent) of radius |eps_i| otherwise. The step shrinks in proportion so
// a single full step at the base radius stays a single full step.
template <typename Model>
Vec perturb_signed(const Model& model, ConstSpan x, int y, double eps_i, const AttackConfig& cfg,
                   std::mt19937_64* rng = nullptr) {
    validate(cfg);
    double mag = std::abs(eps_i);
    require(mag <= cfg.epsilon * (1.0 + 1e-12), "|eps_i| exceeds the base radius");
    if (mag == 0.0) return Vec(x.begin(), x.end());
    AttackConfig sub = cfg;
    sub.epsilon = mag;
    sub.step = cfg.step * (mag / cfg.epsilon);
    if (sub.step > 2.0 * mag) sub.step = 2.0 * mag;
    return iterated_attack(model, x, y, sub, eps_i > 0.0 ? Direction::ascend : Direction::descend, rng).x;
}

// x + (m / eps)(x' - x), without the range check. Used for probes beyond x'.
inline Vec segment_point_unchecked(ConstSpan x, ConstSpan xadv, double m, double eps) {
    require(x.size() == xadv.size(), "segment endpoints differ in dimension");
    Vec out(x.size());
    if (m == 0.0) {
        out.assign(x.begin(), x.end());
        return out;
    }
    if (m == eps) {
        out.assign(xadv.begin(), xadv.end());
        return out;
    }
    double t = m / eps;
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + t * (xadv[j] - x[j]);
    return out;
}

inline Vec segment_point(ConstSpan x, ConstSpan xadv, double m, double eps) {
    require(eps > 0.0, "segment needs eps > 0");
    if (m < -eps || m > eps) {
        throw ContractViolation("segment parameter m must lie in [-eps, eps]");
    }
    return segment_point_unchecked(x, xadv, m, eps);
}

}  // namespace mplab
