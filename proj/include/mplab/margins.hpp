#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "mplab/attacks.hpp"
#include "mplab/errors.hpp"
#include "mplab/models.hpp"
#include "mplab/parallel.hpp"

namespace mplab {

enum class MarginMethod { analytic, deepfool, fast, online };

std::string to_string(MarginMethod m);
MarginMethod parse_margin_method(const std::string& s);

// Signed L-inf margin: negative when the reference model misclassifies the clean sample.
struct MarginRecord {
    std::int64_t sample_id = 0;
    double margin = 0.0;
    MarginMethod method = MarginMethod::analytic;
    int iterations = 0;
    bool converged = true;
};

// y (theta . x + b) / ||theta||_1
double analytic_margin(const LinearModel& model, ConstSpan x, int y);

enum class DeepFoolNorm { linf, l2 };

struct DeepFoolConfig {
    int max_iter = 50;
    double overshoot = 0.02;
    DeepFoolNorm norm = DeepFoolNorm::linf;
};

struct FastMarginConfig {
    double step = 1e-3;  // BIM step
    int i_max = 1000;
    int j_max = 20;
};

void validate(const DeepFoolConfig& cfg);
void validate(const FastMarginConfig& cfg);

namespace detail {

// Uniform per-class view. The binary model is read as two classes
// (index 0 for label -1, index 1 for label +1) with logits (0, score).
struct LogitState {
    Vec f;
    std::vector<Vec> grad;
};

inline int class_index(const LinearModel& m, ConstSpan x) { return predict(m, x) > 0 ? 1 : 0; }
inline int class_index(const TinyMLP& m, ConstSpan x) { return predict(m, x); }
inline int label_index(const LinearModel&, int y) { return y > 0 ? 1 : 0; }
inline int label_index(const TinyMLP&, int y) { return y; }

inline LogitState logit_state(const LinearModel& m, ConstSpan x) {
    return LogitState{{0.0, m.score(x)}, {Vec(m.weights.size(), 0.0), m.weights}};
}
inline LogitState logit_state(const TinyMLP& m, ConstSpan x) {
    return LogitState{logits(m, x), logit_jacobian(m, x)};
}

inline double norm_inf(const Vec& v) {
    double n = 0.0;
    for (double a : v) n = std::max(n, std::abs(a));
    return n;
}

}  // namespace detail

// L-inf DeepFool (L1 dual); the L2 variant is available through cfg.norm.
// The reported distance is ||r_total|| without the overshoot factor, which is
// only applied when checking that the boundary has been crossed.
template <typename Model>
MarginRecord deepfool_margin(const Model& model, ConstSpan x, int y, const DeepFoolConfig& cfg = {}) {
    validate(cfg);
    require(valid_label(model, y), "label outside the model's label space");
    const int c0 = detail::class_index(model, x);
    const bool correct = c0 == detail::label_index(model, y);
    const std::size_t dim = x.size();

    Vec r_total(dim, 0.0);
    Vec probe(x.begin(), x.end());
    MarginRecord rec;
    rec.method = MarginMethod::deepfool;
    rec.converged = false;

    auto norm_of = [&](const Vec& v) {
        if (cfg.norm == DeepFoolNorm::l2) {
            double s = 0.0;
            for (double a : v) s += a * a;
            return std::sqrt(s);
        }
        return detail::norm_inf(v);
    };

    int it = 0;
    for (; it < cfg.max_iter; ++it) {
        for (std::size_t j = 0; j < dim; ++j) probe[j] = x[j] + (1.0 + cfg.overshoot) * r_total[j];
        if (detail::class_index(model, probe) != c0) {
            rec.converged = true;
            break;
        }
        detail::LogitState st = detail::logit_state(model, probe);
        double best = std::numeric_limits<double>::infinity();
        double best_gap = 0.0;
        Vec best_w;
        for (std::size_t k = 0; k < st.f.size(); ++k) {
            if (static_cast<int>(k) == c0) continue;
            Vec w(dim);
            double wn = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                w[j] = st.grad[k][j] - st.grad[c0][j];
                wn += cfg.norm == DeepFoolNorm::l2 ? w[j] * w[j] : std::abs(w[j]);
            }
            if (cfg.norm == DeepFoolNorm::l2) wn = std::sqrt(wn);
            if (wn == 0.0) continue;
            double gap = std::abs(st.f[k] - st.f[c0]);
            double d = gap / wn;
            if (d < best) {
                best = d;
                best_gap = gap;
                best_w = std::move(w);
            }
        }
        if (best_w.empty()) {
            throw DegenerateModelError("deepfool: all logit differences have zero gradient");
        }
        if (best == 0.0) {
            // sitting on the boundary already
            rec.converged = true;
            break;
        }
        if (cfg.norm == DeepFoolNorm::l2) {
            double wn2 = 0.0;
            for (double a : best_w) wn2 += a * a;
            for (std::size_t j = 0; j < dim; ++j) r_total[j] += best_gap / wn2 * best_w[j];
        } else {
            double wn1 = 0.0;
            for (double a : best_w) wn1 += std::abs(a);
            for (std::size_t j = 0; j < dim; ++j) r_total[j] += best_gap / wn1 * sign0(best_w[j]);
        }
    }
    if (!rec.converged) {
        for (std::size_t j = 0; j < dim; ++j) probe[j] = x[j] + (1.0 + cfg.overshoot) * r_total[j];
        rec.converged = detail::class_index(model, probe) != c0;
    }
    rec.iterations = it;
    double dist = norm_of(r_total);
    rec.margin = correct ? dist : -dist;
    return rec;
}

// Phase 1 walks sign-gradient steps (ascent if the sample is correct, descent
// otherwise) until the prediction changes; phase 2 bisects the distance along
// the found direction, probing at L-inf distance |m| from x.
template <typename Model>
MarginRecord fast_margin(const Model& model, ConstSpan x, int y, const FastMarginConfig& cfg = {}) {
    validate(cfg);
    require(valid_label(model, y), "label outside the model's label space");
    const int p0 = predict(model, x);
    const double k = p0 == y ? 1.0 : -1.0;

    AttackConfig bim;
    bim.epsilon = kUncapped;
    bim.step = cfg.step;
    bim.iters = cfg.i_max;
    bim.early_stop_on_flip = true;
    AttackResult walk = iterated_attack(model, x, y, bim, k > 0 ? Direction::ascend : Direction::descend);

    MarginRecord rec;
    rec.method = MarginMethod::fast;
    rec.iterations = walk.iterations;
    Vec d(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) d[j] = walk.x[j] - x[j];
    const double dn = detail::norm_inf(d);
    const double m = k * dn;
    if (!walk.flipped || dn == 0.0) {
        rec.margin = m;
        rec.converged = false;
        return rec;
    }

    // m_down stays on the side where the prediction equals y, m_up where it does not.
    double m_down = k > 0 ? 0.0 : m;
    double m_up = k > 0 ? m : 0.0;
    Vec probe(x.size());
    for (int j = 0; j < cfg.j_max; ++j) {
        double mc = 0.5 * (m_down + m_up);
        double t = std::abs(mc) / dn;
        for (std::size_t q = 0; q < x.size(); ++q) probe[q] = x[q] + t * d[q];
        if (predict(model, probe) == y) {
            m_down = mc;
        } else {
            m_up = mc;
        }
    }
    rec.margin = 0.5 * (m_down + m_up);
    return rec;
}

// Largest m in [-eps, eps] with a correct prediction at segment_point(x, x', m, eps).
// Probes m = eps, then 0, then -eps before bisecting; returns -eps when none of
// those probes is correct.
template <typename Model>
MarginRecord online_margin(const Model& model, ConstSpan x, int y, ConstSpan xadv, double eps, int j_max) {
    require(eps > 0.0, "online margin needs eps > 0");
    require(j_max >= 1, "j_max must be positive");
    MarginRecord rec;
    rec.method = MarginMethod::online;
    auto correct = [&](double m) {
        ++rec.iterations;
        return predict(model, segment_point(x, xadv, m, eps)) == y;
    };
    if (correct(eps)) {
        rec.margin = eps;
        return rec;
    }
    double lo = 0.0;
    double hi = eps;
    if (!correct(0.0)) {
        if (!correct(-eps)) {
            rec.margin = -eps;
            return rec;
        }
        lo = -eps;
        hi = 0.0;
    }
    for (int j = 0; j < j_max; ++j) {
        double mid = 0.5 * (lo + hi);
        if (correct(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    rec.margin = lo;
    return rec;
}

// Batch pass over rows of a feature matrix. ids, labels and rows are parallel arrays.
struct MarginRequest {
    MarginMethod method = MarginMethod::analytic;
    DeepFoolConfig deepfool;
    FastMarginConfig fast;
    AttackConfig online_attack;  // produces x' for the online method; epsilon is the segment radius
    int online_j_max = 20;
};

template <typename Model>
MarginRecord margin_of(const Model& model, ConstSpan x, int y, const MarginRequest& req) {
    switch (req.method) {
        case MarginMethod::analytic:
            if constexpr (std::is_same_v<Model, LinearModel>) {
                return MarginRecord{0, analytic_margin(model, x, y), MarginMethod::analytic, 0, true};
            } else {
                throw ContractViolation("analytic margins need a binary linear model");
            }
        case MarginMethod::deepfool:
            return deepfool_margin(model, x, y, req.deepfool);
        case MarginMethod::fast:
            return fast_margin(model, x, y, req.fast);
        case MarginMethod::online: {
            AttackResult adv = iterated_attack(model, x, y, req.online_attack);
            return online_margin(model, x, y, adv.x, req.online_attack.epsilon, req.online_j_max);
        }
    }
    throw ContractViolation("unknown margin method");
}

template <typename Model>
std::vector<MarginRecord> compute_margins(const Model& model, const std::vector<Vec>& rows,
                                          const std::vector<int>& labels, const std::vector<std::int64_t>& ids,
                                          const MarginRequest& req, std::size_t jobs = 1) {
    require(rows.size() == labels.size() && rows.size() == ids.size(), "margin inputs differ in length");
    std::vector<MarginRecord> out(rows.size());
    parallel_for(rows.size(), jobs, [&](std::size_t i) {
        out[i] = margin_of(model, rows[i], labels[i], req);
        out[i].sample_id = ids[i];
    });
    return out;
}

// CSV manifest: sample_id,margin,method,iterations; 9 significant digits; sorted by id.
std::string format_margin_manifest(std::vector<MarginRecord> records);
std::vector<MarginRecord> parse_margin_manifest(const std::string& text);
void write_margin_manifest(const std::filesystem::path& path, const std::vector<MarginRecord>& records);
std::vector<MarginRecord> read_margin_manifest(const std::filesystem::path& path);

}  // namespace mplab
