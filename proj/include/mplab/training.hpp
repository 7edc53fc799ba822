#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "mplab/attacks.hpp"
#include "mplab/dataset.hpp"
#include "mplab/models.hpp"
#include "mplab/pruning.hpp"

namespace mplab {

enum class AttackKind { fgsm, pgd };

std::string to_string(AttackKind k);
AttackKind parse_attack_kind(const std::string& s);

struct TrainConfig {
    double epsilon = 0.0;
    int epochs = 20;
    std::size_t batch = 32;
    double lr = 0.05;
    double weight_decay = 0.0;
    LossKind loss = LossKind::logistic_margin;
    AttackKind attack = AttackKind::fgsm;
    int pgd_iters = 10;
    double pgd_step = 0.0;  // 0 means epsilon / 4
    std::uint64_t seed = 0;
    bool record_history = false;  // per-epoch correctness on every dataset row
    bool train_bias = false;
};

void validate(const TrainConfig& cfg);

struct StudentResult {
    LinearModel model;
    CDHistory history;
};

// Mini-batch SGD from zero weights on adversarial examples regenerated at every
// step from the current student. With a schedule, sample i is perturbed with
// its own signed strength eps_i instead of cfg.epsilon.
StudentResult train_student(const Dataset& data, const PruningPlan& plan, const EpsilonSchedule* schedule,
                            const TrainConfig& cfg);

struct OnlineConfig {
    double gap = 0.0;
    int j_max = 10;
    std::optional<double> prune_margin;  // m_P; samples still correct there are skipped
};

struct OnlineResult {
    LinearModel model;
    std::size_t skipped = 0;  // sample-steps skipped by online pruning
    std::size_t no_solution = 0;  // sample-steps where the search fell back to -eps
};

// Online variant: each step estimates eps_i from the current student by a
// segment search between x and its full-strength adversarial example.
OnlineResult train_student_online(const Dataset& data, const PruningPlan& plan, const OnlineConfig& online,
                                  const TrainConfig& cfg);

struct MlpResult {
    TinyMLP model;
    CDHistory history;
};

// Cross-entropy SGD for a 2 -> hidden -> C network; adversarial examples come
// from FGSM or PGD (random start) at cfg.epsilon.
MlpResult train_mlp(const Dataset& data, std::size_t hidden, const TrainConfig& cfg);

// 1 - cos(theta_t, theta_s)
double correlation_error(ConstSpan teacher, ConstSpan student);
// Test error of the student under Gaussian inputs: angle(theta_t, theta_s) / pi.
double gaussian_clean_error(ConstSpan teacher, ConstSpan student);

template <typename Model>
double clean_accuracy(const Model& model, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.size(); ++i) ok += predict(model, data.features[i]) == data.labels[i];
    return static_cast<double>(ok) / static_cast<double>(data.size());
}

// Fraction still correct after attacking every sample at radius eps with cfg
// (cfg.epsilon is overridden). eps = 0 gives clean accuracy.
template <typename Model>
double robust_accuracy(const Model& model, const Dataset& data, double eps, AttackConfig cfg,
                       std::uint64_t seed = 0) {
    require(eps >= 0.0, "robust accuracy needs eps >= 0");
    if (eps == 0.0) return clean_accuracy(model, data);
    if (data.size() == 0) return 0.0;
    cfg.epsilon = eps;
    if (cfg.step <= 0.0) cfg.step = eps / 4.0;
    std::mt19937_64 rng(seed);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        AttackResult adv = iterated_attack(model, data.features[i], data.labels[i], cfg, Direction::ascend, &rng);
        ok += predict(model, adv.x) == data.labels[i];
    }
    return static_cast<double>(ok) / static_cast<double>(data.size());
}

// PGD-20, step eps/4, one random start.
AttackConfig default_eval_attack(double eps);

// Stable 64-bit mix of a master seed with a list of tags.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags);
std::uint64_t hash_string(const std::string& s);

}  // namespace mplab
