#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mplab/pruning.hpp"
#include "mplab/sweep.hpp"
#include "mplab/training.hpp"

namespace mplab {

enum class MarginSource { truth, manifest, online };

struct PruningSettings {
    PruneStrategy strategy = PruneStrategy::none;
    double ratio = 0.0;
    MarginSource source = MarginSource::truth;
    std::string manifest;  // used when source = manifest; relative to the config file
    std::optional<double> filter_threshold;
    bool schedule = false;  // per-sample eps_i from the margins
    double gap = 0.0;
    std::optional<double> m_p;  // online pruning margin
    int j_max = 10;

    bool operator==(const PruningSettings&) const = default;
};

struct ExperimentConfig {
    std::string task = "perceptron";  // perceptron | toy-mlp
    std::uint64_t seed = 0;
    std::string output_dir;
    std::string output_name;  // file name of the main result

    // model / data
    std::size_t K = 200;
    std::size_t hidden = 32;
    std::size_t classes = 3;
    double alpha = 8.0;       // train: retained size alpha * K
    std::size_t n_train = 2000;  // toy-mlp sample count
    double blob_radius = 1.5;
    double blob_sigma = 0.5;

    // training
    double epsilon = 0.0;
    int epochs = 20;
    std::size_t batch = 32;
    double lr = 0.05;
    double weight_decay = 0.0;
    AttackKind attack = AttackKind::fgsm;
    int pgd_iters = 10;
    double pgd_step = 0.0;

    // sweep grid
    std::vector<SweepArm> arms;
    std::vector<double> epsilons;
    std::vector<double> alphas;
    std::size_t seeds = 20;
    std::size_t n_test = 2000;

    PruningSettings pruning;

    bool operator==(const ExperimentConfig&) const = default;

    TrainConfig train_config() const;
    SweepGrid sweep_grid() const;
};

// Nested YAML; numeric fields also accept exact fractions such as "8/255".
// Throws ConfigError on unknown keys, bad values or a failed validation.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string format_config(const ExperimentConfig& cfg);

// Checks value ranges; with base_dir, also that referenced files exist.
void validate_config(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& base_dir = {});

}  // namespace mplab
