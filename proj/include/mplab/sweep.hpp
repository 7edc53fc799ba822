#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mplab/dataset.hpp"
#include "mplab/pruning.hpp"
#include "mplab/training.hpp"

namespace mplab {

struct SweepArm {
    PruneStrategy strategy = PruneStrategy::none;
    double ratio = 0.0;
    // Drop samples with true margin below the threshold before easy-pruning.
    // The threshold defaults to the cell's training eps.
    bool filter = false;
    std::optional<double> filter_threshold;

    std::string label() const;  // none, pe, pd, random, pe+filter
    bool operator==(const SweepArm&) const = default;
};

struct SweepGrid {
    std::size_t K = 200;
    std::vector<SweepArm> arms;
    std::vector<double> epsilons;
    std::vector<double> alphas;
    std::size_t seeds = 20;
    std::uint64_t master_seed = 0;
    TrainConfig train;  // epsilon and seed are set per cell
    std::size_t n_test = 2000;
};

struct SweepRow {
    std::string strategy;
    double epsilon = 0.0;
    double alpha = 0.0;
    double prune_ratio = 0.0;
    std::int64_t seed = 0;  // seed index within the cell group
    double corr_error = 0.0;
    double clean_error = 0.0;
    double robust_error = 0.0;
    std::string error;  // nonempty when the cell failed; metrics are then NaN
};

// Retained size after pruning: round(alpha * K).
std::size_t retained_target(double alpha, std::size_t K);
// Smallest n with n - round(ratio * n) == retained.
std::size_t pre_pruning_size(std::size_t retained, double ratio);

struct CellInputs {
    Dataset train;
    PruningPlan plan;
    TrainConfig cfg;
    std::uint64_t eval_seed = 0;
};

// Data and training seeds depend on (master seed, alpha, seed index) only, so
// different strategies and radii in a grid see the same draws.
CellInputs make_cell(const SweepGrid& grid, const SweepArm& arm, double eps, double alpha, std::size_t seed_index);
Dataset make_test_set(const SweepGrid& grid, std::size_t seed_index);
SweepRow run_cell(const SweepGrid& grid, const SweepArm& arm, double eps, double alpha, std::size_t seed_index);

// Rows sorted by (strategy, epsilon, alpha, prune_ratio, seed); output does not
// depend on jobs.
std::vector<SweepRow> run_sweep(const SweepGrid& grid, std::size_t jobs);

void sort_rows(std::vector<SweepRow>& rows);
std::string format_sweep_csv(std::vector<SweepRow> rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);
void write_results(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

struct GroupFit {
    std::string strategy;
    double epsilon = 0.0;
    double prune_ratio = 0.0;
    std::vector<double> alphas;
    std::vector<double> means;
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
};

enum class Metric { corr_error, clean_error, robust_error };
Metric parse_metric(const std::string& s);
double metric_of(const SweepRow& row, Metric m);

// Seed-averaged metric per alpha for each (strategy, epsilon, ratio) group, then a
// log-log fit over alpha in [alpha_min, alpha_max]. Groups with fewer than two
// alphas in range are skipped.
std::vector<GroupFit> fit_groups(const std::vector<SweepRow>& rows, Metric metric, double alpha_min = 0.0,
                                 double alpha_max = 1e300);

}  // namespace mplab
