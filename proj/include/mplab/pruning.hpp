#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mplab/attacks.hpp"
#include "mplab/errors.hpp"
#include "mplab/models.hpp"

namespace mplab {

enum class PruneStrategy { none, prune_easy, prune_difficult, random, filter_below };

// margin: high score = easy sample. difficulty (CD): high score = hard sample.
enum class ScoreOrientation { margin, difficulty };

std::string to_string(PruneStrategy s);
// Accepts none, pe, pd, random, filter (and the long enum spellings).
PruneStrategy parse_prune_strategy(const std::string& s);

struct PruningPlan {
    PruneStrategy strategy = PruneStrategy::none;
    double ratio = 0.0;  // removed fraction, or the threshold for threshold-based plans
    std::uint64_t seed = 0;
    std::optional<double> filter_threshold;  // set when a low-margin filter was applied
    std::vector<std::int64_t> retained;      // sorted ascending
    std::vector<std::int64_t> removed;       // sorted ascending
    std::uint64_t manifest_hash = 0;
};

// Number removed for a ratio-based plan: round(ratio * n), halves away from zero.
std::size_t removed_count(double ratio, std::size_t n);

// ids may be empty, meaning ids 0..n-1. Samples are ranked by (score, id), so
// among tied scores the low end drops lower ids first and the high end higher ids first.
PruningPlan rank_and_prune(std::span<const double> scores, PruneStrategy strategy, double ratio,
                           std::uint64_t seed = 0, ScoreOrientation orientation = ScoreOrientation::margin,
                           std::span<const std::int64_t> ids = {});

// Same ordering rules, but with the removed count given directly.
PruningPlan rank_and_prune_count(std::span<const double> scores, PruneStrategy strategy, std::size_t count,
                                 std::uint64_t seed = 0, ScoreOrientation orientation = ScoreOrientation::margin,
                                 std::span<const std::int64_t> ids = {});

// PE removes the easy side (margin >= t, or CD < t); PD removes the hard side
// (margin < t, or CD >= t).
PruningPlan prune_by_threshold(std::span<const double> scores, PruneStrategy strategy, double threshold,
                               ScoreOrientation orientation = ScoreOrientation::margin,
                               std::span<const std::int64_t> ids = {});

// Removes every sample whose margin is below the threshold.
PruningPlan filter_below_margin(std::span<const double> margins, double threshold,
                                std::span<const std::int64_t> ids = {});

// Retained = intersection of the retained sets; removed = union of the removed sets.
PruningPlan intersect(const PruningPlan& a, const PruningPlan& b);

// Per-epoch, per-sample correctness of a reference model.
struct CDHistory {
    std::vector<std::vector<std::uint8_t>> correct;  // [epoch][sample]

    std::size_t epochs() const { return correct.size(); }
    std::size_t samples() const { return correct.empty() ? 0 : correct.front().size(); }
};

// Fraction of epochs in which sample i was misclassified.
double cd_score(const CDHistory& history, std::size_t i);
std::vector<double> cd_scores(const CDHistory& history);

// Per-sample strength: -eps below -eps+g, m-g inside, eps above eps+g.
// Works for double and Rational.
template <typename T>
T schedule_epsilon(const T& m, const T& eps, const T& gap) {
    if (!(eps > T(0))) throw ContractViolation("schedule needs eps > 0");
    if (gap < T(0) || !(gap < eps)) throw ContractViolation("schedule needs 0 <= gap < eps");
    if (m <= -eps + gap) return -eps;
    if (m >= eps + gap) return eps;
    return m - gap;
}

struct EpsilonSchedule {
    double epsilon = 0.0;
    double gap = 0.0;
    std::vector<std::int64_t> sample_ids;
    std::vector<double> eps_i;
};

EpsilonSchedule epsilon_schedule(std::span<const double> margins, double eps, double gap,
                                 std::span<const std::int64_t> ids = {});

// CSV: sample_id,margin,epsilon_i (9 significant digits, sorted by id).
std::string format_schedule(const EpsilonSchedule& schedule, std::span<const double> margins);
EpsilonSchedule parse_schedule(const std::string& text);

// True (prune) iff the prediction at the segment point of parameter m_p is still
// correct. m_p may exceed eps, in which case the segment is extended past x'.
template <typename Model>
bool online_prune_decision(const Model& model, ConstSpan x, int y, ConstSpan xadv, double m_p, double eps) {
    require(eps > 0.0, "online pruning needs eps > 0");
    require(m_p > 0.0, "online pruning margin must be positive");
    return predict(model, segment_point_unchecked(x, xadv, m_p, eps)) == y;
}

std::uint64_t fnv1a64(const std::string& bytes);

// First line: JSON header {strategy, ratio, seed, manifest_hash, ...}; then one
// retained id per line, ascending. Reading restores the header and retained set.
std::string format_plan(const PruningPlan& plan);
PruningPlan parse_plan(const std::string& text);
void write_plan(const std::filesystem::path& path, const PruningPlan& plan);
PruningPlan read_plan(const std::filesystem::path& path);

}  // namespace mplab
