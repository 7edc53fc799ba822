#include "mplab/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mplab/io.hpp"
#include "mplab/rational.hpp"

namespace mplab {

std::string to_string(PruneStrategy s) {
    switch (s) {
        case PruneStrategy::none: return "none";
        case PruneStrategy::prune_easy: return "pe";
        case PruneStrategy::prune_difficult: return "pd";
        case PruneStrategy::random: return "random";
        case PruneStrategy::filter_below: return "filter";
    }
    return "?";
}

PruneStrategy parse_prune_strategy(const std::string& s) {
    if (s == "none") return PruneStrategy::none;
    if (s == "pe" || s == "prune_easy") return PruneStrategy::prune_easy;
    if (s == "pd" || s == "prune_difficult") return PruneStrategy::prune_difficult;
    if (s == "random") return PruneStrategy::random;
    if (s == "filter" || s == "filter_below") return PruneStrategy::filter_below;
    throw ConfigError("unknown pruning strategy '" + s + "'");
}

std::size_t removed_count(double ratio, std::size_t n) {
    require(ratio >= 0.0 && ratio <= 1.0, "pruning ratio must lie in [0, 1]");
    return static_cast<std::size_t>(std::round(ratio * static_cast<double>(n)));
}

namespace {

std::vector<std::int64_t> resolve_ids(std::size_t n, std::span<const std::int64_t> ids) {
    if (ids.empty()) {
        std::vector<std::int64_t> out(n);
        std::iota(out.begin(), out.end(), std::int64_t{0});
        return out;
    }
    require(ids.size() == n, "scores and ids differ in length");
    return {ids.begin(), ids.end()};
}

void check_scores(std::span<const double> scores) {
    for (double s : scores) {
        require(!std::isnan(s), "scores must not be NaN");
    }
}

PruningPlan finish(PruningPlan plan, const std::vector<std::int64_t>& ids, const std::vector<std::uint8_t>& drop) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        (drop[i] ? plan.removed : plan.retained).push_back(ids[i]);
    }
    std::sort(plan.retained.begin(), plan.retained.end());
    std::sort(plan.removed.begin(), plan.removed.end());
    return plan;
}

}  // namespace

PruningPlan rank_and_prune_count(std::span<const double> scores, PruneStrategy strategy, std::size_t count,
                                 std::uint64_t seed, ScoreOrientation orientation,
                                 std::span<const std::int64_t> ids_in) {
    check_scores(scores);
    const std::size_t n = scores.size();
    auto ids = resolve_ids(n, ids_in);
    if (strategy == PruneStrategy::filter_below) {
        throw ContractViolation("filter_below is threshold-based; use filter_below_margin");
    }
    if (strategy == PruneStrategy::none) {
        require(count == 0, "strategy none removes nothing");
    }
    if (n == 0 || count >= n) {
        throw ContractViolation("pruning would leave an empty retained set");
    }

    PruningPlan plan;
    plan.strategy = strategy;
    plan.ratio = static_cast<double>(count) / static_cast<double>(n);
    plan.seed = seed;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (strategy == PruneStrategy::random) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(order[i - 1], order[j]);
        }
    } else if (strategy != PruneStrategy::none) {
        // PE drops the easy end, PD the hard end; orientation says which end is which.
        bool high_first = (strategy == PruneStrategy::prune_easy) == (orientation == ScoreOrientation::margin);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (scores[a] != scores[b]) return scores[a] < scores[b];
            return ids[a] < ids[b];
        });
        if (high_first) std::reverse(order.begin(), order.end());
    }
    std::vector<std::uint8_t> drop(n, 0);
    for (std::size_t r = 0; r < count; ++r) drop[order[r]] = 1;
    return finish(std::move(plan), ids, drop);
}

PruningPlan rank_and_prune(std::span<const double> scores, PruneStrategy strategy, double ratio, std::uint64_t seed,
                           ScoreOrientation orientation, std::span<const std::int64_t> ids) {
    if (strategy == PruneStrategy::filter_below) {
        return filter_below_margin(scores, ratio, ids);
    }
    std::size_t count = strategy == PruneStrategy::none ? 0 : removed_count(ratio, scores.size());
    PruningPlan plan = rank_and_prune_count(scores, strategy, count, seed, orientation, ids);
    plan.ratio = ratio;
    return plan;
}

PruningPlan prune_by_threshold(std::span<const double> scores, PruneStrategy strategy, double threshold,
                               ScoreOrientation orientation, std::span<const std::int64_t> ids_in) {
    check_scores(scores);
    require(strategy == PruneStrategy::prune_easy || strategy == PruneStrategy::prune_difficult,
            "threshold pruning supports pe and pd");
    auto ids = resolve_ids(scores.size(), ids_in);
    PruningPlan plan;
    plan.strategy = strategy;
    plan.ratio = threshold;
    std::vector<std::uint8_t> drop(scores.size(), 0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool hard = orientation == ScoreOrientation::margin ? scores[i] < threshold : scores[i] >= threshold;
        drop[i] = (strategy == PruneStrategy::prune_difficult) == hard;
    }
    plan = finish(std::move(plan), ids, drop);
    if (plan.retained.empty()) {
        throw ContractViolation("pruning would leave an empty retained set");
    }
    return plan;
}

PruningPlan filter_below_margin(std::span<const double> margins, double threshold,
                                std::span<const std::int64_t> ids_in) {
    check_scores(margins);
    require(threshold >= 0.0, "filter threshold must be >= 0");
    auto ids = resolve_ids(margins.size(), ids_in);
    PruningPlan plan;
    plan.strategy = PruneStrategy::filter_below;
    plan.ratio = threshold;
    plan.filter_threshold = threshold;
    std::vector<std::uint8_t> drop(margins.size(), 0);
    for (std::size_t i = 0; i < margins.size(); ++i) drop[i] = margins[i] < threshold;
    return finish(std::move(plan), ids, drop);
}

PruningPlan intersect(const PruningPlan& a, const PruningPlan& b) {
    PruningPlan out;
    const PruningPlan& primary = a.strategy == PruneStrategy::filter_below ? b : a;
    out.strategy = primary.strategy;
    out.ratio = primary.ratio;
    out.seed = primary.seed;
    out.manifest_hash = primary.manifest_hash;
    out.filter_threshold = a.filter_threshold ? a.filter_threshold : b.filter_threshold;
    std::set_intersection(a.retained.begin(), a.retained.end(), b.retained.begin(), b.retained.end(),
                          std::back_inserter(out.retained));
    std::set_union(a.removed.begin(), a.removed.end(), b.removed.begin(), b.removed.end(),
                   std::back_inserter(out.removed));
    return out;
}

double cd_score(const CDHistory& history, std::size_t i) {
    require(history.epochs() >= 1, "CD history needs at least one epoch");
    require(i < history.samples(), "sample index out of range");
    std::size_t wrong = 0;
    for (const auto& epoch : history.correct) {
        require(epoch.size() == history.samples(), "CD history must be rectangular");
        if (!epoch[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(history.epochs());
}

std::vector<double> cd_scores(const CDHistory& history) {
    std::vector<double> out(history.samples());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cd_score(history, i);
    return out;
}

EpsilonSchedule epsilon_schedule(std::span<const double> margins, double eps, double gap,
                                 std::span<const std::int64_t> ids) {
    require(eps > 0.0, "schedule needs eps > 0");
    require(gap >= 0.0 && gap < eps, "schedule needs 0 <= gap < eps");
    EpsilonSchedule s;
    s.epsilon = eps;
    s.gap = gap;
    s.sample_ids = resolve_ids(margins.size(), ids);
    s.eps_i.reserve(margins.size());
    for (double m : margins) {
        require(std::isfinite(m), "margins must be finite");
        s.eps_i.push_back(schedule_epsilon(m, eps, gap));
    }
    return s;
}

std::string format_schedule(const EpsilonSchedule& schedule, std::span<const double> margins) {
    require(margins.size() == schedule.eps_i.size(), "schedule and margins differ in length");
    std::vector<std::size_t> order(margins.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return schedule.sample_ids[a] < schedule.sample_ids[b]; });
    std::string out = "sample_id,margin,epsilon_i\n";
    for (std::size_t i : order) {
        out += std::to_string(schedule.sample_ids[i]) + "," + fmt9(margins[i]) + "," + fmt9(schedule.eps_i[i]) + "\n";
    }
    return out;
}

EpsilonSchedule parse_schedule(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "sample_id,margin,epsilon_i") {
        throw IoError("schedule: unexpected header");
    }
    EpsilonSchedule s;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cols = split(trim(line), ',');
        if (cols.size() != 3) throw IoError("schedule: expected 3 columns");
        try {
            s.sample_ids.push_back(std::stoll(cols[0]));
            double e = parse_real(cols[2]);
            s.eps_i.push_back(e);
            s.epsilon = std::max(s.epsilon, std::abs(e));
        } catch (const std::exception& e) {
            throw IoError(std::string("schedule: ") + e.what());
        }
    }
    return s;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {
std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}
}  // namespace

std::string format_plan(const PruningPlan& plan) {
    nlohmann::ordered_json h;
    h["strategy"] = to_string(plan.strategy);
    h["ratio"] = plan.ratio;
    h["seed"] = plan.seed;
    h["manifest_hash"] = hex64(plan.manifest_hash);
    if (plan.filter_threshold) h["filter_threshold"] = *plan.filter_threshold;
    h["retained"] = plan.retained.size();
    h["removed"] = plan.removed.size();
    std::string out = h.dump() + "\n";
    for (auto id : plan.retained) out += std::to_string(id) + "\n";
    return out;
}

PruningPlan parse_plan(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError("pruning plan: empty file");
    PruningPlan plan;
    try {
        auto h = nlohmann::json::parse(line);
        plan.strategy = parse_prune_strategy(h.at("strategy").get<std::string>());
        plan.ratio = h.at("ratio").get<double>();
        plan.seed = h.at("seed").get<std::uint64_t>();
        plan.manifest_hash = std::stoull(h.at("manifest_hash").get<std::string>(), nullptr, 16);
        if (h.contains("filter_threshold")) plan.filter_threshold = h["filter_threshold"].get<double>();
    } catch (const std::exception& e) {
        throw IoError(std::string("pruning plan header: ") + e.what());
    }
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            plan.retained.push_back(std::stoll(trim(line)));
        } catch (const std::exception&) {
            throw IoError("pruning plan: bad sample id '" + line + "'");
        }
    }
    std::sort(plan.retained.begin(), plan.retained.end());
    return plan;
}

void write_plan(const std::filesystem::path& path, const PruningPlan& plan) {
    write_file_atomic(path, format_plan(plan));
}

PruningPlan read_plan(const std::filesystem::path& path) { return parse_plan(read_file(path)); }

}  // namespace mplab
