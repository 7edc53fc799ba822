#include "mplab/sweep.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "mplab/errors.hpp"
#include "mplab/io.hpp"
#include "mplab/parallel.hpp"
#include "mplab/rational.hpp"
#include "mplab/scaling.hpp"
#include "mplab/stats.hpp"

namespace mplab {

namespace {
enum SeedTag : std::uint64_t { tag_data = 1, tag_train = 2, tag_test = 3, tag_eval = 4, tag_prune = 5 };

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }
}  // namespace

std::string SweepArm::label() const {
    if (filter) return to_string(strategy) + "+filter";
    return to_string(strategy);
}

std::size_t retained_target(double alpha, std::size_t K) {
    require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive");
    double r = std::round(alpha * static_cast<double>(K));
    require(r >= 1.0, "alpha * K rounds to an empty training set");
    return static_cast<std::size_t>(r);
}

std::size_t pre_pruning_size(std::size_t retained, double ratio) {
    require(ratio >= 0.0 && ratio < 1.0, "pruning ratio must lie in [0, 1)");
    require(retained >= 1, "retained size must be positive");
    double start = std::floor((static_cast<double>(retained) - 0.5) / (1.0 - ratio)) - 1.0;
    std::size_t n = start > 0.0 ? static_cast<std::size_t>(start) : 0;
    while (n - removed_count(ratio, n) < retained) ++n;
    if (n - removed_count(ratio, n) != retained) {
        throw ContractViolation("no pre-pruning size matches the retained target");
    }
    return n;
}

CellInputs make_cell(const SweepGrid& grid, const SweepArm& arm, double eps, double alpha, std::size_t seed_index) {
    const std::size_t R = retained_target(alpha, grid.K);
    const double ratio = arm.strategy == PruneStrategy::none ? 0.0 : arm.ratio;
    const std::size_t n = pre_pruning_size(R, ratio);

    CellInputs cell;
    cell.train = generate_teacher_dataset(grid.K, n, derive_seed(grid.master_seed, {tag_data, bits(alpha), seed_index}));
    const std::vector<double>& margins = *cell.train.true_margins;
    const std::uint64_t prune_seed = derive_seed(grid.master_seed, {tag_prune, bits(alpha), seed_index});

    if (arm.filter) {
        require(arm.strategy == PruneStrategy::prune_easy, "the low-margin filter composes with pe only");
        double threshold = arm.filter_threshold.value_or(eps);
        PruningPlan filtered = filter_below_margin(margins, threshold);
        if (filtered.removed.size() > n - R) {
            throw ContractViolation("filter removed more samples than the pruning budget");
        }
        PruningPlan easy = rank_and_prune_count(margins, PruneStrategy::prune_easy, n - R - filtered.removed.size(),
                                                prune_seed);
        cell.plan = intersect(filtered, easy);
        cell.plan.ratio = arm.ratio;
    } else {
        cell.plan = rank_and_prune(margins, arm.strategy, ratio, prune_seed);
    }
    if (cell.plan.retained.size() != R) {
        throw ContractViolation("retained set size does not match alpha * K");
    }

    cell.cfg = grid.train;
    cell.cfg.epsilon = eps;
    cell.cfg.seed = derive_seed(grid.master_seed, {tag_train, bits(alpha), seed_index});
    cell.eval_seed = derive_seed(grid.master_seed, {tag_eval, bits(alpha), bits(eps), seed_index});
    return cell;
}

Dataset make_test_set(const SweepGrid& grid, std::size_t seed_index) {
    return generate_teacher_dataset(grid.K, grid.n_test, derive_seed(grid.master_seed, {tag_test, seed_index}));
}

SweepRow run_cell(const SweepGrid& grid, const SweepArm& arm, double eps, double alpha, std::size_t seed_index) {
    SweepRow row;
    row.strategy = arm.label();
    row.epsilon = eps;
    row.alpha = alpha;
    row.prune_ratio = arm.strategy == PruneStrategy::none ? 0.0 : arm.ratio;
    row.seed = static_cast<std::int64_t>(seed_index);
    try {
        CellInputs cell = make_cell(grid, arm, eps, alpha, seed_index);
        StudentResult res = train_student(cell.train, cell.plan, nullptr, cell.cfg);
        LinearModel teacher = canonical_teacher(grid.K);
        row.corr_error = correlation_error(teacher.weights, res.model.weights);
        row.clean_error = gaussian_clean_error(teacher.weights, res.model.weights);
        if (grid.n_test > 0) {
            Dataset test = make_test_set(grid, seed_index);
            row.robust_error = 1.0 - robust_accuracy(res.model, test, eps, default_eval_attack(eps), cell.eval_seed);
        } else {
            row.robust_error = std::numeric_limits<double>::quiet_NaN();
        }
    } catch (const std::exception& e) {
        row.error = e.what();
        row.corr_error = row.clean_error = row.robust_error = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
}

void sort_rows(std::vector<SweepRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.strategy, a.epsilon, a.alpha, a.prune_ratio, a.seed) <
               std::tie(b.strategy, b.epsilon, b.alpha, b.prune_ratio, b.seed);
    });
}

std::vector<SweepRow> run_sweep(const SweepGrid& grid, std::size_t jobs) {
    require(!grid.arms.empty() && !grid.epsilons.empty() && !grid.alphas.empty() && grid.seeds >= 1,
            "sweep grid is empty");
    struct Key {
        std::size_t arm, eps, alpha, seed;
    };
    std::vector<Key> keys;
    for (std::size_t a = 0; a < grid.arms.size(); ++a)
        for (std::size_t e = 0; e < grid.epsilons.size(); ++e)
            for (std::size_t l = 0; l < grid.alphas.size(); ++l)
                for (std::size_t s = 0; s < grid.seeds; ++s) keys.push_back({a, e, l, s});

    std::vector<SweepRow> rows(keys.size());
    parallel_for(keys.size(), jobs, [&](std::size_t i) {
        const Key& k = keys[i];
        rows[i] = run_cell(grid, grid.arms[k.arm], grid.epsilons[k.eps], grid.alphas[k.alpha], k.seed);
    });
    sort_rows(rows);
    return rows;
}

namespace {
const char* kSweepHeader = "strategy,epsilon,alpha,prune_ratio,seed,corr_error,clean_error,robust_error";
}

std::string format_sweep_csv(std::vector<SweepRow> rows) {
    sort_rows(rows);
    std::string out = kSweepHeader;
    out += "\n";
    for (const auto& r : rows) {
        out += r.strategy + "," + fmt9(r.epsilon) + "," + fmt9(r.alpha) + "," + fmt9(r.prune_ratio) + "," +
               std::to_string(r.seed) + "," + fmt9(r.corr_error) + "," + fmt9(r.clean_error) + "," +
               fmt9(r.robust_error) + "\n";
    }
    return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kSweepHeader) {
        throw IoError("sweep csv: unexpected header");
    }
    auto num = [](const std::string& s) {
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        return parse_real(s);
    };
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto c = split(trim(line), ',');
        if (c.size() != 8) throw IoError("sweep csv: expected 8 columns");
        try {
            SweepRow r;
            r.strategy = c[0];
            r.epsilon = num(c[1]);
            r.alpha = num(c[2]);
            r.prune_ratio = num(c[3]);
            r.seed = std::stoll(c[4]);
            r.corr_error = num(c[5]);
            r.clean_error = num(c[6]);
            r.robust_error = num(c[7]);
            rows.push_back(r);
        } catch (const std::exception& e) {
            throw IoError(std::string("sweep csv: ") + e.what());
        }
    }
    return rows;
}

void write_results(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
    write_file_atomic(path, format_sweep_csv(rows));
}

Metric parse_metric(const std::string& s) {
    if (s == "corr_error") return Metric::corr_error;
    if (s == "clean_error") return Metric::clean_error;
    if (s == "robust_error") return Metric::robust_error;
    throw ConfigError("unknown metric '" + s + "'");
}

double metric_of(const SweepRow& row, Metric m) {
    switch (m) {
        case Metric::corr_error: return row.corr_error;
        case Metric::clean_error: return row.clean_error;
        case Metric::robust_error: return row.robust_error;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::vector<GroupFit> fit_groups(const std::vector<SweepRow>& rows, Metric metric, double alpha_min,
                                 double alpha_max) {
    std::map<std::tuple<std::string, double, double>, std::map<double, std::vector<double>>> groups;
    for (const auto& r : rows) {
        double v = metric_of(r, metric);
        if (std::isnan(v) || r.alpha < alpha_min || r.alpha > alpha_max) continue;
        groups[{r.strategy, r.epsilon, r.prune_ratio}][r.alpha].push_back(v);
    }
    std::vector<GroupFit> out;
    for (const auto& [key, by_alpha] : groups) {
        if (by_alpha.size() < 2) continue;
        GroupFit g;
        std::tie(g.strategy, g.epsilon, g.prune_ratio) = key;
        std::vector<std::pair<double, double>> pts;
        for (const auto& [alpha, vals] : by_alpha) {
            g.alphas.push_back(alpha);
            g.means.push_back(mean(vals));
            pts.emplace_back(alpha, g.means.back());
        }
        LogLogFit f = fit_loglog_slope(pts);
        g.slope = f.slope;
        g.intercept = f.intercept;
        g.residual = f.residual;
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace mplab
