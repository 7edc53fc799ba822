#include "mplab/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "mplab/checkpoint.hpp"
#include "mplab/config.hpp"
#include "mplab/dataset.hpp"
#include "mplab/errors.hpp"
#include "mplab/io.hpp"
#include "mplab/margins.hpp"
#include "mplab/parallel.hpp"
#include "mplab/pruning.hpp"
#include "mplab/rational.hpp"
#include "mplab/sweep.hpp"
#include "mplab/training.hpp"

namespace mplab {

std::filesystem::path resolve_output_dir(const std::optional<std::string>& flag, const std::string& config_dir) {
    if (flag && !flag->empty()) return *flag;
    if (!config_dir.empty()) return config_dir;
    if (const char* env = std::getenv("MPLAB_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return ".";
}

namespace {

struct Options {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 0;

    // sweep / train / fit
    std::string config_path;
    std::string csv_path;
    std::string metric = "corr_error";
    double alpha_min = 0.0;
    double alpha_max = 1e300;

    // margin
    std::string model_path;
    std::string data_path;
    std::string method = "analytic";
    int max_iter = 50;
    double overshoot = 0.02;
    std::string norm = "linf";
    std::string step = "1/1000";
    int i_max = 1000;
    int j_max = 20;

    // prune / schedule
    std::string manifest_path;
    std::optional<std::string> strategy;
    std::optional<std::string> ratio;
    std::optional<std::string> threshold;
    bool difficulty = false;
    std::optional<std::string> eps;
    std::optional<std::string> gap;
    std::optional<std::string> mp;
    std::optional<std::string> name;
    bool write_data = false;
};

double real_flag(const std::string& flag, const std::string& value) {
    try {
        return parse_real(value);
    } catch (const ConfigError& e) {
        throw ConfigError("--" + flag + ": " + e.what());
    }
}

std::size_t jobs_of(const Options& o) { return o.jobs == 0 ? default_jobs() : o.jobs; }

std::filesystem::path target(const Options& o, const std::string& config_dir, const std::string& default_name) {
    return resolve_output_dir(o.out, config_dir) / o.name.value_or(default_name);
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg = load_config(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (cfg.task != "perceptron") throw ConfigError("sweep supports the perceptron task only");
    if (cfg.arms.empty() || cfg.epsilons.empty() || cfg.alphas.empty()) {
        throw ConfigError("sweep grid is empty (need sweep.arms, sweep.epsilons and sweep.alphas)");
    }
    std::vector<SweepRow> rows = run_sweep(cfg.sweep_grid(), jobs_of(o));
    std::size_t failed = 0;
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            ++failed;
            err << "cell " << r.strategy << " eps=" << fmt9(r.epsilon) << " alpha=" << fmt9(r.alpha)
                << " seed=" << r.seed << " failed: " << r.error << "\n";
        }
    }
    auto path = resolve_output_dir(o.out, cfg.output_dir) /
                o.name.value_or(cfg.output_name.empty() ? "sweep.csv" : cfg.output_name);
    write_results(rows, path);
    out << "wrote " << rows.size() << " rows (" << failed << " failed) to " << path.string() << "\n";
    return 0;
}

template <typename Model>
std::vector<MarginRecord> margins_for(const Model& model, const Dataset& data, const MarginRequest& req,
                                      std::size_t jobs) {
    return compute_margins(model, data.features, data.labels, data.sample_ids, req, jobs);
}

int cmd_margin(const Options& o, std::ostream& out) {
    AnyModel model = load_checkpoint(o.model_path);
    Dataset data = read_dataset(o.data_path);
    MarginRequest req;
    req.method = parse_margin_method(o.method);
    req.deepfool.max_iter = o.max_iter;
    req.deepfool.overshoot = o.overshoot;
    if (o.norm == "l2") {
        req.deepfool.norm = DeepFoolNorm::l2;
    } else if (o.norm != "linf") {
        throw ConfigError("--norm must be linf or l2");
    }
    req.fast.step = real_flag("step", o.step);
    req.fast.i_max = o.i_max;
    req.fast.j_max = o.j_max;
    req.online_j_max = o.j_max;
    if (req.method == MarginMethod::online) {
        if (!o.eps) throw ConfigError("--method online needs --eps");
        double eps = real_flag("eps", *o.eps);
        if (!(eps > 0.0)) throw ConfigError("--eps must be positive");
        bool linear = std::holds_alternative<LinearModel>(model);
        req.online_attack = bim_config(eps, linear ? eps : eps / 4.0, linear ? 1 : 10);
    }
    std::vector<MarginRecord> records = std::visit(
        [&](const auto& m) { return margins_for(m, data, req, jobs_of(o)); }, model);
    auto path = target(o, "", "margins_" + o.method + ".csv");
    write_margin_manifest(path, records);
    out << "wrote " << records.size() << " margins to " << path.string() << "\n";
    return 0;
}

int cmd_prune(const Options& o, std::ostream& out) {
    if (!o.strategy) throw ConfigError("prune needs --strategy");
    PruneStrategy strategy = parse_prune_strategy(*o.strategy);
    std::string text = read_file(o.manifest_path);
    std::vector<MarginRecord> records = parse_margin_manifest(text);
    std::vector<double> scores;
    std::vector<std::int64_t> ids;
    for (const auto& r : records) {
        scores.push_back(r.margin);
        ids.push_back(r.sample_id);
    }
    ScoreOrientation orient = o.difficulty ? ScoreOrientation::difficulty : ScoreOrientation::margin;
    std::uint64_t seed = o.seed.value_or(0);
    PruningPlan plan;
    if (strategy == PruneStrategy::filter_below) {
        if (!o.threshold) throw ConfigError("--strategy filter needs --threshold");
        plan = filter_below_margin(scores, real_flag("threshold", *o.threshold), ids);
    } else if (o.threshold) {
        plan = prune_by_threshold(scores, strategy, real_flag("threshold", *o.threshold), orient, ids);
    } else {
        double ratio = o.ratio ? real_flag("ratio", *o.ratio) : 0.0;
        if (ratio < 0.0 || ratio > 1.0) throw ConfigError("--ratio must lie in [0, 1]");
        plan = rank_and_prune(scores, strategy, ratio, seed, orient, ids);
    }
    plan.seed = seed;
    plan.manifest_hash = fnv1a64(text);
    auto path = target(o, "", "plan.txt");
    write_plan(path, plan);
    out << "retained " << plan.retained.size() << " of " << scores.size() << "; wrote " << path.string() << "\n";
    return 0;
}

int cmd_schedule(const Options& o, std::ostream& out) {
    if (!o.eps) throw ConfigError("schedule needs --eps");
    double eps = real_flag("eps", *o.eps);
    double gap = o.gap ? real_flag("gap", *o.gap) : 0.0;
    if (!(eps > 0.0) || gap < 0.0 || !(gap < eps)) throw ConfigError("schedule needs eps > 0 and 0 <= gap < eps");
    std::vector<MarginRecord> records = read_margin_manifest(o.manifest_path);
    std::vector<double> margins;
    std::vector<std::int64_t> ids;
    for (const auto& r : records) {
        margins.push_back(r.margin);
        ids.push_back(r.sample_id);
    }
    EpsilonSchedule s = epsilon_schedule(margins, eps, gap, ids);
    auto path = target(o, "", "schedule.csv");
    write_file_atomic(path, format_schedule(s, margins));
    out << "wrote " << s.eps_i.size() << " strengths to " << path.string() << "\n";
    return 0;
}

std::vector<double> manifest_margins(const std::filesystem::path& path, const Dataset& data) {
    std::unordered_map<std::int64_t, double> by_id;
    for (const auto& r : read_margin_manifest(path)) by_id[r.sample_id] = r.margin;
    std::vector<double> out;
    out.reserve(data.size());
    for (auto id : data.sample_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ConfigError("margin manifest lacks sample id " + std::to_string(id));
        out.push_back(it->second);
    }
    return out;
}

int train_perceptron(const ExperimentConfig& cfg, const std::filesystem::path& base, const Options& o,
                     std::ostream& out) {
    const PruningSettings& p = cfg.pruning;
    const std::size_t R = retained_target(cfg.alpha, cfg.K);
    const double ratio = p.strategy == PruneStrategy::none ? 0.0 : p.ratio;
    const std::size_t n = p.strategy == PruneStrategy::filter_below ? R : pre_pruning_size(R, ratio);
    Dataset data = generate_teacher_dataset(cfg.K, n, derive_seed(cfg.seed, {1}));
    TrainConfig tc = cfg.train_config();
    tc.seed = derive_seed(cfg.seed, {2});

    std::vector<double> margins = *data.true_margins;
    if (p.source == MarginSource::manifest) {
        std::filesystem::path m = p.manifest;
        if (m.is_relative()) m = base / m;
        margins = manifest_margins(m, data);
    }

    PruningPlan plan = p.strategy == PruneStrategy::filter_below
                           ? filter_below_margin(margins, p.filter_threshold.value_or(p.ratio), data.sample_ids)
                           : rank_and_prune(margins, p.strategy, ratio, tc.seed, ScoreOrientation::margin,
                                            data.sample_ids);
    if (p.filter_threshold && p.strategy != PruneStrategy::filter_below) {
        plan = intersect(filter_below_margin(margins, *p.filter_threshold, data.sample_ids), plan);
    }
    plan.seed = tc.seed;

    const std::filesystem::path dir = resolve_output_dir(o.out, cfg.output_dir);
    LinearModel model;
    nlohmann::ordered_json metrics;
    if (p.source == MarginSource::online) {
        OnlineConfig oc;
        oc.gap = p.gap;
        oc.j_max = p.j_max;
        oc.prune_margin = p.m_p;
        OnlineResult res = train_student_online(data, plan, oc, tc);
        model = res.model;
        metrics["online_skipped"] = res.skipped;
        metrics["online_no_solution"] = res.no_solution;
    } else {
        std::optional<EpsilonSchedule> schedule;
        if (p.schedule) {
            schedule = epsilon_schedule(margins, tc.epsilon, p.gap, data.sample_ids);
            write_file_atomic(dir / "schedule.csv", format_schedule(*schedule, margins));
        }
        model = train_student(data, plan, schedule ? &*schedule : nullptr, tc).model;
    }
    LinearModel teacher = canonical_teacher(cfg.K);
    Dataset test = generate_teacher_dataset(cfg.K, cfg.n_test, derive_seed(cfg.seed, {3}));
    metrics["retained"] = plan.retained.size();
    metrics["corr_error"] = correlation_error(teacher.weights, model.weights);
    metrics["clean_error"] = gaussian_clean_error(teacher.weights, model.weights);
    metrics["robust_error"] =
        cfg.n_test == 0 ? 0.0
                        : 1.0 - robust_accuracy(model, test, tc.epsilon, default_eval_attack(tc.epsilon),
                                                derive_seed(cfg.seed, {4}));

    save_checkpoint(model, dir / "model.txt");
    write_plan(dir / "plan.txt", plan);
    if (o.write_data) write_dataset(dir / "data.csv", data);
    write_file_atomic(dir / o.name.value_or("metrics.json"), metrics.dump(2) + "\n");
    out << metrics.dump() << "\n";
    return 0;
}

int train_toy(const ExperimentConfig& cfg, const Options& o, std::ostream& out) {
    Dataset data = make_toy_multiclass(cfg.classes, cfg.n_train, derive_seed(cfg.seed, {1}), cfg.blob_radius,
                                       cfg.blob_sigma);
    Dataset test = make_toy_multiclass(cfg.classes, cfg.n_test, derive_seed(cfg.seed, {3}), cfg.blob_radius,
                                       cfg.blob_sigma);
    TrainConfig tc = cfg.train_config();
    tc.seed = derive_seed(cfg.seed, {2});
    MlpResult res = train_mlp(data, cfg.hidden, tc);
    nlohmann::ordered_json metrics;
    metrics["train_accuracy"] = clean_accuracy(res.model, data);
    metrics["test_accuracy"] = clean_accuracy(res.model, test);
    double eps = tc.epsilon;
    metrics["robust_accuracy"] =
        robust_accuracy(res.model, test, eps, default_eval_attack(eps), derive_seed(cfg.seed, {4}));
    const std::filesystem::path dir = resolve_output_dir(o.out, cfg.output_dir);
    save_checkpoint(res.model, dir / "model.txt");
    write_dataset(dir / "data.csv", data);
    write_file_atomic(dir / o.name.value_or("metrics.json"), metrics.dump(2) + "\n");
    out << metrics.dump() << "\n";
    return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
    ExperimentConfig cfg = load_config(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.eps) cfg.epsilon = real_flag("eps", *o.eps);
    if (o.gap) cfg.pruning.gap = real_flag("gap", *o.gap);
    if (o.mp) cfg.pruning.m_p = real_flag("mp", *o.mp);
    if (o.strategy) cfg.pruning.strategy = parse_prune_strategy(*o.strategy);
    if (o.ratio) cfg.pruning.ratio = real_flag("ratio", *o.ratio);
    validate_config(cfg);
    if (cfg.task == "toy-mlp") return train_toy(cfg, o, out);
    return train_perceptron(cfg, std::filesystem::path(o.config_path).parent_path(), o, out);
}

int cmd_fit(const Options& o, std::ostream& out) {
    std::vector<SweepRow> rows = parse_sweep_csv(read_file(o.csv_path));
    auto fits = fit_groups(rows, parse_metric(o.metric), o.alpha_min, o.alpha_max);
    out << "strategy,epsilon,prune_ratio,slope,intercept,residual\n";
    for (const auto& g : fits) {
        out << g.strategy << "," << fmt9(g.epsilon) << "," << fmt9(g.prune_ratio) << "," << fmt9(g.slope) << ","
            << fmt9(g.intercept) << "," << fmt9(g.residual) << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"margin-based data pruning lab", "mplab"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "master seed override");
        sub->add_option("--jobs", o.jobs, "worker threads (0 = logical cores)");
        sub->add_option("--name", o.name, "output file name");
    };

    auto* sweep = app.add_subcommand("sweep", "run a sweep grid and write its CSV");
    sweep->add_option("config", o.config_path)->required();
    common(sweep);

    auto* margin = app.add_subcommand("margin", "write a margin manifest for a model and dataset");
    margin->add_option("model", o.model_path)->required();
    margin->add_option("data", o.data_path)->required();
    margin->add_option("--method", o.method)->check(CLI::IsMember({"analytic", "deepfool", "fast", "online"}));
    margin->add_option("--eps", o.eps, "segment radius for --method online");
    margin->add_option("--max-iter", o.max_iter);
    margin->add_option("--overshoot", o.overshoot);
    margin->add_option("--norm", o.norm);
    margin->add_option("--step", o.step, "fast-margin step");
    margin->add_option("--imax", o.i_max);
    margin->add_option("--jmax", o.j_max);
    common(margin);

    auto* prune = app.add_subcommand("prune", "turn a margin manifest into a pruning plan");
    prune->add_option("manifest", o.manifest_path)->required();
    prune->add_option("--strategy", o.strategy);
    prune->add_option("--ratio", o.ratio);
    prune->add_option("--threshold", o.threshold);
    prune->add_flag("--difficulty", o.difficulty, "scores are difficulties (high = hard)");
    common(prune);

    auto* schedule = app.add_subcommand("schedule", "per-sample attack strengths from a margin manifest");
    schedule->add_option("manifest", o.manifest_path)->required();
    schedule->add_option("--eps", o.eps);
    schedule->add_option("--gap", o.gap);
    common(schedule);

    auto* train = app.add_subcommand("train", "single training run");
    train->add_option("config", o.config_path)->required();
    train->add_option("--eps", o.eps);
    train->add_option("--gap", o.gap);
    train->add_option("--mp", o.mp);
    train->add_option("--strategy", o.strategy);
    train->add_option("--ratio", o.ratio);
    train->add_flag("--write-data", o.write_data);
    common(train);

    auto* fit = app.add_subcommand("fit", "log-log slopes of a sweep CSV");
    fit->add_option("csv", o.csv_path)->required();
    fit->add_option("--metric", o.metric)->check(CLI::IsMember({"corr_error", "clean_error", "robust_error"}));
    fit->add_option("--alpha-min", o.alpha_min);
    fit->add_option("--alpha-max", o.alpha_max);

    std::vector<std::string> argv_store;
    argv_store.push_back("mplab");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*sweep) return cmd_sweep(o, out, err);
        if (*margin) return cmd_margin(o, out);
        if (*prune) return cmd_prune(o, out);
        if (*schedule) return cmd_schedule(o, out);
        if (*train) return cmd_train(o, out);
        if (*fit) return cmd_fit(o, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    err << app.help();
    return 1;
}

}  // namespace mplab

