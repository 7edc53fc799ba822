#include "mplab/config.hpp"

#include <cmath>
#include <set>

#include <yaml-cpp/yaml.h>

#include "mplab/errors.hpp"
#include "mplab/io.hpp"
#include "mplab/rational.hpp"

namespace mplab {

namespace {

std::string where(const std::string& path) { return "config key '" + path + "'"; }

void check_keys(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) throw ConfigError(where(path) + " must be a mapping");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
        auto key = kv.first.as<std::string>();
        if (!ok.count(key)) throw ConfigError("unknown " + where(path.empty() ? key : path + "." + key));
    }
}

std::string scalar(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) throw ConfigError(where(path) + " must be a scalar");
    return n.Scalar();
}

double real(const YAML::Node& n, const std::string& path) {
    try {
        return parse_real(scalar(n, path));
    } catch (const ConfigError& e) {
        throw ConfigError(where(path) + ": " + e.what());
    }
}

std::uint64_t uint(const YAML::Node& n, const std::string& path) {
    std::string s = scalar(n, path);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(where(path) + " must be a nonnegative integer");
    }
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ConfigError(where(path) + " is out of range");
    }
}

bool boolean(const YAML::Node& n, const std::string& path) {
    std::string s = scalar(n, path);
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError(where(path) + " must be true or false");
}

std::vector<double> real_list(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence()) throw ConfigError(where(path) + " must be a list");
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(real(n[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

template <typename Fn>
void opt(const YAML::Node& parent, const char* key, Fn&& fn) {
    if (parent[key]) fn(parent[key]);
}

MarginSource parse_source(const std::string& s) {
    if (s == "truth") return MarginSource::truth;
    if (s == "manifest") return MarginSource::manifest;
    if (s == "online") return MarginSource::online;
    throw ConfigError("unknown margin source '" + s + "'");
}

const char* source_name(MarginSource s) {
    switch (s) {
        case MarginSource::truth: return "truth";
        case MarginSource::manifest: return "manifest";
        case MarginSource::online: return "online";
    }
    return "?";
}

}  // namespace

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig t;
    t.epsilon = epsilon;
    t.epochs = epochs;
    t.batch = batch;
    t.lr = lr;
    t.weight_decay = weight_decay;
    t.loss = task == "toy-mlp" ? LossKind::cross_entropy : LossKind::logistic_margin;
    t.attack = attack;
    t.pgd_iters = pgd_iters;
    t.pgd_step = pgd_step;
    t.seed = seed;
    return t;
}

SweepGrid ExperimentConfig::sweep_grid() const {
    SweepGrid g;
    g.K = K;
    g.arms = arms;
    g.epsilons = epsilons;
    g.alphas = alphas;
    g.seeds = seeds;
    g.master_seed = seed;
    g.train = train_config();
    g.n_test = n_test;
    return g;
}

ExperimentConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config is not valid YAML: ") + e.what());
    }
    ExperimentConfig c;
    if (root.IsNull()) {
        validate_config(c);
        return c;
    }
    check_keys(root, "", {"task", "seed", "output", "model", "data", "train", "sweep", "pruning"});
    opt(root, "task", [&](const YAML::Node& n) { c.task = scalar(n, "task"); });
    opt(root, "seed", [&](const YAML::Node& n) { c.seed = uint(n, "seed"); });
    opt(root, "output", [&](const YAML::Node& n) {
        check_keys(n, "output", {"dir", "name"});
        opt(n, "dir", [&](const YAML::Node& v) { c.output_dir = scalar(v, "output.dir"); });
        opt(n, "name", [&](const YAML::Node& v) { c.output_name = scalar(v, "output.name"); });
    });
    opt(root, "model", [&](const YAML::Node& n) {
        check_keys(n, "model", {"K", "hidden", "classes"});
        opt(n, "K", [&](const YAML::Node& v) { c.K = uint(v, "model.K"); });
        opt(n, "hidden", [&](const YAML::Node& v) { c.hidden = uint(v, "model.hidden"); });
        opt(n, "classes", [&](const YAML::Node& v) { c.classes = uint(v, "model.classes"); });
    });
    opt(root, "data", [&](const YAML::Node& n) {
        check_keys(n, "data", {"alpha", "n", "blob_radius", "blob_sigma"});
        opt(n, "alpha", [&](const YAML::Node& v) { c.alpha = real(v, "data.alpha"); });
        opt(n, "n", [&](const YAML::Node& v) { c.n_train = uint(v, "data.n"); });
        opt(n, "blob_radius", [&](const YAML::Node& v) { c.blob_radius = real(v, "data.blob_radius"); });
        opt(n, "blob_sigma", [&](const YAML::Node& v) { c.blob_sigma = real(v, "data.blob_sigma"); });
    });
    opt(root, "train", [&](const YAML::Node& n) {
        check_keys(n, "train",
                   {"epsilon", "epochs", "batch", "lr", "weight_decay", "attack", "pgd_iters", "pgd_step"});
        opt(n, "epsilon", [&](const YAML::Node& v) { c.epsilon = real(v, "train.epsilon"); });
        opt(n, "epochs", [&](const YAML::Node& v) { c.epochs = static_cast<int>(uint(v, "train.epochs")); });
        opt(n, "batch", [&](const YAML::Node& v) { c.batch = uint(v, "train.batch"); });
        opt(n, "lr", [&](const YAML::Node& v) { c.lr = real(v, "train.lr"); });
        opt(n, "weight_decay", [&](const YAML::Node& v) { c.weight_decay = real(v, "train.weight_decay"); });
        opt(n, "attack", [&](const YAML::Node& v) { c.attack = parse_attack_kind(scalar(v, "train.attack")); });
        opt(n, "pgd_iters", [&](const YAML::Node& v) { c.pgd_iters = static_cast<int>(uint(v, "train.pgd_iters")); });
        opt(n, "pgd_step", [&](const YAML::Node& v) { c.pgd_step = real(v, "train.pgd_step"); });
    });
    opt(root, "sweep", [&](const YAML::Node& n) {
        check_keys(n, "sweep", {"arms", "epsilons", "alphas", "seeds", "n_test"});
        opt(n, "arms", [&](const YAML::Node& v) {
            if (!v.IsSequence()) throw ConfigError(where("sweep.arms") + " must be a list");
            for (std::size_t i = 0; i < v.size(); ++i) {
                std::string p = "sweep.arms[" + std::to_string(i) + "]";
                check_keys(v[i], p, {"strategy", "ratio", "filter", "filter_threshold"});
                SweepArm arm;
                if (!v[i]["strategy"]) throw ConfigError(where(p + ".strategy") + " is required");
                arm.strategy = parse_prune_strategy(scalar(v[i]["strategy"], p + ".strategy"));
                opt(v[i], "ratio", [&](const YAML::Node& x) { arm.ratio = real(x, p + ".ratio"); });
                opt(v[i], "filter", [&](const YAML::Node& x) { arm.filter = boolean(x, p + ".filter"); });
                opt(v[i], "filter_threshold",
                    [&](const YAML::Node& x) { arm.filter_threshold = real(x, p + ".filter_threshold"); });
                c.arms.push_back(arm);
            }
        });
        opt(n, "epsilons", [&](const YAML::Node& v) { c.epsilons = real_list(v, "sweep.epsilons"); });
        opt(n, "alphas", [&](const YAML::Node& v) { c.alphas = real_list(v, "sweep.alphas"); });
        opt(n, "seeds", [&](const YAML::Node& v) { c.seeds = uint(v, "sweep.seeds"); });
        opt(n, "n_test", [&](const YAML::Node& v) { c.n_test = uint(v, "sweep.n_test"); });
    });
    opt(root, "pruning", [&](const YAML::Node& n) {
        check_keys(n, "pruning",
                   {"strategy", "ratio", "source", "manifest", "filter_threshold", "schedule", "gap", "m_p", "j_max"});
        PruningSettings& p = c.pruning;
        opt(n, "strategy", [&](const YAML::Node& v) { p.strategy = parse_prune_strategy(scalar(v, "pruning.strategy")); });
        opt(n, "ratio", [&](const YAML::Node& v) { p.ratio = real(v, "pruning.ratio"); });
        opt(n, "source", [&](const YAML::Node& v) { p.source = parse_source(scalar(v, "pruning.source")); });
        opt(n, "manifest", [&](const YAML::Node& v) { p.manifest = scalar(v, "pruning.manifest"); });
        opt(n, "filter_threshold",
            [&](const YAML::Node& v) { p.filter_threshold = real(v, "pruning.filter_threshold"); });
        opt(n, "schedule", [&](const YAML::Node& v) { p.schedule = boolean(v, "pruning.schedule"); });
        opt(n, "gap", [&](const YAML::Node& v) { p.gap = real(v, "pruning.gap"); });
        opt(n, "m_p", [&](const YAML::Node& v) { p.m_p = real(v, "pruning.m_p"); });
        opt(n, "j_max", [&](const YAML::Node& v) { p.j_max = static_cast<int>(uint(v, "pruning.j_max")); });
    });
    validate_config(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    ExperimentConfig c = parse_config(text);
    validate_config(c, path.parent_path());
    return c;
}

void validate_config(const ExperimentConfig& c, const std::optional<std::filesystem::path>& base_dir) {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(c.task == "perceptron" || c.task == "toy-mlp", "task must be perceptron or toy-mlp");
    need(c.K >= 1, "model.K must be >= 1");
    need(c.hidden >= 1, "model.hidden must be >= 1");
    need(c.classes >= 2, "model.classes must be >= 2");
    need(c.alpha > 0.0, "data.alpha must be positive");
    need(c.n_train >= 1, "data.n must be positive");
    need(c.blob_sigma > 0.0, "data.blob_sigma must be positive");
    need(c.epsilon >= 0.0 && std::isfinite(c.epsilon), "train.epsilon must be finite and >= 0");
    need(c.epochs >= 1, "train.epochs must be positive");
    need(c.batch >= 1, "train.batch must be positive");
    need(c.lr > 0.0, "train.lr must be positive");
    need(c.weight_decay >= 0.0, "train.weight_decay must be >= 0");
    need(c.pgd_iters >= 1, "train.pgd_iters must be positive");
    need(c.pgd_step >= 0.0, "train.pgd_step must be >= 0");
    need(c.seeds >= 1, "sweep.seeds must be positive");
    for (const auto& arm : c.arms) {
        need(arm.ratio >= 0.0 && arm.ratio < 1.0, "sweep arm ratio must lie in [0, 1)");
        need(!arm.filter || arm.strategy == PruneStrategy::prune_easy, "the filter composes with pe only");
        need(arm.strategy != PruneStrategy::filter_below, "use filter: true on a pe arm instead of a filter arm");
    }
    for (double e : c.epsilons) need(e >= 0.0 && std::isfinite(e), "sweep epsilons must be finite and >= 0");
    for (double a : c.alphas) need(a > 0.0 && std::isfinite(a), "sweep alphas must be positive");
    const PruningSettings& p = c.pruning;
    need(p.ratio >= 0.0 && p.ratio < 1.0, "pruning.ratio must lie in [0, 1)");
    need(p.gap >= 0.0, "pruning.gap must be >= 0");
    need(p.j_max >= 1, "pruning.j_max must be positive");
    if (p.schedule) {
        need(c.epsilon > 0.0, "a margin schedule needs train.epsilon > 0");
        need(p.gap < c.epsilon, "pruning.gap must be below train.epsilon");
    }
    if (p.m_p) need(*p.m_p > 0.0, "pruning.m_p must be positive");
    if (p.source == MarginSource::manifest) {
        need(!p.manifest.empty(), "pruning.manifest is required when source is manifest");
        if (base_dir) {
            std::filesystem::path m = p.manifest;
            if (m.is_relative()) m = *base_dir / m;
            need(std::filesystem::exists(m), "pruning.manifest not found: " + m.string());
        }
    }
}

std::string format_config(const ExperimentConfig& c) {
    YAML::Emitter out;
    auto num = [](double v) { return fmt17(v); };
    out << YAML::BeginMap;
    out << YAML::Key << "task" << YAML::Value << c.task;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "dir" << YAML::Value << YAML::DoubleQuoted << c.output_dir;
    out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << c.output_name;
    out << YAML::EndMap;
    out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "K" << YAML::Value << c.K;
    out << YAML::Key << "hidden" << YAML::Value << c.hidden;
    out << YAML::Key << "classes" << YAML::Value << c.classes;
    out << YAML::EndMap;
    out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "alpha" << YAML::Value << num(c.alpha);
    out << YAML::Key << "n" << YAML::Value << c.n_train;
    out << YAML::Key << "blob_radius" << YAML::Value << num(c.blob_radius);
    out << YAML::Key << "blob_sigma" << YAML::Value << num(c.blob_sigma);
    out << YAML::EndMap;
    out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "epsilon" << YAML::Value << num(c.epsilon);
    out << YAML::Key << "epochs" << YAML::Value << c.epochs;
    out << YAML::Key << "batch" << YAML::Value << c.batch;
    out << YAML::Key << "lr" << YAML::Value << num(c.lr);
    out << YAML::Key << "weight_decay" << YAML::Value << num(c.weight_decay);
    out << YAML::Key << "attack" << YAML::Value << to_string(c.attack);
    out << YAML::Key << "pgd_iters" << YAML::Value << c.pgd_iters;
    out << YAML::Key << "pgd_step" << YAML::Value << num(c.pgd_step);
    out << YAML::EndMap;
    out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "arms" << YAML::Value << YAML::BeginSeq;
    for (const auto& arm : c.arms) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "strategy" << YAML::Value << to_string(arm.strategy);
        out << YAML::Key << "ratio" << YAML::Value << num(arm.ratio);
        out << YAML::Key << "filter" << YAML::Value << (arm.filter ? "true" : "false");
        if (arm.filter_threshold) out << YAML::Key << "filter_threshold" << YAML::Value << num(*arm.filter_threshold);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "epsilons" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double e : c.epsilons) out << num(e);
    out << YAML::EndSeq;
    out << YAML::Key << "alphas" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double a : c.alphas) out << num(a);
    out << YAML::EndSeq;
    out << YAML::Key << "seeds" << YAML::Value << c.seeds;
    out << YAML::Key << "n_test" << YAML::Value << c.n_test;
    out << YAML::EndMap;
    const PruningSettings& p = c.pruning;
    out << YAML::Key << "pruning" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "strategy" << YAML::Value << to_string(p.strategy);
    out << YAML::Key << "ratio" << YAML::Value << num(p.ratio);
    out << YAML::Key << "source" << YAML::Value << source_name(p.source);
    out << YAML::Key << "manifest" << YAML::Value << YAML::DoubleQuoted << p.manifest;
    if (p.filter_threshold) out << YAML::Key << "filter_threshold" << YAML::Value << num(*p.filter_threshold);
    out << YAML::Key << "schedule" << YAML::Value << (p.schedule ? "true" : "false");
    out << YAML::Key << "gap" << YAML::Value << num(p.gap);
    if (p.m_p) out << YAML::Key << "m_p" << YAML::Value << num(*p.m_p);
    out << YAML::Key << "j_max" << YAML::Value << p.j_max;
    out << YAML::EndMap;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace mplab
