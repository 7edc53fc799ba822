#include "mplab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "mplab/errors.hpp"
#include "mplab/margins.hpp"

namespace mplab {

std::string to_string(AttackKind k) { return k == AttackKind::fgsm ? "fgsm" : "pgd"; }

AttackKind parse_attack_kind(const std::string& s) {
    if (s == "fgsm") return AttackKind::fgsm;
    if (s == "pgd") return AttackKind::pgd;
    throw ConfigError("unknown attack kind '" + s + "'");
}

void validate(const TrainConfig& cfg) {
    require(cfg.epsilon >= 0.0 && std::isfinite(cfg.epsilon), "training eps must be finite and >= 0");
    require(cfg.epochs >= 1, "epochs must be positive");
    require(cfg.batch >= 1, "batch size must be positive");
    require(cfg.lr > 0.0, "learning rate must be positive");
    require(cfg.weight_decay >= 0.0, "weight decay must be >= 0");
    require(cfg.pgd_iters >= 1, "pgd iterations must be positive");
    require(cfg.pgd_step >= 0.0, "pgd step must be >= 0");
}

namespace {

void shuffle_in_place(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

std::vector<std::size_t> retained_rows(const Dataset& data, const PruningPlan& plan) {
    std::unordered_map<std::int64_t, std::size_t> row_of;
    row_of.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) row_of.emplace(data.sample_ids[i], i);
    std::vector<std::size_t> rows;
    if (plan.strategy == PruneStrategy::none && plan.retained.empty() && plan.removed.empty()) {
        rows.resize(data.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    } else {
        rows.reserve(plan.retained.size());
        for (auto id : plan.retained) {
            auto it = row_of.find(id);
            require(it != row_of.end(), "plan references an unknown sample id");
            rows.push_back(it->second);
        }
    }
    if (rows.empty()) {
        throw ContractViolation("training set is empty after pruning");
    }
    return rows;
}

AttackConfig pgd_config(const TrainConfig& cfg, double eps) {
    AttackConfig a;
    a.epsilon = eps;
    a.step = cfg.pgd_step > 0.0 ? cfg.pgd_step : eps / 4.0;
    a.iters = cfg.pgd_iters;
    a.random_init = true;
    return a;
}

void record_epoch(CDHistory& history, const LinearModel& model, const Dataset& data) {
    std::vector<std::uint8_t> ok(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) ok[i] = predict(model, data.features[i]) == data.labels[i];
    history.correct.push_back(std::move(ok));
}

void record_epoch(CDHistory& history, const TinyMLP& model, const Dataset& data) {
    std::vector<std::uint8_t> ok(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) ok[i] = predict(model, data.features[i]) == data.labels[i];
    history.correct.push_back(std::move(ok));
}

// One SGD step of the logistic-margin loss for a batch of (perturbed) inputs.
struct LinearStep {
    Vec g;
    double gb = 0.0;
    std::size_t count = 0;

    explicit LinearStep(std::size_t K) : g(K, 0.0) {}

    void add(const LinearModel& model, ConstSpan xadv, int y) {
        double m = static_cast<double>(y) * model.score(xadv);
        double coef = -static_cast<double>(y) * logistic(-m);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += coef * xadv[j];
        gb += coef;
        ++count;
    }

    void apply(LinearModel& model, const TrainConfig& cfg) const {
        if (count == 0) return;
        double inv = 1.0 / static_cast<double>(count);
        for (std::size_t j = 0; j < g.size(); ++j) {
            model.weights[j] -= cfg.lr * (g[j] * inv + cfg.weight_decay * model.weights[j]);
        }
        if (cfg.train_bias) model.bias -= cfg.lr * gb * inv;
    }
};

}  // namespace

StudentResult train_student(const Dataset& data, const PruningPlan& plan, const EpsilonSchedule* schedule,
                            const TrainConfig& cfg) {
    validate(cfg);
    data.validate();
    if (cfg.loss != LossKind::logistic_margin) {
        throw ContractViolation("the linear student trains with the logistic-margin loss");
    }
    std::vector<std::size_t> rows = retained_rows(data, plan);
    const std::size_t K = data.dim();

    std::vector<double> eps_of_row;
    AttackConfig sched_attack;
    if (schedule != nullptr) {
        require(schedule->epsilon > 0.0, "schedule needs eps > 0");
        std::unordered_map<std::int64_t, double> by_id;
        for (std::size_t i = 0; i < schedule->sample_ids.size(); ++i) by_id[schedule->sample_ids[i]] = schedule->eps_i[i];
        eps_of_row.assign(data.size(), 0.0);
        for (std::size_t r : rows) {
            auto it = by_id.find(data.sample_ids[r]);
            require(it != by_id.end(), "schedule has no entry for a retained sample");
            eps_of_row[r] = it->second;
        }
        sched_attack = cfg.attack == AttackKind::fgsm ? bim_config(schedule->epsilon, schedule->epsilon, 1)
                                                      : pgd_config(cfg, schedule->epsilon);
    }
    const AttackConfig pgd = pgd_config(cfg, cfg.epsilon);

    StudentResult res{LinearModel(Vec(K, 0.0)), {}};
    LinearModel& student = res.model;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order = rows;
    Vec xadv;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            std::size_t end = std::min(order.size(), start + cfg.batch);
            LinearStep step(K);
            for (std::size_t q = start; q < end; ++q) {
                std::size_t r = order[q];
                const Vec& x = data.features[r];
                int y = data.labels[r];
                if (schedule != nullptr) {
                    xadv = perturb_signed(student, x, y, eps_of_row[r], sched_attack, &rng);
                    step.add(student, xadv, y);
                } else if (cfg.epsilon == 0.0) {
                    step.add(student, x, y);
                } else if (cfg.attack == AttackKind::fgsm) {
                    xadv = fgsm(student, x, y, cfg.epsilon);
                    step.add(student, xadv, y);
                } else {
                    xadv = iterated_attack(student, x, y, pgd, Direction::ascend, &rng).x;
                    step.add(student, xadv, y);
                }
            }
            step.apply(student, cfg);
        }
        if (cfg.record_history) record_epoch(res.history, student, data);
    }
    return res;
}

OnlineResult train_student_online(const Dataset& data, const PruningPlan& plan, const OnlineConfig& online,
                                  const TrainConfig& cfg) {
    validate(cfg);
    data.validate();
    require(cfg.epsilon > 0.0, "online training needs eps > 0");
    require(online.gap >= 0.0 && online.gap < cfg.epsilon, "online gap must satisfy 0 <= gap < eps");
    require(online.j_max >= 1, "online j_max must be positive");
    std::vector<std::size_t> rows = retained_rows(data, plan);
    const std::size_t K = data.dim();

    OnlineResult res{LinearModel(Vec(K, 0.0)), 0, 0};
    LinearModel& student = res.model;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order = rows;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            std::size_t end = std::min(order.size(), start + cfg.batch);
            LinearStep step(K);
            for (std::size_t q = start; q < end; ++q) {
                std::size_t r = order[q];
                const Vec& x = data.features[r];
                int y = data.labels[r];
                Vec xadv = fgsm(student, x, y, cfg.epsilon);
                if (online.prune_margin &&
                    online_prune_decision(student, x, y, xadv, *online.prune_margin, cfg.epsilon)) {
                    ++res.skipped;
                    continue;
                }
                MarginRecord m = online_margin(student, x, y, xadv, cfg.epsilon, online.j_max);
                if (m.margin == -cfg.epsilon) ++res.no_solution;
                double eps_i = schedule_epsilon(m.margin, cfg.epsilon, online.gap);
                step.add(student, segment_point(x, xadv, eps_i, cfg.epsilon), y);
            }
            step.apply(student, cfg);
        }
    }
    return res;
}

MlpResult train_mlp(const Dataset& data, std::size_t hidden, const TrainConfig& cfg) {
    validate(cfg);
    data.validate();
    if (cfg.loss != LossKind::cross_entropy) {
        throw ContractViolation("the multiclass network trains with cross-entropy");
    }
    require(data.size() >= 1, "training set is empty");
    require(hidden >= 1, "hidden width must be positive");
    int max_label = *std::max_element(data.labels.begin(), data.labels.end());
    std::size_t C = static_cast<std::size_t>(std::max(max_label + 1, 2));
    std::vector<std::size_t> dims{data.dim(), hidden, C};
    MlpResult res{TinyMLP::random(dims, derive_seed(cfg.seed, {1})), {}};
    TinyMLP& net = res.model;
    const AttackConfig pgd = pgd_config(cfg, cfg.epsilon);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            std::size_t end = std::min(order.size(), start + cfg.batch);
            std::vector<DenseLayer> acc;
            for (const auto& layer : net.layers) {
                acc.push_back(DenseLayer{layer.in, layer.out, Vec(layer.weights.size(), 0.0), Vec(layer.out, 0.0)});
            }
            for (std::size_t q = start; q < end; ++q) {
                const Vec& x = data.features[order[q]];
                int y = data.labels[order[q]];
                Vec xadv;
                if (cfg.epsilon == 0.0) {
                    xadv = x;
                } else if (cfg.attack == AttackKind::fgsm) {
                    xadv = fgsm(net, x, y, cfg.epsilon);
                } else {
                    xadv = iterated_attack(net, x, y, pgd, Direction::ascend, &rng).x;
                }
                MlpGradients g = parameter_gradients(net, xadv, y);
                for (std::size_t l = 0; l < acc.size(); ++l) {
                    for (std::size_t i = 0; i < acc[l].weights.size(); ++i) acc[l].weights[i] += g.layers[l].weights[i];
                    for (std::size_t i = 0; i < acc[l].bias.size(); ++i) acc[l].bias[i] += g.layers[l].bias[i];
                }
            }
            double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t l = 0; l < acc.size(); ++l) {
                DenseLayer& layer = net.layers[l];
                for (std::size_t i = 0; i < layer.weights.size(); ++i) {
                    layer.weights[i] -= cfg.lr * (acc[l].weights[i] * inv + cfg.weight_decay * layer.weights[i]);
                }
                for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= cfg.lr * acc[l].bias[i] * inv;
            }
        }
        if (cfg.record_history) record_epoch(res.history, net, data);
    }
    return res;
}

namespace {
double cosine(ConstSpan a, ConstSpan b) {
    require(a.size() == b.size(), "weight vectors differ in dimension");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        dot += a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
    }
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateModelError("cosine of a zero weight vector");
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}
}  // namespace

double correlation_error(ConstSpan teacher, ConstSpan student) { return 1.0 - cosine(teacher, student); }

double gaussian_clean_error(ConstSpan teacher, ConstSpan student) {
    return std::acos(cosine(teacher, student)) / std::numbers::pi;
}

AttackConfig default_eval_attack(double eps) {
    AttackConfig a;
    a.epsilon = eps;
    a.step = eps / 4.0;
    a.iters = 20;
    a.random_init = eps > 0.0;
    return a;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix64(master);
    for (auto t : tags) h = splitmix64(h ^ splitmix64(t));
    return h;
}

std::uint64_t hash_string(const std::string& s) { return fnv1a64(s); }

}  // namespace mplab
