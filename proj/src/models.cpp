#include "mplab/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mplab/errors.hpp"

namespace mplab {

namespace {

void require_finite(const Vec& v, const char* what) {
    for (double x : v) {
        require(std::isfinite(x), std::string(what) + " must be finite");
    }
}

void check_dim(std::size_t expected, ConstSpan x) {
    if (x.size() != expected) {
        throw ContractViolation("input has dimension " + std::to_string(x.size()) + ", model expects " +
                                std::to_string(expected));
    }
}

// Pre-activations and activations of every layer; acts[0] is the input.
struct Forward {
    std::vector<Vec> pre;
    std::vector<Vec> acts;
};

Forward forward(const TinyMLP& model, ConstSpan x) {
    Forward f;
    f.acts.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const DenseLayer& layer = model.layers[l];
        const Vec& in = f.acts.back();
        Vec z(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* row = layer.weights.data() + o * layer.in;
            double acc = layer.bias[o];
            for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * in[i];
            z[o] = acc;
        }
        Vec a = z;
        if (l + 1 < model.layers.size()) {
            for (double& v : a) v = std::max(v, 0.0);
        }
        f.pre.push_back(std::move(z));
        f.acts.push_back(std::move(a));
    }
    return f;
}

// Propagates d(out)/d(logits) back to the input; optionally accumulates parameter grads.
Vec backward(const TinyMLP& model, const Forward& f, Vec delta, std::vector<DenseLayer>* param_grads) {
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const DenseLayer& layer = model.layers[l];
        if (l + 1 < model.layers.size()) {
            for (std::size_t o = 0; o < layer.out; ++o) {
                if (f.pre[l][o] <= 0.0) delta[o] = 0.0;
            }
        }
        const Vec& in = f.acts[l];
        if (param_grads != nullptr) {
            DenseLayer& g = (*param_grads)[l];
            for (std::size_t o = 0; o < layer.out; ++o) {
                g.bias[o] += delta[o];
                double* grow = g.weights.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) grow[i] += delta[o] * in[i];
            }
        }
        Vec next(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            if (delta[o] == 0.0) continue;
            const double* row = layer.weights.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) next[i] += row[i] * delta[o];
        }
        delta = std::move(next);
    }
    return delta;
}

// Cross-entropy value and d loss / d logits.
std::pair<double, Vec> softmax_xent(const Vec& z, int y) {
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    double log_norm = zmax + std::log(sum);
    Vec d(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) d[k] = std::exp(z[k] - log_norm);
    double loss = log_norm - z[static_cast<std::size_t>(y)];
    d[static_cast<std::size_t>(y)] -= 1.0;
    return {loss, d};
}

}  // namespace

double logistic(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 0.0) {
        return z + std::log1p(std::exp(-z));
    }
    return std::log1p(std::exp(z));
}

LinearModel::LinearModel(Vec w, double b) : weights(std::move(w)), bias(b) {
    require(!weights.empty(), "linear model needs K >= 1");
    require_finite(weights, "linear weights");
    require(std::isfinite(bias), "linear bias must be finite");
}

double LinearModel::score(ConstSpan x) const {
    check_dim(weights.size(), x);
    double acc = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) acc += weights[j] * x[j];
    return acc;
}

TinyMLP::TinyMLP(std::vector<DenseLayer> l) : layers(std::move(l)) {
    require(!layers.empty(), "mlp needs at least one layer");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const DenseLayer& layer = layers[i];
        require(layer.in >= 1 && layer.out >= 1, "layer dimensions must be positive");
        require(layer.weights.size() == layer.in * layer.out, "layer weight matrix has wrong size");
        require(layer.bias.size() == layer.out, "layer bias has wrong size");
        require_finite(layer.weights, "mlp weights");
        require_finite(layer.bias, "mlp bias");
        if (i > 0) {
            require(layers[i - 1].out == layer.in, "consecutive layer dimensions disagree");
        }
    }
    require(layers.back().out >= 2, "mlp needs C >= 2 classes");
}

TinyMLP TinyMLP::random(std::span<const std::size_t> dims, std::uint64_t seed) {
    require(dims.size() >= 2, "mlp needs an input and an output width");
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(layer.in)));
        layer.weights.resize(layer.in * layer.out);
        for (double& w : layer.weights) w = init(rng);
        layer.bias.assign(layer.out, 0.0);
        layers.push_back(std::move(layer));
    }
    return TinyMLP(std::move(layers));
}

TinyMLP TinyMLP::affine(const std::vector<Vec>& rows, const Vec& bias) {
    require(!rows.empty() && rows.size() == bias.size(), "affine model needs one bias per row");
    DenseLayer layer;
    layer.in = rows.front().size();
    layer.out = rows.size();
    for (const Vec& r : rows) {
        require(r.size() == layer.in, "affine rows must share a dimension");
        layer.weights.insert(layer.weights.end(), r.begin(), r.end());
    }
    layer.bias = bias;
    return TinyMLP({layer});
}

int predict(const LinearModel& model, ConstSpan x) { return model.score(x) >= 0.0 ? 1 : -1; }

int predict(const TinyMLP& model, ConstSpan x) {
    Vec z = logits(model, x);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

Vec logits(const TinyMLP& model, ConstSpan x) {
    check_dim(model.input_dim(), x);
    return forward(model, x).acts.back();
}

std::vector<Vec> logit_jacobian(const TinyMLP& model, ConstSpan x) {
    check_dim(model.input_dim(), x);
    Forward f = forward(model, x);
    std::vector<Vec> rows;
    rows.reserve(model.num_classes());
    for (std::size_t k = 0; k < model.num_classes(); ++k) {
        Vec seed(model.num_classes(), 0.0);
        seed[k] = 1.0;
        rows.push_back(backward(model, f, std::move(seed), nullptr));
    }
    return rows;
}

bool valid_label(const LinearModel&, int y) { return y == 1 || y == -1; }

bool valid_label(const TinyMLP& model, int y) {
    return y >= 0 && static_cast<std::size_t>(y) < model.num_classes();
}

LossAndGrad loss_and_input_grad(const LinearModel& model, ConstSpan x, int y, LossKind loss) {
    if (loss != LossKind::logistic_margin) {
        throw ContractViolation("linear model supports only the logistic-margin loss");
    }
    require(valid_label(model, y), "binary label must be -1 or +1");
    double margin = static_cast<double>(y) * model.score(x);
    LossAndGrad out;
    out.loss = softplus(-margin);
    double coef = -static_cast<double>(y) * logistic(-margin);
    out.grad.resize(model.weights.size());
    for (std::size_t j = 0; j < model.weights.size(); ++j) out.grad[j] = coef * model.weights[j];
    return out;
}

LossAndGrad loss_and_input_grad(const TinyMLP& model, ConstSpan x, int y, LossKind loss) {
    if (loss != LossKind::cross_entropy) {
        throw ContractViolation("multiclass model supports only the cross-entropy loss");
    }
    require(valid_label(model, y), "class label out of range");
    check_dim(model.input_dim(), x);
    Forward f = forward(model, x);
    auto [value, dlogits] = softmax_xent(f.acts.back(), y);
    LossAndGrad out;
    out.loss = value;
    out.grad = backward(model, f, std::move(dlogits), nullptr);
    return out;
}

MlpGradients parameter_gradients(const TinyMLP& model, ConstSpan x, int y) {
    require(valid_label(model, y), "class label out of range");
    check_dim(model.input_dim(), x);
    Forward f = forward(model, x);
    auto [value, dlogits] = softmax_xent(f.acts.back(), y);
    MlpGradients g;
    g.loss = value;
    for (const DenseLayer& layer : model.layers) {
        g.layers.push_back(DenseLayer{layer.in, layer.out, Vec(layer.weights.size(), 0.0), Vec(layer.out, 0.0)});
    }
    backward(model, f, std::move(dlogits), &g.layers);
    return g;
}

}  // namespace mplab
