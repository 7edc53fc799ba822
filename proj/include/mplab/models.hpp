#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mplab {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;

enum class LossKind {
    logistic_margin,  // binary: log(1 + exp(-y * score))
    cross_entropy,    // multiclass: -log softmax(logits)[y]
};

// Binary affine classifier sign(theta . x + b). Labels are -1 / +1.
// Serves both as the student perceptron and, frozen, as the teacher.
struct LinearModel {
    Vec weights;
    double bias = 0.0;

    LinearModel() = default;
    explicit LinearModel(Vec w, double b = 0.0);

    std::size_t input_dim() const { return weights.size(); }
    double score(ConstSpan x) const;

    bool operator==(const LinearModel&) const = default;
};

// Fully connected layer, weights stored out x in, row-major.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    Vec weights;
    Vec bias;

    bool operator==(const DenseLayer&) const = default;
};

// Rectifier on every hidden layer, identity on the output layer.
// A TinyMLP with a single layer is a multiclass affine model.
struct TinyMLP {
    std::vector<DenseLayer> layers;

    TinyMLP() = default;
    explicit TinyMLP(std::vector<DenseLayer> layers);

    // He-initialised network with layer widths dims[0] -> dims[1] -> ... -> dims.back().
    static TinyMLP random(std::span<const std::size_t> dims, std::uint64_t seed);
    // Single affine layer; rows are per-class weight vectors.
    static TinyMLP affine(const std::vector<Vec>& rows, const Vec& bias);

    std::size_t input_dim() const { return layers.front().in; }
    std::size_t num_classes() const { return layers.back().out; }

    bool operator==(const TinyMLP&) const = default;
};

struct LossAndGrad {
    double loss = 0.0;
    Vec grad;  // d loss / d x
};

// Binary: +1 when score >= 0 (ties resolve to +1), else -1.
int predict(const LinearModel& model, ConstSpan x);
// Multiclass: argmax of logits, lowest index among ties.
int predict(const TinyMLP& model, ConstSpan x);

Vec logits(const TinyMLP& model, ConstSpan x);
// Row k holds d logit_k / d x.
std::vector<Vec> logit_jacobian(const TinyMLP& model, ConstSpan x);

LossAndGrad loss_and_input_grad(const LinearModel& model, ConstSpan x, int y,
                                LossKind loss = LossKind::logistic_margin);
LossAndGrad loss_and_input_grad(const TinyMLP& model, ConstSpan x, int y,
                                LossKind loss = LossKind::cross_entropy);

// Cross-entropy gradients with respect to every parameter, for training.
struct MlpGradients {
    double loss = 0.0;
    std::vector<DenseLayer> layers;  // same shapes as the model, holding gradients
};
MlpGradients parameter_gradients(const TinyMLP& model, ConstSpan x, int y);

bool valid_label(const LinearModel& model, int y);
bool valid_label(const TinyMLP& model, int y);

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double logistic(double z);
// log(1 + exp(z)) without overflow.
double softplus(double z);

}  // namespace mplab
