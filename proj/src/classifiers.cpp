#include "classifiers.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "rng.hpp"

namespace fsel {

namespace {

void check_training_set(std::span<const Embedding> train, std::span<const int> labels, int num_classes) {
    if (train.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "train embeddings and labels differ in length");
    if (train.empty()) throw Error(ErrorCode::InvalidArgument, "empty training set");
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) throw Error(ErrorCode::InvalidArgument, "train label out of range");
        if (train[i].dim() != train.front().dim()) throw Error(ErrorCode::DimMismatch, "mixed embedding dims in training set");
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (int c = 0; c < num_classes; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) {
            throw Error(ErrorCode::InvalidArgument, "class " + std::to_string(c) + " has no training items");
        }
    }
}

}  // namespace

std::vector<int> nearest_centroid_classify(std::span<const Embedding> train, std::span<const int> train_labels,
                                           int num_classes, std::span<const Embedding> test) {
    check_training_set(train, train_labels, num_classes);
    const std::size_t dim = train.front().dim();
    std::vector<std::vector<double>> centroids(static_cast<std::size_t>(num_classes), std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto& c = centroids[static_cast<std::size_t>(train_labels[i])];
        for (std::size_t k = 0; k < dim; ++k) c[k] += train[i][k];
    }
    for (auto& c : centroids) {
        const double n = l2_norm(c);
        if (!(n > 0.0)) throw Error(ErrorCode::Degenerate, "zero-norm class centroid");
        for (double& v : c) v /= n;
    }

    std::vector<int> out;
    out.reserve(test.size());
    for (const auto& x : test) {
        const double xn = x.norm();
        if (!(xn > 0.0)) throw Error(ErrorCode::Degenerate, "zero-norm test embedding");
        int best = 0;
        double best_cos = -2.0;
        for (int c = 0; c < num_classes; ++c) {
            const double cs = dot(x.values(), centroids[static_cast<std::size_t>(c)]) / xn;
            if (cs > best_cos) {
                best_cos = cs;
                best = c;
            }
        }
        out.push_back(best);
    }
    return out;
}

void LinearProbeConfig::validate() const {
    if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
    if (!(l2_penalty >= 0.0)) throw Error(ErrorCode::InvalidArgument, "l2 penalty must be >= 0");
    if (!(init_std >= 0.0)) throw Error(ErrorCode::InvalidArgument, "init std must be >= 0");
}

std::vector<double> LinearModel::logits(std::span<const double> x) const {
    if (x.size() != dim) throw Error(ErrorCode::DimMismatch, "input dim does not match model");
    std::vector<double> z(bias);
    for (int c = 0; c < num_classes; ++c) {
        const double* w = weights.data() + static_cast<std::size_t>(c) * dim;
        double acc = 0.0;
        for (std::size_t k = 0; k < dim; ++k) acc += w[k] * x[k];
        z[static_cast<std::size_t>(c)] += acc;
    }
    return z;
}

int LinearModel::predict(std::span<const double> x) const {
    const auto z = logits(x);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<int> LinearModel::predict(std::span<const Embedding> xs) const {
    std::vector<int> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(predict(x.values()));
    return out;
}

LossGradient probe_loss_gradient(const LinearModel& model, std::span<const Embedding> xs, std::span<const int> labels,
                                 double l2_penalty) {
    const std::size_t classes = static_cast<std::size_t>(model.num_classes);
    LossGradient out;
    out.grad_weights.assign(model.weights.size(), 0.0);
    out.grad_bias.assign(classes, 0.0);
    const double inv_n = 1.0 / static_cast<double>(xs.size());

    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto z = model.logits(xs[i].values());
        const double top = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double& v : z) {
            v = std::exp(v - top);
            sum += v;
        }
        const auto y = static_cast<std::size_t>(labels[i]);
        out.loss += -(std::log(z[y] / sum)) * inv_n;
        for (std::size_t c = 0; c < classes; ++c) {
            const double residual = (z[c] / sum - (c == y ? 1.0 : 0.0)) * inv_n;
            out.grad_bias[c] += residual;
            double* g = out.grad_weights.data() + c * model.dim;
            for (std::size_t k = 0; k < model.dim; ++k) g[k] += residual * xs[i][k];
        }
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        sq += model.weights[k] * model.weights[k];
        out.grad_weights[k] += l2_penalty * model.weights[k];
    }
    out.loss += 0.5 * l2_penalty * sq;
    return out;
}

LinearProbeResult linear_probe_train(std::span<const Embedding> train, std::span<const int> labels, int num_classes,
                                     const LinearProbeConfig& config) {
    config.validate();
    check_training_set(train, labels, num_classes);

    LinearProbeResult result;
    auto& model = result.model;
    model.num_classes = num_classes;
    model.dim = train.front().dim();
    model.weights.resize(static_cast<std::size_t>(num_classes) * model.dim);
    model.bias.assign(static_cast<std::size_t>(num_classes), 0.0);
    Engine engine(config.seed);
    for (double& w : model.weights) w = config.init_std * standard_normal(engine);

    result.loss_history.reserve(config.epochs + 1);
    for (std::size_t epoch = 0; epoch <= config.epochs; ++epoch) {
        auto step = probe_loss_gradient(model, train, labels, config.l2_penalty);
        if (!std::isfinite(step.loss)) throw Error(ErrorCode::Diverged, "linear probe loss became non-finite at epoch " + std::to_string(epoch));
        result.loss_history.push_back(step.loss);
        const std::size_t t = result.loss_history.size() - 1;
        if (t >= 1 && step.loss > result.loss_history[t - 1] + 1e-6) result.monotone = false;
        if (t >= 10 && step.loss - result.loss_history[t - 10] > 1e-3) {
            throw Error(ErrorCode::Diverged, "linear probe diverged: loss rose from " + std::to_string(result.loss_history[t - 10]) +
                                                 " to " + std::to_string(step.loss) + " by epoch " + std::to_string(epoch));
        }
        if (epoch == config.epochs) break;
        for (std::size_t k = 0; k < model.weights.size(); ++k) model.weights[k] -= config.learning_rate * step.grad_weights[k];
        for (std::size_t c = 0; c < model.bias.size(); ++c) model.bias[c] -= config.learning_rate * step.grad_bias[c];
    }
    result.final_loss = result.loss_history.back();
    return result;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw Error(ErrorCode::InvalidArgument, "prediction and label counts differ");
    if (truth.empty()) throw Error(ErrorCode::InvalidArgument, "accuracy of an empty set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace fsel
