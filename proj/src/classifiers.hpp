#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "types.hpp"

namespace fsel {

// Predicts argmax_c cos(x, mean of class c); ties go to the smaller class id.
std::vector<int> nearest_centroid_classify(std::span<const Embedding> train, std::span<const int> train_labels,
                                           int num_classes, std::span<const Embedding> test);

struct LinearProbeConfig {
    std::size_t epochs = 200;
    double learning_rate = 0.1;
    double l2_penalty = 1e-4;
    std::uint64_t seed = 0;
    double init_std = 0.01;

    void validate() const;
};

// Multinomial logistic regression parameters: logits = W x + b.
struct LinearModel {
    int num_classes = 0;
    std::size_t dim = 0;
    std::vector<double> weights;  // row-major num_classes x dim
    std::vector<double> bias;     // num_classes

    std::vector<double> logits(std::span<const double> x) const;
    int predict(std::span<const double> x) const;
    std::vector<int> predict(std::span<const Embedding> xs) const;
};

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad_weights;
    std::vector<double> grad_bias;
};

// Mean cross-entropy + (l2/2)||W||^2 and its analytic gradient.
LossGradient probe_loss_gradient(const LinearModel& model, std::span<const Embedding> xs, std::span<const int> labels,
                                 double l2_penalty);

struct LinearProbeResult {
    LinearModel model;
    double final_loss = 0.0;
    // Loss before the first step and after each epoch.
    std::vector<double> loss_history;
    // Non-increasing within 1e-6 at every step.
    bool monotone = true;
};

// Full-batch gradient descent from a seeded small-normal init. Throws
// ErrorCode::Diverged if the loss rises by more than 1e-3 across any
// 10-epoch window.
LinearProbeResult linear_probe_train(std::span<const Embedding> train, std::span<const int> labels, int num_classes,
                                     const LinearProbeConfig& config);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace fsel
