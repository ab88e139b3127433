#include <doctest.h>

#include <cmath>
#include <random>

#include "classifiers.hpp"
#include "error.hpp"
#include "test_support.hpp"

using namespace fsel;

namespace {

struct Problem {
    std::vector<Embedding> xs;
    std::vector<int> labels;
};

Problem blobs(std::uint64_t seed, int classes, std::size_t per_class, std::size_t dim, double spread) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, spread);
    Problem p;
    for (int c = 0; c < classes; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            std::vector<double> v(dim);
            for (std::size_t k = 0; k < dim; ++k) v[k] = (k == static_cast<std::size_t>(c) ? 1.0 : 0.0) + nd(rng);
            p.xs.push_back(Embedding::normalized_from(std::move(v)));
            p.labels.push_back(c);
        }
    return p;
}

}  // namespace

TEST_CASE("analytic gradient agrees with central differences") {
    const auto p = blobs(1, 3, 4, 5, 0.5);
    std::mt19937_64 rng(2);
    LinearModel model{3, 5, fsel::testing::random_vector(rng, 15, 0.3), {0.1, -0.2, 0.05}};
    const double l2 = 0.01;
    const auto analytic = probe_loss_gradient(model, p.xs, p.labels, l2);
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < model.weights.size() + model.bias.size(); ++i) {
        auto plus = model, minus = model;
        double& wp = i < 15 ? plus.weights[i] : plus.bias[i - 15];
        double& wm = i < 15 ? minus.weights[i] : minus.bias[i - 15];
        wp += h;
        wm -= h;
        const double numeric =
            (probe_loss_gradient(plus, p.xs, p.labels, l2).loss - probe_loss_gradient(minus, p.xs, p.labels, l2).loss) / (2 * h);
        const double a = i < 15 ? analytic.grad_weights[i] : analytic.grad_bias[i - 15];
        worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(numeric)));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("loss value matches a direct computation") {
    // Zero weights: every class equally likely, loss = ln C + 0.
    LinearModel zero{4, 2, std::vector<double>(8, 0.0), std::vector<double>(4, 0.0)};
    const std::vector<Embedding> xs{Embedding({1.0, 0.0}), Embedding({0.0, 1.0})};
    const std::vector<int> ys{0, 3};
    CHECK(probe_loss_gradient(zero, xs, ys, 0.5).loss == doctest::Approx(std::log(4.0)));
    // Penalty is (l2/2)||W||^2 and ignores the bias.
    LinearModel w{2, 1, {1.0, 2.0}, {100.0, 100.0}};
    const std::vector<Embedding> origin{Embedding(std::vector<double>{0.0})};
    CHECK(probe_loss_gradient(w, origin, std::vector<int>{0}, 0.0).loss == doctest::Approx(std::log(2.0)));
    CHECK(probe_loss_gradient(w, origin, std::vector<int>{0}, 0.2).loss == doctest::Approx(std::log(2.0) + 0.1 * 5.0));
}

TEST_CASE("linear probe learns separable blobs with a non-increasing loss") {
    const auto train = blobs(3, 4, 8, 6, 0.2);
    const auto test = blobs(4, 4, 20, 6, 0.2);
    const auto result = linear_probe_train(train.xs, train.labels, 4, LinearProbeConfig{});
    CHECK(result.monotone);
    CHECK(result.loss_history.size() == 201);
    CHECK(result.final_loss < result.loss_history.front());
    CHECK(accuracy(result.model.predict(test.xs), test.labels) > 0.9);
    const auto again = linear_probe_train(train.xs, train.labels, 4, LinearProbeConfig{});
    CHECK(again.model.weights == result.model.weights);
    LinearProbeConfig other;
    other.seed = 9;
    CHECK_FALSE(linear_probe_train(train.xs, train.labels, 4, other).model.weights == result.model.weights);
}

TEST_CASE("linear probe reports divergence") {
    const auto train = blobs(5, 3, 5, 4, 0.3);
    LinearProbeConfig cfg;
    cfg.learning_rate = 1e4;
    cfg.l2_penalty = 1.0;
    try {
        linear_probe_train(train.xs, train.labels, 3, cfg);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Diverged);
    }
    cfg = {};
    cfg.epochs = 0;
    CHECK_THROWS_AS(linear_probe_train(train.xs, train.labels, 3, cfg), Error);
}

TEST_CASE("nearest centroid predicts by cosine and ties go to the smaller class") {
    const std::vector<Embedding> train{Embedding({1.0, 0.0}), Embedding({0.0, 1.0})};
    const std::vector<int> labels{0, 1};
    const std::vector<Embedding> test{Embedding({0.9, 0.1}), Embedding({0.2, 0.8}), Embedding({1.0, 1.0})};
    CHECK(nearest_centroid_classify(train, labels, 2, test) == std::vector<int>{0, 1, 0});
    const std::vector<int> missing{0, 0};
    CHECK_THROWS_AS(nearest_centroid_classify(train, missing, 2, test), Error);
}

TEST_CASE("accuracy") {
    CHECK(accuracy(std::vector<int>{0, 1, 1, 2}, std::vector<int>{0, 1, 2, 2}) == 0.75);
    CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), Error);
}
