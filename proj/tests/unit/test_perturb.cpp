#include <doctest.h>

#include <cmath>

#include "error.hpp"
#include "perturb.hpp"
#include "test_support.hpp"

using namespace fsel;

TEST_CASE("gaussian noise statistics on a mid-gray image") {
    const auto img = ImageTensor::filled(64, 64, 3, 0.5);
    for (auto [mu, sigma] : {std::pair{0.0, 0.05}, std::pair{0.02, 0.1}, std::pair{-0.03, 0.08}}) {
        NoiseConfig cfg{mu, sigma, 4, 11};
        double s = 0, s2 = 0;
        std::size_t n = 0;
        for (std::size_t v = 0; v < cfg.variants; ++v) {
            const auto noisy = gaussian_noise(img, "anchor", cfg, v);
            for (double p : noisy.pixels()) {
                const double d = p - 0.5;
                s += d;
                s2 += d * d;
                ++n;
            }
        }
        const double mean = s / n;
        const double sd = std::sqrt(s2 / n - mean * mean);
        CHECK(std::abs(mean - mu) < 0.01);
        CHECK(std::abs(sd - sigma) < 0.01);
    }
}

TEST_CASE("noise output stays in range and keeps the shape") {
    const auto img = ImageTensor::filled(5, 7, 3, 0.98);
    const auto noisy = gaussian_noise(img, "x", NoiseConfig{0.0, 0.5, 1, 0}, 0);
    CHECK(noisy.height() == 5);
    CHECK(noisy.width() == 7);
    CHECK(noisy.channels() == 3);
    bool clamped = false;
    for (double p : noisy.pixels()) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        clamped |= p == 1.0;
    }
    CHECK(clamped);
}

TEST_CASE("noise is a pure function of (base seed, anchor id, variant)") {
    const auto img = fsel::testing::gradient_gray16();
    NoiseConfig cfg{0.0, 0.1, 3, 5};
    CHECK(gaussian_noise(img, "a", cfg, 1) == gaussian_noise(img, "a", cfg, 1));
    CHECK_FALSE(gaussian_noise(img, "a", cfg, 1) == gaussian_noise(img, "a", cfg, 2));
    CHECK_FALSE(gaussian_noise(img, "a", cfg, 1) == gaussian_noise(img, "b", cfg, 1));
    auto other = cfg;
    other.base_seed = 6;
    CHECK_FALSE(gaussian_noise(img, "a", cfg, 1) == gaussian_noise(img, "a", other, 1));
    const auto all = noise_variants(img, "a", cfg);
    REQUIRE(all.size() == 3);
    CHECK(all[2] == gaussian_noise(img, "a", cfg, 2));
}

TEST_CASE("noise config validation") {
    CHECK_THROWS_AS((NoiseConfig{0.0, 0.0, 1, 0}).validate(), Error);
    CHECK_THROWS_AS((NoiseConfig{0.0, -1.0, 1, 0}).validate(), Error);
    CHECK_THROWS_AS((NoiseConfig{std::nan(""), 0.1, 1, 0}).validate(), Error);
    CHECK_THROWS_AS((NoiseConfig{0.0, 0.1, 0, 0}).validate(), Error);
    CHECK_THROWS_AS(gaussian_noise(fsel::testing::gradient_gray16(), "a", NoiseConfig{0.0, 0.1, 2, 0}, 2), Error);
}
