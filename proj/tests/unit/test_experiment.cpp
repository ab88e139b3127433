#include <doctest.h>

#include <cmath>
#include <random>

#include "encoder.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "synthetic.hpp"
#include "test_support.hpp"

using namespace fsel;

namespace {

SyntheticSpec small_spec() {
    SyntheticSpec s;
    s.num_classes = 3;
    s.dim = 16;
    s.pool_per_class = 12;
    s.validation_per_class = 6;
    s.test_per_class = 15;
    return s;
}

ExperimentConfig small_grid() {
    ExperimentConfig cfg;
    cfg.strategies = {Strategy::Random, Strategy::Entropy, Strategy::Margin, Strategy::MonteCarlo, Strategy::Repre};
    cfg.shots = {1, 2};
    cfg.seeds = {0, 1, 2};
    cfg.noise.variants = 3;
    cfg.classifier = ClassifierKind::NearestCentroid;
    return cfg;
}

}  // namespace

TEST_CASE("sample std reproduces the published 2-shot spreads") {
    // 3 seeds per dataset; sample (n-1) deviation, published to two decimals.
    CHECK(std::abs(sample_std(std::vector<double>{66.70, 56.90, 59.90}) - 5.02) < 0.01);
    CHECK(std::abs(sample_std(std::vector<double>{27.60, 3.60, 26.90}) - 13.65) < 0.01);
    CHECK(sample_std(std::vector<double>{0.4, 0.4, 0.4}) == 0.0);
    CHECK(sample_std(std::vector<double>{0.7}) == 0.0);
    CHECK(sample_std(std::vector<double>{1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("generality is 100 x mean pairwise cosine") {
    const std::vector<Embedding> es{Embedding({1.0, 0.0}), Embedding({0.0, 1.0}), Embedding({1.0, 1.0})};
    const double expected = 100.0 * (0.0 + std::sqrt(0.5) + std::sqrt(0.5)) / 3.0;
    const auto g = generality_diagnostic(es);
    CHECK(g.percent == doctest::Approx(expected));
    CHECK_FALSE(g.sampled);
    CHECK(g.n_used == 3);
    const std::vector<Embedding> same(4, Embedding({0.3, 0.4}));
    CHECK(generality_diagnostic(same).percent == doctest::Approx(100.0));
    CHECK_THROWS_AS(generality_diagnostic(std::span<const Embedding>(es.data(), 1)), Error);
}

TEST_CASE("generality subsamples above the cap, deterministically") {
    std::mt19937_64 rng(1);
    std::vector<Embedding> es;
    for (int i = 0; i < 60; ++i) es.push_back(Embedding::normalized_from(fsel::testing::random_vector(rng, 8)));
    const auto a = generality_diagnostic(es, 3, 20);
    CHECK(a.sampled);
    CHECK(a.n_used == 20);
    CHECK(generality_diagnostic(es, 3, 20).percent == a.percent);
    CHECK(std::abs(generality_diagnostic(es, 3, 100).percent - a.percent) < 20.0);
}

TEST_CASE("experiment grid covers every cell and deterministic strategies have zero spread") {
    const auto m = generate_synthetic(small_spec());
    ReferenceEncoder enc({42, 16});
    EmbeddingTable table(m, enc);
    const auto report = run_experiment(table, small_grid());
    CHECK(report.rows.size() == 5 * 2 * 3);
    CHECK(report.failed_rows() == 0);
    for (const auto& agg : report.aggregates()) {
        CAPTURE(agg.strategy);
        CHECK(agg.n_seeds == 3);
        if (agg.strategy != "random") CHECK(agg.std == 0.0);
    }
    const auto csv = report.to_csv();
    CHECK(csv.rfind("strategy,shots,seed,accuracy\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 31);
    const auto deduped = report.to_csv(true);
    CHECK(std::count(deduped.begin(), deduped.end(), '\n') == 1 + 2 * 3 + 4 * 2);
    CHECK(report.aggregates_json()["failures"].empty());
}

TEST_CASE("experiment output is independent of jobs") {
    const auto m = generate_synthetic(small_spec());
    ReferenceEncoder enc({42, 16});
    auto cfg = small_grid();
    cfg.classifier = ClassifierKind::LinearProbe;
    cfg.probe.epochs = 30;
    EmbeddingTable t1(m, enc), t3(m, enc);
    const auto one = run_experiment(t1, cfg);
    cfg.jobs = 3;
    const auto three = run_experiment(t3, cfg);
    CHECK(one.to_csv() == three.to_csv());
    CHECK(one.aggregates_json() == three.aggregates_json());
}

TEST_CASE("failing cells are recorded and the rest still run") {
    const auto m = generate_synthetic(small_spec());
    ReferenceEncoder enc({42, 16});
    EmbeddingTable table(m, enc);
    auto cfg = small_grid();
    cfg.shots = {2, 50};
    const auto report = run_experiment(table, cfg);
    CHECK(report.failed_rows() == 5 * 3);
    std::size_t ok = 0;
    for (const auto& row : report.rows) {
        if (row.shots == 50) {
            CHECK_FALSE(row.accuracy.has_value());
            CHECK(row.error.find("fewer than the 50 shots") != std::string::npos);
        } else {
            ok += row.accuracy.has_value();
        }
    }
    CHECK(ok == 15);
    CHECK(report.aggregates_json()["failures"].size() == 15);
    CHECK(report.to_csv().find("random,50,0,\n") != std::string::npos);
}

TEST_CASE("evaluate_selection trains on exactly the selected ids") {
    const auto m = generate_synthetic(small_spec());
    ReferenceEncoder enc({42, 16});
    EmbeddingTable table(m, enc);
    StrategyConfig sc;
    sc.strategy = Strategy::Repre;
    sc.shots = 3;
    const auto sel = select(table, sc);
    const double acc = evaluate_selection(table, sel, ClassifierKind::NearestCentroid, {});
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    auto bad = sel;
    bad.classes[0][0].id = "nope";
    CHECK_THROWS_AS(evaluate_selection(table, bad, ClassifierKind::NearestCentroid, {}), Error);
}
