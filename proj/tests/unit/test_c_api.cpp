#include <doctest.h>

#include <cmath>
#include <string>

#include "fsel/fsel.h"
#include "test_support.hpp"

namespace {

std::string take(char* s) {
    std::string out = s ? s : "";
    fsel_string_free(s);
    return out;
}

}  // namespace

TEST_CASE("c api: status names and errors") {
    CHECK(std::string(fsel_status_name(FSEL_ERR_BUDGET)) == "budget violation");
    fsel_manifest* m = nullptr;
    CHECK(fsel_manifest_load("/nonexistent/manifest.jsonl", &m) == FSEL_ERR_IO);
    CHECK(m == nullptr);
    CHECK(std::string(fsel_last_error()).find("cannot open manifest") != std::string::npos);
    CHECK(fsel_manifest_load(nullptr, &m) == FSEL_ERR_INVALID_ARGUMENT);
    CHECK(fsel_version()[0] != '\0');
}

TEST_CASE("c api: synthesize, select, evaluate") {
    fsel_manifest* m = nullptr;
    REQUIRE(fsel_manifest_synthesize("std-bench", &m) == FSEL_OK);
    CHECK(fsel_manifest_size(m) == 800);
    CHECK(fsel_manifest_num_classes(m) == 5);
    CHECK(fsel_manifest_count(m, "pool", 2) == 40);
    CHECK(std::string(fsel_manifest_item_id(m, 0)) == "c0_pool_0000");
    CHECK(fsel_manifest_validate_budget(m, 41) == FSEL_ERR_BUDGET);

    fsel_provider* p = nullptr;
    REQUIRE(fsel_provider_reference(64, 42, &p) == FSEL_OK);
    CHECK(fsel_provider_dim(p) == 64);

    fsel_select_options so;
    fsel_select_options_init(&so);
    so.strategy = "repre";
    so.shots = 2;
    fsel_selection* sel = nullptr;
    REQUIRE(fsel_select(m, p, &so, &sel) == FSEL_OK);
    CHECK(fsel_selection_class_size(sel, 0) == 2);
    CHECK(fsel_selection_item_score(sel, 0, 0) <= fsel_selection_item_score(sel, 0, 1));

    char* json = nullptr;
    REQUIRE(fsel_selection_to_json(sel, nullptr, &json) == FSEL_OK);
    const auto text = take(json);
    CHECK(text.find("\"strategy\": \"repre\"") != std::string::npos);
    CHECK(text.find("generated_at") == std::string::npos);

    fsel_probe_options po;
    fsel_probe_options_init(&po);
    CHECK(po.epochs == 200);
    double acc = -1;
    REQUIRE(fsel_evaluate(m, p, sel, "nearest-centroid", &po, &acc) == FSEL_OK);
    CHECK(acc > 0.2);
    CHECK(fsel_evaluate(m, p, sel, "svm", &po, &acc) == FSEL_ERR_INVALID_ARGUMENT);

    so.strategy = "entropy";
    fsel_selection* none = nullptr;
    CHECK(fsel_select(m, p, &so, &none) == FSEL_ERR_INVALID_ARGUMENT);
    CHECK(std::string(fsel_last_error()) == "prototypes required for entropy");
    so.prototypes = "validation";
    REQUIRE(fsel_select(m, p, &so, &none) == FSEL_OK);
    fsel_selection_free(none);

    so.strategy = "random";
    so.shots = 100;
    CHECK(fsel_select(m, p, &so, &none) == FSEL_ERR_BUDGET);

    fsel_selection_free(sel);
    fsel_provider_free(p);
    fsel_manifest_free(m);
}

TEST_CASE("c api: embed manifest to cache, resume, and use the cache") {
    fsel::testing::TempDir dir;
    const auto manifest_path = fsel::testing::write_image_dataset(dir.path(), 2, 3, 2, 2);
    fsel_manifest* m = nullptr;
    REQUIRE(fsel_manifest_load(manifest_path.c_str(), &m) == FSEL_OK);
    fsel_provider* ref = nullptr;
    REQUIRE(fsel_provider_reference(64, 42, &ref) == FSEL_OK);
    const auto cache = (dir / "c.fsec").string();

    fsel_embed_stats stats{};
    REQUIRE(fsel_embed_manifest(ref, m, cache.c_str(), 0, &stats) == FSEL_OK);
    CHECK(stats.total == 14);
    CHECK(stats.embedded == 14);
    REQUIRE(fsel_embed_manifest(ref, m, cache.c_str(), 1, &stats) == FSEL_OK);
    CHECK(stats.embedded == 0);
    CHECK(stats.reused == 14);

    fsel_provider* cached = nullptr;
    REQUIRE(fsel_provider_cache(cache.c_str(), nullptr, &cached) == FSEL_OK);
    float a[64], b[64];
    REQUIRE(fsel_embed_item(ref, m, 3, a, 64) == FSEL_OK);
    REQUIRE(fsel_embed_item(cached, m, 3, b, 64) == FSEL_OK);
    for (int k = 0; k < 64; ++k) CHECK(a[k] == b[k]);
    CHECK(fsel_embed_item(ref, m, 3, a, 10) == FSEL_ERR_INVALID_ARGUMENT);

    fsel_provider* wrong = nullptr;
    REQUIRE(fsel_provider_reference(32, 42, &wrong) == FSEL_OK);
    fsel_provider* mismatched = nullptr;
    CHECK(fsel_provider_cache(cache.c_str(), wrong, &mismatched) == FSEL_ERR_DIM_MISMATCH);

    fsel_select_options so;
    fsel_select_options_init(&so);
    so.strategy = "montecarlo";
    so.variants = 3;
    fsel_selection* sel = nullptr;
    CHECK(fsel_select(m, cached, &so, &sel) == FSEL_ERR_PROVIDER);

    fsel_generality g{};
    REQUIRE(fsel_diagnose(m, cached, nullptr, 0, &g) == FSEL_OK);
    CHECK(g.n_total == 14);
    CHECK(g.percent > -100.0);
    CHECK(g.percent <= 100.0);

    fsel_provider_free(wrong);
    fsel_provider_free(cached);
    fsel_provider_free(ref);
    fsel_manifest_free(m);
}

TEST_CASE("c api: benchmark report") {
    fsel_manifest* m = nullptr;
    REQUIRE(fsel_manifest_synthesize("std-bench", &m) == FSEL_OK);
    fsel_provider* p = nullptr;
    REQUIRE(fsel_provider_reference(64, 42, &p) == FSEL_OK);
    const char* strategies[] = {"random", "repre"};
    const size_t shots[] = {1, 45};
    const uint64_t seeds[] = {0, 1};
    fsel_benchmark_options bo;
    fsel_benchmark_options_init(&bo);
    bo.strategies = strategies;
    bo.n_strategies = 2;
    bo.shots = shots;
    bo.n_shots = 2;
    bo.seeds = seeds;
    bo.n_seeds = 2;
    bo.classifier = "nearest-centroid";
    fsel_report* r = nullptr;
    REQUIRE(fsel_benchmark(m, p, &bo, &r) == FSEL_OK);
    CHECK(fsel_report_row_count(r) == 8);
    CHECK(fsel_report_failed_rows(r) == 4);
    const char* s;
    const char* err;
    size_t k;
    uint64_t seed;
    double acc;
    REQUIRE(fsel_report_row(r, 0, &s, &k, &seed, &acc, &err) == FSEL_OK);
    CHECK(std::string(err).empty());
    CHECK(std::isfinite(acc));
    double mean, sd;
    size_t n;
    bool found_repre = false;
    for (size_t i = 0; i < fsel_report_aggregate_count(r); ++i) {
        REQUIRE(fsel_report_aggregate(r, i, &s, &k, &mean, &sd, &n) == FSEL_OK);
        if (std::string(s) == "repre" && k == 1) {
            found_repre = true;
            CHECK(sd == 0.0);
        }
    }
    CHECK(found_repre);
    char* csv = nullptr;
    REQUIRE(fsel_report_csv(r, 1, &csv) == FSEL_OK);
    CHECK(take(csv).rfind("strategy,shots,seed,accuracy\n", 0) == 0);
    char* json = nullptr;
    REQUIRE(fsel_report_json(r, &json) == FSEL_OK);
    CHECK(take(json).find("\"failures\"") != std::string::npos);
    CHECK(fsel_report_row(r, 99, &s, &k, &seed, &acc, &err) == FSEL_ERR_INVALID_ARGUMENT);
    fsel_report_free(r);
    fsel_provider_free(p);
    fsel_manifest_free(m);
}
