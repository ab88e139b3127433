#include <doctest.h>

#include <sstream>

#include "error.hpp"
#include "manifest.hpp"
#include "synthetic.hpp"
#include "test_support.hpp"

using namespace fsel;

namespace {

DatasetManifest parse(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in, "m.jsonl");
}

ErrorCode code_of(const std::string& text) {
    try {
        parse(text);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;  // unreachable in these tests
}

}  // namespace

TEST_CASE("manifest parses images, features, comments and blank lines") {
    const auto m = parse(
        "# header\n"
        "{\"id\":\"a\",\"path\":\"x.png\",\"label\":0,\"split\":\"pool\"}\n"
        "\n"
        "{\"id\":\"b\",\"features\":[1,2],\"label\":1,\"split\":\"test\",\"outlier\":true}\n");
    REQUIRE(m.size() == 2);
    CHECK(m.num_classes() == 2);
    CHECK(std::get<ImagePath>(m.items()[0].source).path == "x.png");
    CHECK(m.items()[1].has_features());
    CHECK(m.items()[1].outlier);
    CHECK(m.count(Split::Pool) == 1);
    CHECK(m.count(Split::Test, 1) == 1);
    CHECK(m.find("b") == &m.items()[1]);
    CHECK(m.find("zz") == nullptr);
}

TEST_CASE("manifest rejects malformed records") {
    CHECK(code_of("{\"id\":\"a\",\"path\":\"x\",\"label\":0,\"split\":\"pool\"}\n"
                  "{\"id\":\"a\",\"path\":\"y\",\"label\":0,\"split\":\"pool\"}\n") == ErrorCode::DuplicateId);
    CHECK(code_of("{\"id\":\"a\",\"label\":0,\"split\":\"pool\"}\n") == ErrorCode::Parse);
    CHECK(code_of("{\"id\":\"a\",\"path\":\"x\",\"features\":[1],\"label\":0,\"split\":\"pool\"}\n") == ErrorCode::Parse);
    CHECK(code_of("{\"id\":\"a\",\"path\":\"x\",\"label\":0,\"split\":\"train\"}\n") == ErrorCode::Parse);
    CHECK(code_of("{\"id\":\"a\",\"path\":\"x\",\"label\":-1,\"split\":\"pool\"}\n") != ErrorCode::DuplicateId);
    CHECK(code_of("not json\n") == ErrorCode::Parse);
    CHECK(code_of("# only comments\n") == ErrorCode::Parse);
}

TEST_CASE("manifest errors name the line") {
    try {
        parse("{\"id\":\"a\",\"path\":\"x\",\"label\":0,\"split\":\"pool\"}\n{oops\n");
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("m.jsonl:2") != std::string::npos);
    }
}

TEST_CASE("duplicate id message") {
    try {
        DatasetManifest({{"dup", ImagePath{"a"}, 0, Split::Pool, false}, {"dup", ImagePath{"b"}, 0, Split::Pool, false}});
        FAIL("expected duplicate");
    } catch (const Error& e) {
        CHECK(std::string(e.what()) == "duplicate id 'dup'");
    }
}

TEST_CASE("budget validation reports the first deficient class") {
    std::vector<DatasetItem> items;
    for (int i = 0; i < 5; ++i) items.push_back({"a" + std::to_string(i), RawFeatures{{1.0}}, 0, Split::Pool, false});
    for (int i = 0; i < 2; ++i) items.push_back({"b" + std::to_string(i), RawFeatures{{1.0}}, 1, Split::Pool, false});
    for (int i = 0; i < 9; ++i) items.push_back({"v" + std::to_string(i), RawFeatures{{1.0}}, 1, Split::Validation, false});
    const DatasetManifest m(items);
    CHECK_NOTHROW(validate_budget(m, {2, 2}));
    try {
        validate_budget(m, {3, 2});
        FAIL("expected budget error");
    } catch (const BudgetError& e) {
        CHECK(e.code() == ErrorCode::Budget);
        CHECK(e.class_id() == 1);
        CHECK(e.count() == 2);
    }
}

TEST_CASE("manifest write and load round trip with class names") {
    fsel::testing::TempDir dir;
    const auto m = generate_synthetic([] {
        SyntheticSpec s;
        s.num_classes = 3;
        s.dim = 8;
        s.pool_per_class = 4;
        s.validation_per_class = 2;
        s.test_per_class = 3;
        return s;
    }());
    save_manifest(dir / "m.jsonl", m);
    CHECK(load_manifest(dir / "m.jsonl") == m);

    fsel::testing::write_file(dir / "m.jsonl.classes", "cat\ndog\nbird\n");
    const auto named = load_manifest(dir / "m.jsonl");
    CHECK(named.class_names() == std::vector<std::string>{"cat", "dog", "bird"});
    CHECK_THROWS_AS(load_manifest(dir / "missing.jsonl"), Error);
}

TEST_CASE("std-bench synthetic benchmark shape") {
    const auto spec = SyntheticSpec::std_bench();
    const auto m = generate_synthetic(spec);
    CHECK(m.num_classes() == 5);
    CHECK(m.size() == 5 * (40 + 20 + 100));
    for (int c = 0; c < 5; ++c) {
        CHECK(m.count(Split::Pool, c) == 40);
        CHECK(m.count(Split::Validation, c) == 20);
        CHECK(m.count(Split::Test, c) == 100);
        std::size_t outliers = 0;
        for (const auto& item : m.items())
            if (item.label == c && item.split == Split::Pool && item.outlier) ++outliers;
        CHECK(outliers == 6);  // round(0.15 * 40)
    }
    CHECK(std::get<RawFeatures>(m.items()[0].source).values.size() == 64);
    CHECK(generate_synthetic(spec) == m);
    auto other = spec;
    other.seed = 8;
    CHECK_FALSE(generate_synthetic(other) == m);
}

TEST_CASE("synthetic spec validation and json") {
    SyntheticSpec s;
    s.num_classes = 10;
    s.dim = 4;
    CHECK_THROWS_AS(s.validate(), Error);
    const auto back = synthetic_spec_from_json(to_json(SyntheticSpec::std_bench()));
    CHECK(to_json(back) == to_json(SyntheticSpec::std_bench()));
    CHECK(synthetic_spec_from_json(nlohmann::json{{"seed", 3}}).seed == 3);
    CHECK(load_synthetic_spec("std-bench").dim == 64);
}
