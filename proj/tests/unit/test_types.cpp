#include <doctest.h>

#include <cmath>
#include <limits>

#include "error.hpp"
#include "types.hpp"

using namespace fsel;

TEST_CASE("embedding construction validates values") {
    CHECK_THROWS_AS(Embedding(std::vector<double>{}), Error);
    CHECK_THROWS_AS(Embedding({1.0, std::nan("")}), Error);
    CHECK_THROWS_AS(Embedding({1.0, std::numeric_limits<double>::infinity()}), Error);
    CHECK_THROWS_AS(Embedding({1.0, 1.0}, true), Error);
    CHECK_NOTHROW(Embedding({0.6, 0.8}, true));
    Embedding e({3.0, 4.0});
    CHECK(e.dim() == 2);
    CHECK_FALSE(e.is_normalized());
    CHECK(e.norm() == doctest::Approx(5.0));
}

TEST_CASE("normalized_from scales to unit norm and rejects zero vectors") {
    const auto e = Embedding::normalized_from({3.0, 4.0});
    CHECK(e.is_normalized());
    CHECK(e[0] == doctest::Approx(0.6));
    CHECK(e[1] == doctest::Approx(0.8));
    try {
        Embedding::normalized_from({0.0, 0.0, 0.0});
        FAIL("expected degenerate");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::Degenerate);
        CHECK(std::string(err.what()) == "degenerate embedding");
    }
}

TEST_CASE("vector geometry helpers") {
    const std::vector<double> a{1.0, 0.0}, b{0.0, 2.0}, c{-3.0, 0.0};
    CHECK(dot(a, b) == 0.0);
    CHECK(cosine(a, b) == doctest::Approx(0.0));
    CHECK(cosine(a, c) == doctest::Approx(-1.0));
    CHECK(cosine_distance(a, c) == doctest::Approx(2.0));
    CHECK(euclidean_distance(a, b) == doctest::Approx(std::sqrt(5.0)));
    const std::vector<double> same{0.3, 0.4};
    CHECK(cosine(same, same) <= 1.0);
    CHECK(cosine_distance(same, same) >= 0.0);
    CHECK_THROWS_AS(cosine(a, std::vector<double>{0.0, 0.0}), Error);
    CHECK_THROWS_AS(dot(a, std::vector<double>{1.0}), Error);
}

TEST_CASE("image tensor shape and range checks") {
    CHECK_THROWS_AS(ImageTensor(0, 4, 1, {}), Error);
    CHECK_THROWS_AS(ImageTensor(2, 2, 2, std::vector<double>(8, 0.0)), Error);
    CHECK_THROWS_AS(ImageTensor(2, 2, 1, std::vector<double>(3, 0.0)), Error);
    CHECK_THROWS_AS(ImageTensor(1, 1, 1, {1.5}), Error);
    CHECK_THROWS_AS(ImageTensor(1, 1, 1, {-0.1}), Error);
    const auto img = ImageTensor::filled(2, 3, 3, 0.25);
    CHECK(img.pixels().size() == 18);
    CHECK(img.at(1, 2, 2) == 0.25);
}

TEST_CASE("split names round trip") {
    for (auto s : {Split::Pool, Split::Validation, Split::Test}) CHECK(parse_split(to_string(s)) == s);
    CHECK_FALSE(parse_split("train").has_value());
}
