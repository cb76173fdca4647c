#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "offpol/error.hpp"
#include "offpol/numeric.hpp"
#include "offpol/rng.hpp"

using namespace offpol;

TEST_CASE("compensated sum keeps small addends") {
    CompensatedSum s;
    s.add(1e16);
    for (int i = 0; i < 1000; ++i) s.add(1.0);
    s.add(-1e16);
    CHECK(s.value() == 1000.0);
}

TEST_CASE("format_double round trips and renders infinities") {
    for (double x : {0.1, 1.0 / 3.0, 2.5e-300, -7.0, 123456789.125}) CHECK(parse_double(format_double(x)) == x);
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(parse_double("-inf") == -std::numeric_limits<double>::infinity());
    CHECK(std::isnan(parse_double("nan")));
    CHECK_THROWS_AS(parse_double("1.5x"), ParseError);
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("least squares recovers an exact line") {
    std::vector<double> x{1, 2, 3, 4};
    std::vector<double> y{3, 5, 7, 9};
    const LinearFit f = least_squares(x, y);
    CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-14));
    std::vector<double> same{2, 2};
    std::vector<double> two{1, 3};
    CHECK_THROWS_AS(least_squares(same, two), InvalidArgument);
}

TEST_CASE("derived seeds separate paths") {
    CHECK(derive_seed(1, {0, 1}) != derive_seed(1, {1, 0}));
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {0}) != derive_seed(2, {0}));
}

TEST_CASE("sample_categorical skips zero-probability entries") {
    Rng rng(3);
    std::vector<double> probs{0.0, 0.3, 0.0, 0.7, 0.0};
    for (int i = 0; i < 10000; ++i) {
        const auto k = sample_categorical(probs, rng);
        CHECK((k == 1 || k == 3));
    }
}
