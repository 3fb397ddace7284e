#include <cmath>
#include <random>

#include <doctest.h>

#include "bubblemesh/errors.hpp"
#include "bubblemesh/geometry.hpp"
#include "bubblemesh/sizing.hpp"

using namespace bubblemesh;

TEST_SUITE("sizing") {

TEST_CASE("radial ring examples") {
    const auto f = SizeField::radial_ring();
    CHECK(f.evaluate({0, 0}) == doctest::Approx(0.1));
    CHECK(f.evaluate({3, 0}) == doctest::Approx(0.3));
    CHECK(f.pair_target({0, 0}, {3, 0}) == doctest::Approx(0.2));
    CHECK(f.pair_target({3, 0}, {3, 0}) == doctest::Approx(0.3));
}

TEST_CASE("constant field is exact and position independent") {
    const auto f = SizeField::constant(0.05);
    CHECK(f.evaluate({0, 0}) == 0.05);
    CHECK(f.evaluate({123.4, -7}) == 0.05);
    CHECK(f.pair_target({0, 0}, {5, 5}) == 0.05);
    CHECK_THROWS_AS(SizeField::constant(0.0), ConfigError);
    CHECK_THROWS_AS(SizeField::constant(-1.0), ConfigError);
}

TEST_CASE("pair target is symmetric and radial ring is 0.2-Lipschitz") {
    const auto f = SizeField::radial_ring();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 2000; ++i) {
        const Vec2 p{u(rng), u(rng)};
        const Vec2 q{u(rng), u(rng)};
        CHECK(f.pair_target(p, q) == f.pair_target(q, p));
        CHECK(std::abs(f.evaluate(p) - f.evaluate(q)) <= 0.2 * distance(p, q) + 1e-15);
    }
}

TEST_CASE("size field positive on the square3 bounding box") {
    const auto f = SizeField::radial_ring();
    const auto g = preset_domain(DomainPreset::square3);
    double m = 1e300;
    for (int j = 0; j <= 60; ++j)
        for (int i = 0; i <= 60; ++i)
            m = std::min(m, f.evaluate({g.bbox().min.x + 0.1 * i, g.bbox().min.y + 0.1 * j}));
    CHECK(m > 0.0);
}

TEST_CASE("expression grammar") {
    CHECK(Expression::parse("1 + 2 * 3")({0, 0}) == doctest::Approx(7.0));
    CHECK(Expression::parse("(1 + 2) * 3")({0, 0}) == doctest::Approx(9.0));
    CHECK(Expression::parse("-x + y / 2")({4, 2}) == doctest::Approx(-3.0));
    CHECK(Expression::parse("2 - 3 - 4")({0, 0}) == doctest::Approx(-5.0));
    CHECK(Expression::parse("8 / 4 / 2")({0, 0}) == doctest::Approx(1.0));
    CHECK(Expression::parse("sqrt(x*x + y*y)")({3, 4}) == doctest::Approx(5.0));
    CHECK(Expression::parse("abs(x) + min(x, y) + max(x, y)")({-1, 2}) == doctest::Approx(2.0));
    CHECK(Expression::parse("pow(x, 0.5)")({9, 0}) == doctest::Approx(3.0));
    CHECK(Expression::parse("1e-2 * 3")({0, 0}) == doctest::Approx(0.03));
    CHECK(Expression::parse("0.2*abs(sqrt(x*x+y*y)-2)+0.1")({3, 0}) == doctest::Approx(0.3));
}

TEST_CASE("malformed expressions are configuration errors") {
    for (const char* bad : {"", "1 +", "(1 + 2", "foo(1)", "x y", "1 + * 2", "sqrt()", "min(1)", "z"})
        CHECK_THROWS_AS_MESSAGE(Expression::parse(bad), ConfigError, bad);
}

TEST_CASE("CLI size specifications") {
    CHECK(SizeField::parse("0.1").kind() == SizeKind::constant);
    CHECK(SizeField::parse("0.1").h() == 0.1);
    CHECK(SizeField::parse("radial-ring").kind() == SizeKind::radial_ring);
    const auto e = SizeField::parse("expr:0.1 + 0.05*x");
    CHECK(e.kind() == SizeKind::custom_expression);
    CHECK(e.evaluate({2, 0}) == doctest::Approx(0.2));
    CHECK_THROWS_AS(SizeField::parse("abc"), ConfigError);
    CHECK_THROWS_AS(SizeField::parse("-0.1"), ConfigError);
    CHECK_THROWS_AS(SizeField::parse("expr:"), ConfigError);
}

} // TEST_SUITE
