#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "freqflow/rng.hpp"
#include "freqflow/tensor.hpp"

using namespace freqflow;

TEST_CASE("RealArray shape/data consistency", "[tensor]") {
    RealArray a(Shape{2, 3}, 1.5);
    REQUIRE(a.numel() == 6);
    REQUIRE(a.at(1, 2) == 1.5);
    CHECK_THROWS_AS(RealArray(Shape{2, 2}, std::vector<double>{1.0}), DimensionError);
    CHECK(a.all_finite());
    a[0] = std::nan("");
    CHECK_FALSE(a.all_finite());
}

TEST_CASE("ComplexArray split-real round trip is lossless", "[tensor]") {
    Rng rng(7);
    ComplexArray c(Shape{3, 4});
    for (std::size_t i = 0; i < c.numel(); ++i) c.set(i, {rng.normal(), rng.normal()});
    RealArray split = c.to_split_real();
    REQUIRE(split.shape() == Shape{3, 4, 2});
    ComplexArray back = ComplexArray::from_split_real(split);
    REQUIRE(max_abs_diff(c, back) == 0.0);
}

TEST_CASE("complex_mul matches hand expansions", "[tensor]") {
    auto one = ComplexArray::vector({{1.0, 0.0}});
    auto i_unit = ComplexArray::vector({{0.0, 1.0}});

    // multiplicative identity
    auto x = ComplexArray::vector({{2.5, -0.75}, {0.0, 3.0}});
    auto idx = complex_mul(x, one);
    REQUIRE(max_abs_diff(idx, x) == 0.0);

    // pure rotation by pi/2
    auto rot = complex_mul(i_unit, one);
    REQUIRE(rot.get(0) == std::complex<double>(0.0, 1.0));

    // (3+4i)(1+2i) = -5+10i, |.| = 5*sqrt(5)
    auto p = complex_mul(ComplexArray::vector({{3.0, 4.0}}), ComplexArray::vector({{1.0, 2.0}}));
    CHECK(p.re(0) == Catch::Approx(-5.0).margin(1e-12));
    CHECK(p.im(0) == Catch::Approx(10.0).margin(1e-12));
    CHECK(amplitude(p.get(0)) == Catch::Approx(5.0 * std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("complex_mul amplitude/phase law on random pairs", "[tensor][property]") {
    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        std::complex<double> a{rng.normal(), rng.normal()};
        std::complex<double> b{rng.normal(), rng.normal()};
        auto prod = complex_mul(ComplexArray::vector({a}), ComplexArray::vector({b})).get(0);
        REQUIRE(std::abs(amplitude(prod) - amplitude(a) * amplitude(b)) < 1e-12 * (1.0 + amplitude(a) * amplitude(b)));
        double want = phase(a) + phase(b);
        double got = phase(prod);
        double diff = std::remainder(got - want, 2.0 * std::numbers::pi);
        REQUIRE(std::abs(diff) < 1e-12);
    }
}

TEST_CASE("complex_mul broadcasting over leading dims only", "[tensor]") {
    ComplexArray batch(Shape{2, 3});
    for (std::size_t i = 0; i < 6; ++i) batch.set(i, {double(i), -double(i)});
    ComplexArray row(Shape{3});
    for (std::size_t i = 0; i < 3; ++i) row.set(i, {1.0, 0.0});
    auto out = complex_mul(batch, row);
    REQUIRE(out.shape() == Shape{2, 3});
    REQUIRE(max_abs_diff(out, batch) == 0.0);
    CHECK_THROWS_AS(complex_mul(batch, ComplexArray(Shape{2})), DimensionError);
}

TEST_CASE("named streams are independent and reproducible", "[rng]") {
    StreamSplitter sa(42), sb(42), sc(43);
    auto r1 = sa.stream("init/mha");
    auto r2 = sb.stream("init/mha");
    auto r3 = sa.stream("noise");
    auto r4 = sc.stream("init/mha");
    REQUIRE(r1.next_u64() == r2.next_u64());
    REQUIRE(r1.next_u64() != r3.next_u64());
    REQUIRE(r2.next_u64() != r4.next_u64());
}
