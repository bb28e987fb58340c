#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "freqflow/rng.hpp"
#include "freqflow/spectrum.hpp"

using namespace freqflow;

namespace {

RealArray zero_mean_random(std::size_t L, Rng& rng) {
    RealArray x(Shape{L});
    double mu = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
        x[i] = rng.normal();
        mu += x[i];
    }
    mu /= double(L);
    for (std::size_t i = 0; i < L; ++i) x[i] -= mu;
    return x;
}

double spectral_energy(const Spectrum& s, std::size_t from, std::size_t to) {
    double e = 0.0;
    for (std::size_t v = 0; v < s.variates(); ++v)
        for (std::size_t k = from; k < to; ++k) e += std::norm(s.at(v, k));
    return e;
}

} // namespace

TEST_CASE("drop_dc on the alternating signal", "[spectrum]") {
    auto X = rfft(RealArray::vector({1, -1, 1, -1}));
    // full rFFT of [1,-1,1,-1] is [0, 0, 4]
    REQUIRE(std::abs(X.get(0)) < 1e-12);
    REQUIRE(std::abs(X.get(1)) < 1e-12);
    REQUIRE(std::abs(X.get(2) - std::complex<double>(4.0, 0.0)) < 1e-12);
    Spectrum s = drop_dc(X);
    REQUIRE(s.bins() == 2);
    REQUIRE(std::abs(s.at(0, 0)) < 1e-12);
    REQUIRE(std::abs(s.at(0, 1) - std::complex<double>(4.0, 0.0)) < 1e-12);
    REQUIRE(s.source_length == 4);
    REQUIRE(s.nyquist_included);
}

TEST_CASE("drop_dc round trip with mean removed and the leak guard", "[spectrum]") {
    Rng rng(2);
    for (std::size_t L : {std::size_t(8), std::size_t(96)}) {
        auto x = zero_mean_random(L, rng);
        Spectrum s = drop_dc(rfft(x));
        auto back = to_signal(s);
        for (std::size_t n = 0; n < L; ++n) REQUIRE(back.vec()[n] == Catch::Approx(x[n]).margin(1e-10));
    }
    RealArray biased(Shape{8}, 1.0);
    CHECK_THROWS_AS(drop_dc(rfft(biased)), DcLeakError);
}

TEST_CASE("low_pass keeps harmonic content and truncates correctly", "[spectrum]") {
    const std::size_t L = 96;
    RealArray x(Shape{L});
    for (std::size_t n = 0; n < L; ++n) {
        double t = double(n);
        x[n] = std::sin(2.0 * std::numbers::pi * t / double(L)) +
               0.5 * std::sin(2.0 * std::numbers::pi * 2.0 * t / double(L) + 0.3) +
               0.25 * std::sin(2.0 * std::numbers::pi * 3.0 * t / double(L) + 1.1);
    }
    Spectrum s = drop_dc(rfft(x));

    // first three harmonics of period L with n_harmonics=6 -> lossless
    LpfConfig cfg;
    cfg.base_period = L;
    Spectrum lp = low_pass(s, cfg);
    REQUIRE(lp.bins() == 6);
    auto back = to_signal(zero_pad_to(lp, L / 2));
    for (std::size_t n = 0; n < L; ++n) REQUIRE(back.vec()[n] == Catch::Approx(x[n]).margin(1e-10));

    LpfConfig exp3;
    exp3.explicit_cutoff = 3;
    REQUIRE(low_pass(s, exp3).bins() == 3);
    LpfConfig bad;
    bad.explicit_cutoff = 99;
    CHECK_THROWS_AS(low_pass(s, bad), ConfigError);
}

TEST_CASE("period-24 heuristic cutoff retains >= 99.9% energy", "[spectrum]") {
    const std::size_t L = 96;
    Rng rng(5);
    RealArray x(Shape{L});
    for (std::size_t n = 0; n < L; ++n) x[n] = 0.0;
    for (int h = 1; h <= 6; ++h) {
        double amp = 1.0 / double(h);
        double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t n = 0; n < L; ++n)
            x[n] += amp * std::sin(2.0 * std::numbers::pi * double(h) * double(n) / 24.0 + ph);
    }
    double mu = 0.0;
    for (std::size_t n = 0; n < L; ++n) mu += x[n] / double(L);
    for (std::size_t n = 0; n < L; ++n) x[n] -= mu;

    Spectrum s = drop_dc(rfft(x));
    LpfConfig cfg;
    cfg.base_period = 24;
    std::size_t cut = resolve_cutoff(s, cfg);
    REQUIRE(cut == 24);
    double below = spectral_energy(s, 0, cut);
    double total = spectral_energy(s, 0, s.bins());
    REQUIRE(below / total >= 0.999);
}

TEST_CASE("auto base period picks the dominant bin", "[spectrum]") {
    const std::size_t L = 64;
    RealArray x(Shape{L});
    for (std::size_t n = 0; n < L; ++n)
        x[n] = 2.0 * std::cos(2.0 * std::numbers::pi * 4.0 * double(n) / double(L));
    Spectrum s = drop_dc(rfft(x));
    LpfConfig cfg; // auto: dominant bin index 3 -> fundamental 4 cycles -> period 16
    cfg.n_harmonics = 2;
    // cutoff = ceil(2 * 64 / 16) = 8
    REQUIRE(resolve_cutoff(s, cfg) == 8);
}

TEST_CASE("zero_pad_to basics and waveform stretching", "[spectrum]") {
    Spectrum s;
    s.coeffs = ComplexArray(Shape{1, 2});
    s.coeffs.set(0, {1.0, -2.0});
    s.coeffs.set(1, {0.5, 0.25});
    s.source_length = 4;
    s.nyquist_included = true;

    Spectrum same = zero_pad_to(s, 2);
    REQUIRE(same.bins() == 2);
    REQUIRE(max_abs_diff(same.coeffs, s.coeffs) == 0.0);

    Spectrum padded = zero_pad_to(s, 4);
    REQUIRE(padded.bins() == 4);
    REQUIRE(padded.source_length == 8);
    REQUIRE(padded.at(0, 0) == std::complex<double>(1.0, -2.0));
    REQUIRE(std::abs(padded.at(0, 2)) == 0.0);
    REQUIRE(std::abs(padded.at(0, 3)) == 0.0);
    CHECK_THROWS_AS(zero_pad_to(padded, 2), ContractError);

    // single bin k=0 (frequency 1 cycle / 8 samples): pad to 16 bins keeps the
    // cycle count per grid; compare against the analytically sampled cosine.
    Spectrum one;
    one.coeffs = ComplexArray(Shape{1, 4});
    one.coeffs.set(0, {4.0, 0.0}); // amplitude 1 over L=8
    one.source_length = 8;
    Spectrum big = zero_pad_to(one, 16); // now L=32, bin 0 = 1 cycle / 32
    auto wave = to_signal(big);
    for (std::size_t n = 0; n < 32; ++n) {
        double expect = (8.0 / 32.0) * 2.0 * std::cos(2.0 * std::numbers::pi * double(n) / 32.0) / 2.0;
        // coefficient 4 on a length-32 grid gives amplitude 2*4/32 = 0.25
        expect = 0.25 * std::cos(2.0 * std::numbers::pi * double(n) / 32.0);
        REQUIRE(wave.vec()[n] == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("time_shift identities, circular-shift oracle, and composition", "[spectrum]") {
    Rng rng(11);
    const std::size_t L = 32;
    auto x = zero_mean_random(L, rng);
    Spectrum s = drop_dc(rfft(x));

    Spectrum same = time_shift(s, 0.0);
    REQUIRE(max_abs_diff(same.coeffs, s.coeffs) < 1e-15);
    Spectrum full = time_shift(s, double(L));
    REQUIRE(max_abs_diff(full.coeffs, s.coeffs) < 1e-12);

    // tau = 1 equals the circular shift x[n] -> x[n-1]
    Spectrum shifted = time_shift(s, 1.0);
    RealArray rolled(Shape{L});
    for (std::size_t n = 0; n < L; ++n) rolled[n] = x[(n + L - 1) % L];
    Spectrum oracle = drop_dc(rfft(rolled));
    REQUIRE(max_abs_diff(shifted.coeffs, oracle.coeffs) < 1e-9);

    // amplitude preservation to 1e-12
    Spectrum tau_pi = time_shift(s, 2.7);
    for (std::size_t k = 0; k < s.bins(); ++k)
        REQUIRE(std::abs(std::abs(tau_pi.at(0, k)) - std::abs(s.at(0, k))) < 1e-12);

    // additive composition
    Spectrum two_step = time_shift(time_shift(s, 1.3), 0.9);
    Spectrum one_step = time_shift(s, 2.2);
    REQUIRE(max_abs_diff(two_step.coeffs, one_step.coeffs) < 1e-12);
}

TEST_CASE("low_pass is idempotent", "[spectrum][property]") {
    Rng rng(19);
    auto x = zero_mean_random(64, rng);
    Spectrum s = drop_dc(rfft(x));
    LpfConfig cfg;
    cfg.explicit_cutoff = 10;
    Spectrum once = low_pass(s, cfg);
    Spectrum twice = low_pass(once, cfg);
    REQUIRE(max_abs_diff(once.coeffs, twice.coeffs) == 0.0);
    REQUIRE(once.source_length == twice.source_length);
}
