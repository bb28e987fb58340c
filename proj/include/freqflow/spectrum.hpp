#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>

#include "freqflow/errors.hpp"
#include "freqflow/fft.hpp"
#include "freqflow/tensor.hpp"

namespace freqflow {

// Raised when a supposedly zero-mean signal still carries a DC component;
// usually means instance normalization was skipped upstream.
struct DcLeakError : ContractError {
    using ContractError::ContractError;
};

// DC-excluded spectrum: coeffs[v][k] corresponds to frequency k+1 cycles per
// source_length samples. When K == source_length/2 the last bin is Nyquist.
struct Spectrum {
    ComplexArray coeffs; // [V x K]
    std::size_t source_length = 0;
    bool nyquist_included = false;

    std::size_t variates() const { return coeffs.shape().at(0); }
    std::size_t bins() const { return coeffs.shape().at(1); }
    std::complex<double> at(std::size_t v, std::size_t k) const { return coeffs.get(v * bins() + k); }
    void set(std::size_t v, std::size_t k, std::complex<double> c) { coeffs.set(v * bins() + k, c); }
};

struct LpfConfig {
    std::size_t n_harmonics = 6;
    std::optional<std::size_t> base_period;    // samples; empty means "auto"
    std::optional<std::size_t> explicit_cutoff; // overrides the heuristic
};

// Strips the DC bin from a full rFFT layout. The input must come from a
// zero-mean signal: |X[0]| < 1e-8 * L, otherwise the leak is reported.
inline Spectrum drop_dc(const ComplexArray& X) {
    if (X.ndim() != 1) throw DimensionError("drop_dc: expected 1-D rFFT bins");
    std::size_t K_full = X.numel();
    if (K_full < 3) throw ContractError("drop_dc: need at least 3 bins");
    std::size_t L = 2 * (K_full - 1);
    if (std::abs(X.get(0)) >= 1e-8 * double(L))
        throw DcLeakError("drop_dc: DC component " + std::to_string(std::abs(X.get(0))) +
                          " exceeds 1e-8*L; normalize the signal first");
    ComplexArray coeffs(Shape{1, K_full - 1});
    for (std::size_t k = 1; k < K_full; ++k) coeffs.set(k - 1, X.get(k));
    return Spectrum{std::move(coeffs), L, true};
}

// Multi-variate spectrum from a [V x L] signal block (each row zero-mean).
inline Spectrum spectrum_of(const RealArray& x) {
    if (x.ndim() != 2) throw DimensionError("spectrum_of: expected [V x L]");
    std::size_t V = x.shape()[0], L = x.shape()[1];
    ComplexArray coeffs(Shape{V, L / 2});
    for (std::size_t v = 0; v < V; ++v) {
        RealArray row(Shape{L}, std::vector<double>(x.vec().begin() + long(v * L),
                                                    x.vec().begin() + long((v + 1) * L)));
        Spectrum s = drop_dc(rfft(row));
        for (std::size_t k = 0; k < L / 2; ++k) coeffs.set(v * (L / 2) + k, s.at(0, k));
    }
    return Spectrum{std::move(coeffs), L, true};
}

// Prepends a zero DC bin and inverts each variate back to the time domain.
// Requires a full-resolution spectrum (K == L/2); zero_pad_to first if not.
inline RealArray to_signal(const Spectrum& s) {
    std::size_t V = s.variates(), K = s.bins(), L = s.source_length;
    if (K != L / 2)
        throw ContractError("to_signal: spectrum has " + std::to_string(K) + " bins but L/2 = " +
                            std::to_string(L / 2) + "; zero_pad_to full resolution first");
    RealArray out(Shape{V, L});
    for (std::size_t v = 0; v < V; ++v) {
        ComplexArray full(Shape{K + 1});
        for (std::size_t k = 0; k < K; ++k) full.set(k + 1, s.at(v, k));
        RealArray row = irfft(full, L);
        for (std::size_t n = 0; n < L; ++n) out.vec()[v * L + n] = row[n];
    }
    return out;
}

inline std::size_t resolve_cutoff(const Spectrum& s, const LpfConfig& cfg) {
    std::size_t K = s.bins();
    if (cfg.explicit_cutoff) {
        std::size_t c = *cfg.explicit_cutoff;
        if (c < 1 || c > K)
            throw ConfigError("low_pass: explicit cutoff " + std::to_string(c) + " outside [1, " +
                              std::to_string(K) + "]");
        return c;
    }
    if (cfg.n_harmonics < 1) throw ConfigError("low_pass: n_harmonics must be >= 1");
    std::size_t period;
    if (cfg.base_period) {
        period = *cfg.base_period;
        if (period < 2) throw ConfigError("low_pass: base_period must be >= 2 samples");
    } else {
        // fundamental = argmax mean amplitude across variates
        std::size_t best = 0;
        double best_amp = -1.0;
        for (std::size_t k = 0; k < K; ++k) {
            double amp = 0.0;
            for (std::size_t v = 0; v < s.variates(); ++v) amp += std::abs(s.at(v, k));
            if (amp > best_amp) {
                best_amp = amp;
                best = k;
            }
        }
        period = std::max<std::size_t>(1, s.source_length / (best + 1));
    }
    double raw = std::ceil(double(cfg.n_harmonics) * double(s.source_length) / double(period));
    return std::clamp<std::size_t>(std::size_t(raw), 1, K);
}

// Keeps the first `cutoff` bins (frequencies 1..cutoff cycles per window).
inline Spectrum low_pass(const Spectrum& s, const LpfConfig& cfg) {
    std::size_t c = resolve_cutoff(s, cfg);
    std::size_t V = s.variates(), K = s.bins();
    ComplexArray coeffs(Shape{V, c});
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t k = 0; k < c; ++k) coeffs.set(v * c + k, s.at(v, k));
    return Spectrum{std::move(coeffs), s.source_length, c == K && s.nyquist_included};
}

// Appends zero bins; the spectrum is then read on the longer grid of
// 2*target_bins samples (bin k stays at index k, i.e. frequency k+1 cycles).
inline Spectrum zero_pad_to(const Spectrum& s, std::size_t target_bins) {
    std::size_t V = s.variates(), K = s.bins();
    if (target_bins < K)
        throw ContractError("zero_pad_to: target " + std::to_string(target_bins) + " smaller than current " +
                            std::to_string(K));
    if (target_bins == K) {
        Spectrum out = s;
        out.source_length = 2 * target_bins;
        out.nyquist_included = true;
        return out;
    }
    ComplexArray coeffs(Shape{V, target_bins});
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t k = 0; k < K; ++k) coeffs.set(v * target_bins + k, s.at(v, k));
    return Spectrum{std::move(coeffs), 2 * target_bins, true};
}

// Time shift by tau samples: bin k (frequency k+1) picks up phase
// -2*pi*(k+1)*tau/L; amplitudes are untouched.
inline Spectrum time_shift(const Spectrum& s, double tau) {
    std::size_t V = s.variates(), K = s.bins();
    Spectrum out = s;
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t k = 0; k < K; ++k) {
            double ang = -2.0 * std::numbers::pi * double(k + 1) * tau / double(s.source_length);
            out.set(v, k, s.at(v, k) * std::complex<double>(std::cos(ang), std::sin(ang)));
        }
    return out;
}

} // namespace freqflow
