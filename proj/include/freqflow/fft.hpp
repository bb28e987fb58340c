#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <vector>

#include "freqflow/errors.hpp"
#include "freqflow/tensor.hpp"

namespace freqflow {

// DFT convention used throughout: forward unnormalized,
//   X[k] = sum_n x[n] * exp(-2*pi*i*k*n/N),
// inverse divides by N. rfft keeps bins k = 0..N/2 (N even).

namespace detail {

using cvec = std::vector<std::complex<double>>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 Cooley-Tukey. sign = -1 forward, +1 inverse
// (inverse here is unscaled; callers divide by N).
inline void fft_pow2(cvec& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = double(sign) * 2.0 * std::numbers::pi / double(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Bluestein chirp-z: expresses an arbitrary-length DFT as a circular
// convolution carried by power-of-two FFTs. The per-length kernel is cached.
struct BluesteinPlan {
    std::size_t n = 0;
    std::size_t m = 0; // padded power of two, >= 2n-1
    cvec chirp;        // w[k] = exp(-i*pi*k^2/n), k = 0..n-1
    cvec kernel_fft;   // FFT of the conjugate-chirp kernel, length m
};

inline const BluesteinPlan& bluestein_plan(std::size_t n) {
    static std::map<std::size_t, BluesteinPlan> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    BluesteinPlan p;
    p.n = n;
    p.m = next_pow2(2 * n - 1);
    p.chirp.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small for large n.
        double ang = std::numbers::pi * double((k * k) % (2 * n)) / double(n);
        p.chirp[k] = {std::cos(ang), -std::sin(ang)};
    }
    cvec kernel(p.m, {0.0, 0.0});
    kernel[0] = std::conj(p.chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        kernel[k] = std::conj(p.chirp[k]);
        kernel[p.m - k] = std::conj(p.chirp[k]);
    }
    fft_pow2(kernel, -1);
    p.kernel_fft = std::move(kernel);
    return cache.emplace(n, std::move(p)).first->second;
}

inline void fft_any(cvec& a, int sign) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    if (is_pow2(n)) {
        fft_pow2(a, sign);
        return;
    }
    const BluesteinPlan& p = bluestein_plan(n);
    cvec fa(p.m, {0.0, 0.0});
    if (sign < 0) {
        for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * p.chirp[k];
    } else {
        for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * std::conj(p.chirp[k]);
    }
    fft_pow2(fa, -1);
    if (sign < 0) {
        for (std::size_t k = 0; k < p.m; ++k) fa[k] *= p.kernel_fft[k];
    } else {
        for (std::size_t k = 0; k < p.m; ++k) fa[k] *= std::conj(p.kernel_fft[k]);
    }
    fft_pow2(fa, +1);
    double inv_m = 1.0 / double(p.m);
    if (sign < 0) {
        for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * inv_m * p.chirp[k];
    } else {
        for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * inv_m * std::conj(p.chirp[k]);
    }
}

} // namespace detail

// Real FFT: L even, L >= 4; returns bins 0..L/2 (DC first, Nyquist last).
inline ComplexArray rfft(const RealArray& x) {
    if (x.ndim() != 1) throw DimensionError("rfft: expected 1-D input");
    const std::size_t L = x.numel();
    if (L < 4 || L % 2 != 0)
        throw ContractError("rfft: length must be even and >= 4, got " + std::to_string(L));
    detail::cvec a(L);
    for (std::size_t n = 0; n < L; ++n) a[n] = {x[n], 0.0};
    detail::fft_any(a, -1);
    ComplexArray out(Shape{L / 2 + 1});
    for (std::size_t k = 0; k <= L / 2; ++k) out.set(k, a[k]);
    return out;
}

// Inverse real FFT. X holds bins 0..L/2; DC and Nyquist must be real to
// within 1e-9 (they are zeroed), larger imaginary parts are a contract error.
inline RealArray irfft(const ComplexArray& X, std::size_t L) {
    if (X.ndim() != 1) throw DimensionError("irfft: expected 1-D spectrum");
    if (L % 2 != 0 || L < 4) throw ContractError("irfft: length must be even and >= 4");
    if (X.numel() != L / 2 + 1)
        throw DimensionError("irfft: expected " + std::to_string(L / 2 + 1) + " bins for length " +
                             std::to_string(L) + ", got " + std::to_string(X.numel()));
    if (std::abs(X.im(0)) > 1e-9 || std::abs(X.im(L / 2)) > 1e-9)
        throw ContractError("irfft: DC/Nyquist bins must be real (|im| <= 1e-9)");
    detail::cvec a(L);
    a[0] = {X.re(0), 0.0};
    a[L / 2] = {X.re(L / 2), 0.0};
    for (std::size_t k = 1; k < L / 2; ++k) {
        a[k] = X.get(k);
        a[L - k] = std::conj(X.get(k));
    }
    detail::fft_any(a, +1);
    RealArray out(Shape{L});
    const double inv = 1.0 / double(L);
    for (std::size_t n = 0; n < L; ++n) out[n] = a[n].real() * inv;
    return out;
}

// O(N^2) direct evaluation of the DFT sum; the correctness oracle for rfft.
// Accepts any L >= 1 and returns floor(L/2)+1 bins. Never used in model paths.
inline ComplexArray naive_dft(const RealArray& x) {
    if (x.ndim() != 1) throw DimensionError("naive_dft: expected 1-D input");
    const std::size_t L = x.numel();
    if (L < 1) throw ContractError("naive_dft: empty input");
    const std::size_t K = L / 2 + 1;
    ComplexArray out(Shape{K});
    for (std::size_t k = 0; k < K; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t n = 0; n < L; ++n) {
            double ang = -2.0 * std::numbers::pi * double(k) * double(n) / double(L);
            re += x[n] * std::cos(ang);
            im += x[n] * std::sin(ang);
        }
        out.set(k, {re, im});
    }
    return out;
}

} // namespace freqflow
