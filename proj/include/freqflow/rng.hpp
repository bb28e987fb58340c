#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace freqflow {

// Deterministic counter-free PRNG (splitmix64). Hand-rolled so that streams
// are bit-identical across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::size_t index(std::size_t n) { return std::size_t(next_u64() % n); }

    // Box-Muller; one value per call (the pair's twin is discarded to keep
    // the stream position independent of call parity).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::vector<double> normals(std::size_t n, double mean = 0.0, double stddev = 1.0) {
        std::vector<double> out(n);
        for (auto& v : out) v = normal(mean, stddev);
        return out;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::uint64_t state_;
};

// Splits one master seed into independent named streams, so toggling one
// consumer (ablations, preset depth) cannot shift the draws of another.
class StreamSplitter {
public:
    explicit StreamSplitter(std::uint64_t seed) : seed_(seed) {}

    Rng stream(std::string_view name) const {
        // FNV-1a over the name, folded with the master seed.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : name) {
            h ^= std::uint64_t(static_cast<unsigned char>(c));
            h *= 0x100000001b3ULL;
        }
        return Rng(h ^ (seed_ * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

} // namespace freqflow
