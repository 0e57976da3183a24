#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "sharpbench/error.hpp"

namespace sharpbench {

// Deterministic random source. The engine is std::mt19937_64 (bit-exact across
// platforms by the standard); the distributions are implemented here instead of
// using std::*_distribution, whose output is implementation-defined. A run is
// therefore reproducible from its seed on any conforming compiler.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static constexpr const char* kAlgorithm = "mt19937_64 (53-bit uniforms, Box-Muller normals)";

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller with a cached spare.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform in [0, n) without modulo bias (rejection sampling).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw Error("Rng::below: n must be positive");
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw Error("Rng::uniform_int: empty range");
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi) - lo + 1));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Independent named stream derived from one master seed. Every stochastic
// component of a run (init, shuffling, noise, masks, splits) draws from its own
// stream, so enabling one component never shifts the draws of another.
inline Rng derive_stream(std::uint64_t master_seed, std::string_view tag) {
    return Rng(detail::splitmix64(master_seed ^ detail::fnv1a64(tag)));
}

}  // namespace sharpbench
