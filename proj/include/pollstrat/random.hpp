#pragma once

// Seed derivation and the handful of samplers the library needs.
//
// std::mt19937_64 is fully specified by the standard, but the std::
// distributions are not, so the samplers below are written out to keep
// seeded output identical across standard library implementations.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace pollstrat {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Mixes a base seed with a sequence of stream indices (replicate, attempt,
/// poll, ...) into an independent child seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept
{
    std::uint64_t h = splitmix64(seed);
    for (auto v : path) {
        h = splitmix64(h ^ splitmix64(v + 0x632be59bd9b4e019ULL));
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), unbiased (rejection on the top bits).
    std::uint64_t index(std::uint64_t n)
    {
        if (n <= 1) {
            return 0;
        }
        std::uint64_t const limit = std::numeric_limits<std::uint64_t>::max()
                                    - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; both variates are used.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double const u2 = uniform();
        double const radius = std::sqrt(-2.0 * std::log(u1));
        double const angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Poisson by multiplication of uniforms; fine for the small means used
    /// here, falls back to a rounded normal for large ones.
    std::uint64_t poisson(double mean)
    {
        if (mean <= 0.0) {
            return 0;
        }
        if (mean > 500.0) {
            double const x = std::round(normal(mean, std::sqrt(mean)));
            return x < 0.0 ? 0 : static_cast<std::uint64_t>(x);
        }
        double const limit = std::exp(-mean);
        double prod = uniform();
        std::uint64_t k = 0;
        while (prod > limit) {
            prod *= uniform();
            ++k;
        }
        return k;
    }

    /// Marsaglia-Tsang gamma(shape, 1).
    double gamma(double shape)
    {
        if (shape < 1.0) {
            double u;
            do {
                u = uniform();
            } while (u <= 0.0);
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double const d = shape - 1.0 / 3.0;
        double const c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x;
            double v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double const u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) {
                return d * v;
            }
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
                return d * v;
            }
        }
    }

    std::vector<double> dirichlet(std::span<double const> alpha)
    {
        std::vector<double> out(alpha.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            out[i] = gamma(alpha[i]);
            sum += out[i];
        }
        for (auto& v : out) {
            v /= sum;
        }
        return out;
    }

    /// Index drawn from a discrete distribution given by `weights`.
    std::size_t categorical(std::span<double const> weights)
    {
        double total = 0.0;
        for (double w : weights) {
            total += w;
        }
        double target = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (target < weights[i]) {
                return i;
            }
            target -= weights[i];
        }
        // Rounding left `target` past the end: take the last positive weight.
        for (std::size_t i = weights.size(); i-- > 0;) {
            if (weights[i] > 0.0) {
                return i;
            }
        }
        return 0;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace pollstrat
