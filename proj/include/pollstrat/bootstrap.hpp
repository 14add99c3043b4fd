#pragma once

// Seeded nonparametric bootstrap with percentile intervals.
//
// Replicate r, attempt a draws its resample from an engine seeded with
// derive_seed(seed, {r, a}), so the result does not depend on how replicates
// are scheduled across threads.

#include <pollstrat/error.hpp>
#include <pollstrat/parallel.hpp>
#include <pollstrat/random.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace pollstrat {

struct BootstrapSummary {
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;

    bool operator==(BootstrapSummary const&) const = default;
};

struct BootstrapConfig {
    std::size_t replicates = 1000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    double level = 0.95;
    /// Total attempts allowed = max_attempt_factor * replicates.
    std::size_t max_attempt_factor = 10;
};

/// Linear-interpolation percentile of sorted data (the "type 7" rule).
inline double percentile_sorted(std::span<double const> sorted, double q)
{
    if (sorted.empty()) {
        throw Error(ErrorCode::InvalidArgument, "percentile of empty sample");
    }
    double const h = (static_cast<double>(sorted.size()) - 1.0) * q;
    auto const lo = static_cast<std::size_t>(std::floor(h));
    auto const hi = std::min(lo + 1, sorted.size() - 1);
    double const frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Draws n indices in [0, n) with replacement.
inline std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) {
        i = static_cast<std::size_t>(rng.index(n));
    }
    return idx;
}

/// Bootstraps a vector-valued statistic. `statistic` maps a span of row
/// indices to a fixed-length vector of values, or to nullopt when the
/// resample is unusable (e.g. a singular refit); such replicates are redrawn.
/// It is called concurrently when config.threads != 1 and must be safe for
/// that. Throws BootstrapExhausted when more than
/// max_attempt_factor * replicates attempts are needed in total.
template <class Statistic>
std::vector<BootstrapSummary> bootstrap_multi(Statistic&& statistic, std::size_t n,
                                              BootstrapConfig const& config)
{
    if (n == 0) {
        throw Error(ErrorCode::InvalidArgument, "bootstrap: empty dataset");
    }
    if (config.replicates == 0) {
        throw Error(ErrorCode::InvalidArgument, "bootstrap: need at least one replicate");
    }
    std::vector<std::size_t> identity(n);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    std::optional<std::vector<double>> point = statistic(std::span<std::size_t const>(identity));
    if (!point) {
        throw Error(ErrorCode::InvalidArgument, "bootstrap: statistic undefined on the full sample");
    }
    auto const k = point->size();

    auto const budget = config.max_attempt_factor * config.replicates;
    std::atomic<std::size_t> failures{0};
    std::atomic<bool> exhausted{false};
    std::vector<std::vector<double>> values(config.replicates);
    parallel_for(config.replicates, config.threads, [&](std::size_t r) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            if (exhausted.load(std::memory_order_relaxed)) {
                return;
            }
            auto const idx = resample_indices(n, derive_seed(config.seed, {r, attempt}));
            auto v = statistic(std::span<std::size_t const>(idx));
            if (v) {
                if (v->size() != k) {
                    throw Error(ErrorCode::InvalidArgument, "bootstrap: statistic changed length");
                }
                values[r] = std::move(*v);
                return;
            }
            // Each failure is one attempt beyond the B successful ones.
            if (failures.fetch_add(1) + 1 + config.replicates > budget) {
                exhausted = true;
                return;
            }
        }
    });
    if (exhausted) {
        throw Error(ErrorCode::BootstrapExhausted,
                    "bootstrap needed more than " + std::to_string(budget) + " attempts");
    }

    double const alpha = (1.0 - config.level) / 2.0;
    std::vector<BootstrapSummary> out(k);
    std::vector<double> column(config.replicates);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t r = 0; r < config.replicates; ++r) {
            column[r] = values[r][j];
        }
        std::sort(column.begin(), column.end());
        out[j].point = (*point)[j];
        out[j].ci_low = percentile_sorted(column, alpha);
        out[j].ci_high = percentile_sorted(column, 1.0 - alpha);
        out[j].replicates = config.replicates;
        out[j].seed = config.seed;
    }
    return out;
}

/// Scalar convenience wrapper; `statistic` returns double or optional<double>.
template <class Statistic>
BootstrapSummary bootstrap(Statistic&& statistic, std::size_t n, BootstrapConfig const& config)
{
    auto wrapped = [&](std::span<std::size_t const> idx) -> std::optional<std::vector<double>> {
        std::optional<double> v = statistic(idx);
        if (!v) {
            return std::nullopt;
        }
        return std::vector<double>{*v};
    };
    return bootstrap_multi(wrapped, n, config).front();
}

}  // namespace pollstrat
