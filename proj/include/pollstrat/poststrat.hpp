#pragma once

// Regression on per-poll stratum marginals followed by poststratification
// against population reference tables:
//
//   poll model:      y_p   = b0 + sum_d sum_{g != ref_d} b_{d,g} p_p(d,g)
//   overall:         y_e   = b0 + sum_d sum_{g != ref_d} b_{d,g} p_e(d,g)
//   stratum g of d0: y_e(g) = same, with p_e(d0,.) replaced by the point
//                    mass at g and p_e(d,.) by p_e(d,. | g) for d != d0.

#include <pollstrat/bootstrap.hpp>
#include <pollstrat/error.hpp>
#include <pollstrat/model.hpp>
#include <pollstrat/normalize.hpp>
#include <pollstrat/stats.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pollstrat {

struct PollObservation {
    NormalizedOutcome outcome;
    StratumMarginals marginals;
};

inline constexpr std::uint64_t kDefaultMinVotes = 50;

inline std::vector<std::uint64_t> default_threshold_grid()
{
    return {0, 10, 25, 50, 100, 200, 300, 500, 750, 1000};
}

//---------------------------------------------------------------------------//
// Design assembly
//---------------------------------------------------------------------------//

/// Polls that pass the vote filter, with predictors laid out densely and
/// per-dimension observation flags; imputation is deferred so that bootstrap
/// resamples can re-impute from their own rows.
struct PreparedPolls {
    std::vector<std::string> dimensions;   // in registry order
    std::vector<StratumKey> keys;          // design columns after the intercept
    std::vector<std::size_t> key_dim;      // dimension index of each column
    Eigen::MatrixXd raw;                   // n x keys, undefined where unobserved
    std::vector<std::vector<char>> observed;  // n x dimensions
    Eigen::VectorXd response;
    std::vector<std::string> poll_ids;
    std::uint64_t min_votes = 0;

    std::size_t size() const { return poll_ids.size(); }
};

inline std::vector<std::string> ordered_dimension_set(DimensionRegistry const& registry,
                                                      std::vector<std::string> const& dimension_set)
{
    for (auto const& d : dimension_set) {
        if (registry.find(d) == nullptr) {
            throw Error(ErrorCode::InvalidArgument, "dimension '" + d + "' not in registry");
        }
    }
    std::vector<std::string> out;
    for (auto const& d : registry.dimensions()) {
        if (std::find(dimension_set.begin(), dimension_set.end(), d.id) != dimension_set.end()) {
            out.push_back(d.id);
        }
    }
    return out;
}

inline PreparedPolls prepare_polls(std::span<PollObservation const> observations,
                                   DimensionRegistry const& registry,
                                   std::vector<std::string> const& dimension_set,
                                   std::uint64_t min_votes)
{
    PreparedPolls p;
    p.dimensions = ordered_dimension_set(registry, dimension_set);
    p.keys = registry.predictor_keys(p.dimensions);
    p.min_votes = min_votes;
    for (auto const& k : p.keys) {
        auto it = std::find(p.dimensions.begin(), p.dimensions.end(), k.dimension);
        p.key_dim.push_back(static_cast<std::size_t>(it - p.dimensions.begin()));
    }

    std::vector<PollObservation const*> kept;
    for (auto const& obs : observations) {
        if (obs.outcome.effective_votes >= min_votes) {
            kept.push_back(&obs);
        }
    }
    if (kept.empty()) {
        throw Error(ErrorCode::NoPollsAfterFilter,
                    "no poll has at least " + std::to_string(min_votes) + " focal votes");
    }

    auto const n = static_cast<Eigen::Index>(kept.size());
    auto const k = static_cast<Eigen::Index>(p.keys.size());
    p.raw = Eigen::MatrixXd::Zero(n, k);
    p.response.resize(n);
    p.observed.assign(kept.size(), std::vector<char>(p.dimensions.size(), 0));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto const& obs = *kept[static_cast<std::size_t>(i)];
        p.poll_ids.push_back(obs.outcome.poll_id);
        p.response[i] = obs.outcome.share_focal;
        for (std::size_t d = 0; d < p.dimensions.size(); ++d) {
            p.observed[static_cast<std::size_t>(i)][d] = obs.marginals.observed(p.dimensions[d]) ? 1 : 0;
        }
        for (Eigen::Index j = 0; j < k; ++j) {
            p.raw(i, j) = obs.marginals.fraction(p.keys[static_cast<std::size_t>(j)]);
        }
    }
    return p;
}

struct AssembledDesign {
    DesignMatrix design;
    std::map<StratumKey, double> imputation_means;
};

/// Builds the design matrix from the given rows of `prepared` (repeats
/// allowed), replacing unobserved predictors by their column mean over the
/// observed rows of the same selection.
inline AssembledDesign build_design(PreparedPolls const& prepared, std::span<std::size_t const> rows)
{
    auto const n = static_cast<Eigen::Index>(rows.size());
    auto const k = static_cast<Eigen::Index>(prepared.keys.size());
    auto const dims = prepared.dimensions.size();

    std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> dim_count(dims, 0);
    for (auto r : rows) {
        for (std::size_t d = 0; d < dims; ++d) {
            dim_count[d] += static_cast<std::size_t>(prepared.observed[r][d]);
        }
        for (Eigen::Index j = 0; j < k; ++j) {
            if (prepared.observed[r][prepared.key_dim[static_cast<std::size_t>(j)]]) {
                sums[static_cast<std::size_t>(j)] += prepared.raw(static_cast<Eigen::Index>(r), j);
            }
        }
    }
    for (std::size_t d = 0; d < dims; ++d) {
        if (dim_count[d] == 0) {
            throw Error(ErrorCode::AllMissingDimension,
                        "dimension '" + prepared.dimensions[d] + "' is not observed in any retained poll");
        }
    }

    AssembledDesign out;
    std::vector<double> means(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
        auto const jj = static_cast<std::size_t>(j);
        means[jj] = sums[jj] / static_cast<double>(dim_count[prepared.key_dim[jj]]);
        out.imputation_means[prepared.keys[jj]] = means[jj];
    }

    auto& x = out.design.values;
    x.resize(n, k + 1);
    out.design.response.resize(n);
    out.design.column_keys = prepared.keys;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto const r = rows[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            auto const jj = static_cast<std::size_t>(j);
            x(i, j + 1) = prepared.observed[r][prepared.key_dim[jj]]
                              ? prepared.raw(static_cast<Eigen::Index>(r), j)
                              : means[jj];
        }
        out.design.response[i] = prepared.response[static_cast<Eigen::Index>(r)];
    }
    return out;
}

inline std::vector<std::size_t> all_rows(std::size_t n)
{
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i] = i;
    }
    return rows;
}

/// Keeps polls with at least `min_votes` focal votes (the bound is
/// inclusive), one column per non-reference stratum of each selected
/// dimension, mean-imputing dimensions a poll does not observe.
inline AssembledDesign assemble_design(std::span<PollObservation const> observations,
                                       DimensionRegistry const& registry,
                                       std::vector<std::string> const& dimension_set,
                                       std::uint64_t min_votes)
{
    auto const prepared = prepare_polls(observations, registry, dimension_set, min_votes);
    auto const rows = all_rows(prepared.size());
    return build_design(prepared, rows);
}

inline FittedModel fit_prepared(PreparedPolls const& prepared, std::span<std::size_t const> rows)
{
    auto assembled = build_design(prepared, rows);
    auto model = ols_fit(assembled.design);
    model.imputation_means = std::move(assembled.imputation_means);
    model.min_votes = prepared.min_votes;
    model.dimension_set = prepared.dimensions;
    return model;
}

inline FittedModel fit_model(std::span<PollObservation const> observations,
                             DimensionRegistry const& registry,
                             std::vector<std::string> const& dimension_set, std::uint64_t min_votes)
{
    auto const prepared = prepare_polls(observations, registry, dimension_set, min_votes);
    auto const rows = all_rows(prepared.size());
    return fit_prepared(prepared, rows);
}

//---------------------------------------------------------------------------//
// Poststratification
//---------------------------------------------------------------------------//

/// Population weight of each coefficient in the overall estimate.
inline std::vector<double> overall_weights(std::span<StratumKey const> keys,
                                           ReferenceDistribution const& ref)
{
    std::vector<double> w;
    w.reserve(keys.size());
    for (auto const& k : keys) {
        auto it = ref.marginals.find(k);
        if (it == ref.marginals.end()) {
            throw Error(ErrorCode::MissingMarginal, "reference has no marginal for " + k.str());
        }
        w.push_back(it->second);
    }
    return w;
}

/// Weights for the estimate conditioned on `condition`: an indicator on the
/// condition's own dimension, conditional distributions elsewhere.
inline std::vector<double> conditional_weights(std::span<StratumKey const> keys,
                                               ReferenceDistribution const& ref,
                                               StratumKey const& condition)
{
    std::vector<double> w;
    w.reserve(keys.size());
    for (auto const& k : keys) {
        if (k.dimension == condition.dimension) {
            w.push_back(k.stratum == condition.stratum ? 1.0 : 0.0);
            continue;
        }
        auto it = ref.conditionals.find({condition, k});
        if (it == ref.conditionals.end()) {
            throw Error(ErrorCode::MissingConditional,
                        "reference has no p(" + k.str() + " | " + condition.str() + ")");
        }
        w.push_back(it->second);
    }
    return w;
}

namespace detail {

inline std::vector<StratumKey> coefficient_keys(FittedModel const& model)
{
    std::vector<StratumKey> keys;
    for (auto const& [k, c] : model.coefficients) {
        keys.push_back(k);
    }
    return keys;
}

inline double weighted_sum(FittedModel const& model, std::span<StratumKey const> keys,
                           std::span<double const> weights)
{
    double y = model.intercept.estimate;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        y += model.coefficients.at(keys[i]).estimate * weights[i];
    }
    return y;
}

}  // namespace detail

inline double poststratify(FittedModel const& model, ReferenceDistribution const& ref)
{
    auto const keys = detail::coefficient_keys(model);
    auto const w = overall_weights(keys, ref);
    return detail::weighted_sum(model, keys, w);
}

inline double poststratify_conditional(FittedModel const& model, ReferenceDistribution const& ref,
                                       StratumKey const& condition)
{
    auto const keys = detail::coefficient_keys(model);
    auto const w = conditional_weights(keys, ref, condition);
    return detail::weighted_sum(model, keys, w);
}

//---------------------------------------------------------------------------//
// Error metrics
//---------------------------------------------------------------------------//

struct ErrorMetrics {
    std::optional<double> abs_error;
    std::optional<double> mean_stratum_abs_error;
    std::size_t strata_without_truth = 0;
};

/// abs_error = |y - y_hat|; the stratum error is a mean over dimensions of
/// the mean absolute error over that dimension's strata. Strata without a
/// ground-truth value are skipped and counted.
inline ErrorMetrics error_metrics(std::optional<double> overall_estimate,
                                  std::map<StratumKey, double> const& stratum_estimates,
                                  ReferenceDistribution const& ref)
{
    ErrorMetrics m;
    if (overall_estimate && ref.overall_outcome) {
        m.abs_error = std::abs(*ref.overall_outcome - *overall_estimate);
    }
    std::map<std::string, std::pair<double, std::size_t>> by_dim;
    for (auto const& [key, est] : stratum_estimates) {
        auto it = ref.stratum_outcomes.find(key);
        if (it == ref.stratum_outcomes.end()) {
            ++m.strata_without_truth;
            continue;
        }
        auto& acc = by_dim[key.dimension];
        acc.first += std::abs(it->second - est);
        acc.second += 1;
    }
    if (!by_dim.empty()) {
        double total = 0.0;
        for (auto const& [dim, acc] : by_dim) {
            total += acc.first / static_cast<double>(acc.second);
        }
        m.mean_stratum_abs_error = total / static_cast<double>(by_dim.size());
    }
    return m;
}

//---------------------------------------------------------------------------//
// Full estimate with bootstrap intervals
//---------------------------------------------------------------------------//

struct EstimateConfig {
    std::vector<std::string> dimension_set = default_poststrat_dimensions();
    std::uint64_t min_votes = kDefaultMinVotes;
    BootstrapConfig bootstrap{};
    bool per_stratum = true;
};

struct EstimateReport {
    Election election = Election::Y2020;
    std::uint64_t min_votes = 0;
    std::size_t n_polls_used = 0;
    BootstrapSummary overall;
    std::map<StratumKey, BootstrapSummary> per_stratum;
    std::optional<double> abs_error;
    std::optional<double> mean_stratum_abs_error;
    std::size_t strata_without_truth = 0;
    /// Estimates outside [0, 1]; reported, never clamped.
    std::vector<std::string> out_of_range;

    bool operator==(EstimateReport const&) const = default;
};

namespace detail {

inline bool is_refit_failure(ErrorCode c)
{
    return c == ErrorCode::RankDeficient || c == ErrorCode::AllMissingDimension
           || c == ErrorCode::InsufficientObservations;
}

}  // namespace detail

/// Fits the poststratification model on `prepared`, poststratifies overall
/// and per stratum (every stratum of the model's dimensions for which `ref`
/// has complete conditionals), and bootstraps all of them by resampling
/// polls and refitting.
inline EstimateReport estimate_prepared(PreparedPolls const& prepared, ReferenceDistribution const& ref,
                                        EstimateConfig const& config,
                                        DimensionRegistry const& registry)
{
    // Full-sample fit errors propagate; only resample failures are redrawn.
    fit_prepared(prepared, all_rows(prepared.size()));

    auto const& keys = prepared.keys;
    std::vector<std::vector<double>> weights{overall_weights(keys, ref)};
    std::vector<StratumKey> strata;
    if (config.per_stratum) {
        for (auto const& dim : prepared.dimensions) {
            for (auto const& s : registry.at(dim).strata) {
                StratumKey const cond{dim, s};
                try {
                    weights.push_back(conditional_weights(keys, ref, cond));
                    strata.push_back(cond);
                } catch (Error const& e) {
                    if (e.code() != ErrorCode::MissingConditional) {
                        throw;
                    }
                }
            }
        }
    }

    auto evaluate = [&](Eigen::VectorXd const& beta) {
        std::vector<double> out;
        out.reserve(weights.size());
        for (auto const& w : weights) {
            double y = beta[0];
            for (std::size_t j = 0; j < w.size(); ++j) {
                y += beta[static_cast<Eigen::Index>(j + 1)] * w[j];
            }
            out.push_back(y);
        }
        return out;
    };

    auto statistic = [&](std::span<std::size_t const> idx) -> std::optional<std::vector<double>> {
        try {
            auto const assembled = build_design(prepared, idx);
            auto const sol = ols_solve(assembled.design.values, assembled.design.response);
            return evaluate(sol.beta);
        } catch (Error const& e) {
            if (detail::is_refit_failure(e.code())) {
                return std::nullopt;
            }
            throw;
        }
    };
    auto const summaries = bootstrap_multi(statistic, prepared.size(), config.bootstrap);

    EstimateReport report;
    report.election = ref.election;
    report.min_votes = prepared.min_votes;
    report.n_polls_used = prepared.size();
    report.overall = summaries[0];
    std::map<StratumKey, double> stratum_points;
    for (std::size_t i = 0; i < strata.size(); ++i) {
        report.per_stratum[strata[i]] = summaries[i + 1];
        stratum_points[strata[i]] = summaries[i + 1].point;
    }
    auto const metrics = error_metrics(report.overall.point, stratum_points, ref);
    report.abs_error = metrics.abs_error;
    report.mean_stratum_abs_error = metrics.mean_stratum_abs_error;
    report.strata_without_truth = metrics.strata_without_truth;

    auto check_range = [&](std::string const& label, double v) {
        if (v < 0.0 || v > 1.0) {
            report.out_of_range.push_back(label);
        }
    };
    check_range("overall", report.overall.point);
    for (auto const& [k, s] : report.per_stratum) {
        check_range(k.str(), s.point);
    }
    return report;
}

inline EstimateReport estimate(std::span<PollObservation const> observations,
                               DimensionRegistry const& registry, ReferenceDistribution const& ref,
                               EstimateConfig const& config)
{
    auto const prepared = prepare_polls(observations, registry, config.dimension_set, config.min_votes);
    return estimate_prepared(prepared, ref, config, registry);
}

//---------------------------------------------------------------------------//
// Vote-threshold sweep
//---------------------------------------------------------------------------//

struct SweepRow {
    std::uint64_t min_votes = 0;
    std::size_t n_polls = 0;
    std::optional<EstimateReport> report;
    std::optional<ErrorCode> error_code;
    std::string error;

    bool ok() const { return report.has_value(); }
};

/// Re-runs the estimate for each threshold. Failures at a threshold (for
/// instance no poll left) are recorded in that row.
inline std::vector<SweepRow> threshold_sweep(std::span<PollObservation const> observations,
                                             DimensionRegistry const& registry,
                                             ReferenceDistribution const& ref,
                                             std::span<std::uint64_t const> thresholds,
                                             EstimateConfig config)
{
    if (thresholds.empty()) {
        throw Error(ErrorCode::InvalidArgument, "threshold sweep needs at least one threshold");
    }
    std::vector<SweepRow> rows;
    rows.reserve(thresholds.size());
    for (auto const m : thresholds) {
        SweepRow row;
        row.min_votes = m;
        row.n_polls = static_cast<std::size_t>(std::count_if(
            observations.begin(), observations.end(),
            [m](PollObservation const& o) { return o.outcome.effective_votes >= m; }));
        config.min_votes = m;
        try {
            row.report = estimate(observations, registry, ref, config);
        } catch (Error const& e) {
            row.error_code = e.code();
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace pollstrat
