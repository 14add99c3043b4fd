#pragma once

// Statistics kernel: OLS with t-test inference, Pearson correlation, and
// inter-rater agreement (Cohen's and Fleiss' kappa).

#include <pollstrat/error.hpp>
#include <pollstrat/model.hpp>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pollstrat {

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom,
/// P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2).
inline double t_two_sided_p(double t, double df)
{
    if (std::isnan(t)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (std::isinf(t)) {
        return 0.0;
    }
    double const x = df / (df + t * t);
    return boost::math::ibeta(df / 2.0, 0.5, x);
}

inline std::string significance_stars(double p)
{
    if (p < 0.001) {
        return "***";
    }
    if (p < 0.01) {
        return "**";
    }
    if (p < 0.05) {
        return "*";
    }
    return "";
}

//---------------------------------------------------------------------------//
// Ordinary least squares
//---------------------------------------------------------------------------//

/// Regression design: a leading intercept column of ones followed by one
/// column per `column_keys` entry.
struct DesignMatrix {
    Eigen::MatrixXd values;
    Eigen::VectorXd response;
    std::vector<StratumKey> column_keys;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

struct OlsOptions {
    /// Pivots below this fraction of the largest column norm count as zero.
    double rank_tolerance = 1e-10;
};

struct OlsSolution {
    Eigen::VectorXd beta;
    Eigen::VectorXd std_error;
    Eigen::VectorXd t_stat;
    Eigen::VectorXd p_value;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    double rss = 0.0;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    std::size_t n_obs = 0;
    std::size_t df_resid = 0;
};

/// Column-pivoted Householder QR least squares. `names` labels columns in
/// error messages (RankDeficient lists the dependent columns).
inline OlsSolution ols_solve(Eigen::MatrixXd const& x, Eigen::VectorXd const& y,
                             std::vector<std::string> const& names = {}, OlsOptions opts = {})
{
    auto const n = static_cast<std::size_t>(x.rows());
    auto const p = static_cast<std::size_t>(x.cols());
    if (static_cast<std::size_t>(y.size()) != n) {
        throw Error(ErrorCode::InvalidArgument, "response length does not match design rows");
    }
    if (p == 0 || n <= p) {
        throw Error(ErrorCode::InsufficientObservations,
                    std::to_string(n) + " observations for " + std::to_string(p) + " columns");
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(opts.rank_tolerance);
    auto const rank = static_cast<std::size_t>(qr.rank());
    auto const& perm = qr.colsPermutation().indices();
    if (rank < p) {
        std::string cols;
        for (std::size_t j = rank; j < p; ++j) {
            auto const c = static_cast<std::size_t>(perm[static_cast<Eigen::Index>(j)]);
            cols += (cols.empty() ? "" : ", ") + (c < names.size() ? names[c] : "column " + std::to_string(c));
        }
        throw Error(ErrorCode::RankDeficient, "linearly dependent columns: " + cols);
    }

    OlsSolution s;
    s.n_obs = n;
    s.df_resid = n - p;
    s.beta = qr.solve(y);
    s.fitted = x * s.beta;
    s.residuals = y - s.fitted;
    s.rss = s.residuals.squaredNorm();
    double const sigma2 = s.rss / static_cast<double>(s.df_resid);

    // diag((X^T X)^-1) = diag(P R^-1 R^-T P^T)
    Eigen::MatrixXd const r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    Eigen::MatrixXd const r_inv = r.triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
    s.std_error.resize(static_cast<Eigen::Index>(p));
    s.t_stat.resize(static_cast<Eigen::Index>(p));
    s.p_value.resize(static_cast<Eigen::Index>(p));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
        auto const col = perm[j];
        s.std_error[col] = std::sqrt(sigma2 * r_inv.row(j).squaredNorm());
    }
    auto const df = static_cast<double>(s.df_resid);
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
        double const se = s.std_error[j];
        double t;
        if (se > 0.0) {
            t = s.beta[j] / se;
        } else {
            // Exact fit: any nonzero coefficient is infinitely significant.
            t = s.beta[j] == 0.0 ? 0.0
                                 : std::copysign(std::numeric_limits<double>::infinity(), s.beta[j]);
        }
        s.t_stat[j] = t;
        s.p_value[j] = t_two_sided_p(t, df);
    }

    double const mean = y.mean();
    double const tss = (y.array() - mean).square().sum();
    s.r2 = tss > 0.0 ? 1.0 - s.rss / tss : 1.0;
    double const k = static_cast<double>(p - 1);
    s.adj_r2 = 1.0 - (1.0 - s.r2) * (static_cast<double>(n) - 1.0) / (static_cast<double>(n) - k - 1.0);
    return s;
}

/// Fits the design and labels the estimates by stratum. Only the regression
/// fields of the returned model are set; callers fill in the fit metadata
/// (dimension set, imputation means, vote threshold).
inline FittedModel ols_fit(DesignMatrix const& design, OlsOptions opts = {})
{
    if (design.cols() != design.column_keys.size() + 1) {
        throw Error(ErrorCode::InvalidArgument, "design columns do not match column keys plus intercept");
    }
    std::vector<std::string> names{"(intercept)"};
    for (auto const& k : design.column_keys) {
        names.push_back(k.str());
    }
    auto const sol = ols_solve(design.values, design.response, names, opts);

    auto coef = [&](Eigen::Index j) {
        return CoefficientEstimate{sol.beta[j], sol.std_error[j], sol.t_stat[j], sol.p_value[j]};
    };
    FittedModel model;
    model.intercept = coef(0);
    for (std::size_t j = 0; j < design.column_keys.size(); ++j) {
        model.coefficients[design.column_keys[j]] = coef(static_cast<Eigen::Index>(j + 1));
    }
    model.r2 = sol.r2;
    model.adj_r2 = sol.adj_r2;
    model.n_obs = sol.n_obs;
    return model;
}

//---------------------------------------------------------------------------//
// Pearson correlation
//---------------------------------------------------------------------------//

struct Correlation {
    double r = 0.0;
    double p = 1.0;
    std::size_t n = 0;
};

inline Correlation pearson(std::span<std::pair<double, double> const> pairs)
{
    auto const n = pairs.size();
    if (n < 3) {
        throw Error(ErrorCode::TooFewPairs, "pearson needs at least 3 pairs, got " + std::to_string(n));
    }
    double mx = 0.0;
    double my = 0.0;
    for (auto const& [x, y] : pairs) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (auto const& [x, y] : pairs) {
        double const dx = x - mx;
        double const dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw Error(ErrorCode::ZeroVariance, "pearson: a coordinate has zero variance");
    }
    Correlation c;
    c.n = n;
    c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    double const df = static_cast<double>(n - 2);
    double const denom = 1.0 - c.r * c.r;
    if (denom <= 0.0) {
        c.p = 0.0;
    } else {
        c.p = t_two_sided_p(c.r * std::sqrt(df / denom), df);
    }
    return c;
}

inline Correlation pearson(std::span<double const> xs, std::span<double const> ys)
{
    if (xs.size() != ys.size()) {
        throw Error(ErrorCode::LengthMismatch, "pearson: coordinate lists differ in length");
    }
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        pairs.emplace_back(xs[i], ys[i]);
    }
    return pearson(pairs);
}

//---------------------------------------------------------------------------//
// Inter-rater agreement
//---------------------------------------------------------------------------//

/// Cohen's kappa for two raters. When chance agreement is 1 (both raters
/// used one and the same label throughout) the statistic is 0/0; this
/// returns 1.0 for that case since the raters agree on every item.
template <class Label>
double cohens_kappa(std::span<Label const> a, std::span<Label const> b)
{
    if (a.size() != b.size()) {
        throw Error(ErrorCode::LengthMismatch, "cohens_kappa: label lists differ in length");
    }
    if (a.empty()) {
        throw Error(ErrorCode::InvalidArgument, "cohens_kappa: no items");
    }
    auto const n = static_cast<double>(a.size());
    std::map<Label, double> count_a;
    std::map<Label, double> count_b;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        count_a[a[i]] += 1.0;
        count_b[b[i]] += 1.0;
        if (a[i] == b[i]) {
            agree += 1.0;
        }
    }
    double const p_o = agree / n;
    double p_e = 0.0;
    for (auto const& [label, ca] : count_a) {
        auto it = count_b.find(label);
        if (it != count_b.end()) {
            p_e += (ca / n) * (it->second / n);
        }
    }
    if (p_e >= 1.0) {
        return 1.0;
    }
    return (p_o - p_e) / (1.0 - p_e);
}

template <class Label>
double cohens_kappa(std::vector<Label> const& a, std::vector<Label> const& b)
{
    return cohens_kappa(std::span<Label const>(a), std::span<Label const>(b));
}

/// Fleiss' kappa over an items x raters table; an empty optional marks a
/// missing rating. Returns 1.0 when every rating falls in one category.
template <class Label>
double fleiss_kappa(std::vector<std::vector<std::optional<Label>>> const& ratings)
{
    if (ratings.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "fleiss_kappa: need at least 2 items");
    }
    auto const raters = ratings.front().size();
    if (raters < 2) {
        throw Error(ErrorCode::InvalidArgument, "fleiss_kappa: need at least 2 raters");
    }
    std::map<Label, double> category_totals;
    double p_bar = 0.0;
    auto const m = static_cast<double>(raters);
    for (std::size_t i = 0; i < ratings.size(); ++i) {
        if (ratings[i].size() != raters) {
            throw Error(ErrorCode::MissingCell,
                        "fleiss_kappa: item " + std::to_string(i) + " has "
                            + std::to_string(ratings[i].size()) + " ratings, expected "
                            + std::to_string(raters));
        }
        std::map<Label, double> counts;
        for (std::size_t j = 0; j < raters; ++j) {
            if (!ratings[i][j]) {
                throw Error(ErrorCode::MissingCell, "fleiss_kappa: missing rating at item "
                                                        + std::to_string(i) + ", rater "
                                                        + std::to_string(j));
            }
            counts[*ratings[i][j]] += 1.0;
        }
        double sq = 0.0;
        for (auto const& [label, c] : counts) {
            sq += c * c;
            category_totals[label] += c;
        }
        p_bar += (sq - m) / (m * (m - 1.0));
    }
    auto const items = static_cast<double>(ratings.size());
    p_bar /= items;
    double p_e = 0.0;
    for (auto const& [label, total] : category_totals) {
        double const pj = total / (items * m);
        p_e += pj * pj;
    }
    if (p_e >= 1.0) {
        return 1.0;
    }
    return (p_bar - p_e) / (1.0 - p_e);
}

template <class Label>
double fleiss_kappa(std::vector<std::vector<Label>> const& ratings)
{
    std::vector<std::vector<std::optional<Label>>> wrapped;
    wrapped.reserve(ratings.size());
    for (auto const& row : ratings) {
        wrapped.emplace_back(row.begin(), row.end());
    }
    return fleiss_kappa(wrapped);
}

}  // namespace pollstrat
