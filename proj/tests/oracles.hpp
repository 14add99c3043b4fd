#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's numerical code paths.

#include <pollstrat/model.hpp>

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(Matrix a, std::vector<double> b)
{
    auto const n = a.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) {
                pivot = r;
            }
        }
        if (a[pivot][col] == 0.0) {
            throw std::runtime_error("singular system");
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double const f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) {
            s -= a[i][c] * x[c];
        }
        x[i] = s / a[i][i];
    }
    return x;
}

/// beta = (X^T X)^-1 X^T y through the normal equations.
inline std::vector<double> normal_equations(Matrix const& x, std::vector<double> const& y)
{
    auto const n = x.size();
    auto const p = x.front().size();
    Matrix xtx(p, std::vector<double>(p, 0.0));
    std::vector<double> xty(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < p; ++a) {
            xty[a] += x[i][a] * y[i];
            for (std::size_t b = 0; b < p; ++b) {
                xtx[a][b] += x[i][a] * x[i][b];
            }
        }
    }
    return gauss_solve(xtx, xty);
}

/// Standard errors sqrt(sigma^2 diag((X^T X)^-1)) via column-by-column solves.
inline std::vector<double> normal_equation_std_errors(Matrix const& x, std::vector<double> const& y)
{
    auto const n = x.size();
    auto const p = x.front().size();
    auto const beta = normal_equations(x, y);
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t a = 0; a < p; ++a) {
            fit += x[i][a] * beta[a];
        }
        rss += (y[i] - fit) * (y[i] - fit);
    }
    double const sigma2 = rss / static_cast<double>(n - p);
    Matrix xtx(p, std::vector<double>(p, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) {
                xtx[a][b] += x[i][a] * x[i][b];
            }
        }
    }
    std::vector<double> se(p);
    for (std::size_t a = 0; a < p; ++a) {
        std::vector<double> e(p, 0.0);
        e[a] = 1.0;
        se[a] = std::sqrt(sigma2 * gauss_solve(xtx, e)[a]);
    }
    return se;
}

/// Textbook single-pass Pearson formula.
inline double pearson_r(std::vector<std::pair<double, double>> const& pairs)
{
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    auto const n = static_cast<double>(pairs.size());
    for (auto const& [x, y] : pairs) {
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

/// Two-rater Fleiss kappa from the agreement rate and pooled marginals.
inline double two_rater_fleiss(std::vector<std::string> const& a, std::vector<std::string> const& b)
{
    std::map<std::string, double> pooled;
    double agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        pooled[a[i]] += 1;
        pooled[b[i]] += 1;
        agree += a[i] == b[i] ? 1 : 0;
    }
    auto const n = static_cast<double>(a.size());
    double pe = 0;
    for (auto const& [k, c] : pooled) {
        pe += (c / (2 * n)) * (c / (2 * n));
    }
    return (agree / n - pe) / (1 - pe);
}

/// Overall poststratified outcome by direct enumeration of keys.
inline double poststrat_sum(double intercept, std::map<pollstrat::StratumKey, double> const& coefs,
                            std::map<pollstrat::StratumKey, double> const& marginals)
{
    double y = intercept;
    for (auto const& [k, b] : coefs) {
        y += b * marginals.at(k);
    }
    return y;
}

}  // namespace oracle
