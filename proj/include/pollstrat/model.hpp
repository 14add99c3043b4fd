#pragma once

// Shared domain types: the stratum registry, poll records, per-poll
// marginals, fitted regression models and population reference tables.

#include <pollstrat/error.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pollstrat {

/// Identifies one stratum `stratum` inside attribute dimension `dimension`.
struct StratumKey {
    std::string dimension;
    std::string stratum;

    auto operator<=>(StratumKey const&) const = default;

    std::string str() const { return dimension + ":" + stratum; }
};

/// Parses "dimension:stratum".
inline StratumKey parse_stratum_key(std::string_view text)
{
    auto const colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "expected dimension:stratum, got '" + std::string(text) + "'");
    }
    return {std::string(text.substr(0, colon)), std::string(text.substr(colon + 1))};
}

struct Dimension {
    std::string id;
    std::vector<std::string> strata;
    std::string reference;

    bool operator==(Dimension const&) const = default;

    bool contains(std::string_view stratum) const
    {
        return std::find(strata.begin(), strata.end(), stratum) != strata.end();
    }
};

class DimensionRegistry {
public:
    DimensionRegistry() = default;
    explicit DimensionRegistry(std::vector<Dimension> dims, std::string version = "custom")
        : dims_(std::move(dims)), version_(std::move(version))
    {
    }

    std::vector<Dimension> const& dimensions() const noexcept { return dims_; }
    std::string const& version() const noexcept { return version_; }

    Dimension const* find(std::string_view id) const
    {
        auto it = std::find_if(dims_.begin(), dims_.end(),
                               [&](Dimension const& d) { return d.id == id; });
        return it == dims_.end() ? nullptr : &*it;
    }

    Dimension const& at(std::string_view id) const
    {
        if (auto const* d = find(id)) {
            return *d;
        }
        throw Error(ErrorCode::InvalidArgument, "unknown dimension '" + std::string(id) + "'");
    }

    bool is_reference(StratumKey const& key) const
    {
        auto const* d = find(key.dimension);
        return d != nullptr && d->reference == key.stratum;
    }

    bool contains(StratumKey const& key) const
    {
        auto const* d = find(key.dimension);
        return d != nullptr && d->contains(key.stratum);
    }

    /// Regression columns for `dimension_set`: every non-reference stratum,
    /// in registry order (dimension order first, then stratum order).
    std::vector<StratumKey> predictor_keys(std::vector<std::string> const& dimension_set) const
    {
        std::vector<StratumKey> keys;
        for (auto const& d : dims_) {
            if (std::find(dimension_set.begin(), dimension_set.end(), d.id) == dimension_set.end()) {
                continue;
            }
            for (auto const& s : d.strata) {
                if (s != d.reference) {
                    keys.push_back({d.id, s});
                }
            }
        }
        return keys;
    }

    std::vector<std::string> dimension_ids() const
    {
        std::vector<std::string> ids;
        for (auto const& d : dims_) {
            ids.push_back(d.id);
        }
        return ids;
    }

    bool operator==(DimensionRegistry const&) const = default;

private:
    std::vector<Dimension> dims_;
    std::string version_ = "custom";
};

/// Returns one message per violated registry invariant; empty means valid.
inline std::vector<std::string> validate_registry(DimensionRegistry const& registry)
{
    std::vector<std::string> violations;
    std::set<std::string> seen_dims;
    for (auto const& d : registry.dimensions()) {
        if (d.id.empty()) {
            violations.push_back("dimension with empty id");
        }
        if (!seen_dims.insert(d.id).second) {
            violations.push_back("duplicate dimension id '" + d.id + "'");
        }
        if (d.strata.size() < 2) {
            violations.push_back("dimension with <2 strata: '" + d.id + "'");
        }
        std::set<std::string> seen_strata;
        for (auto const& s : d.strata) {
            if (!seen_strata.insert(s).second) {
                violations.push_back("duplicate stratum id '" + s + "' in dimension '" + d.id + "'");
            }
        }
        if (!d.contains(d.reference)) {
            violations.push_back("reference not in dimension: '" + d.reference + "' in '" + d.id + "'");
        }
    }
    return violations;
}

inline std::string const kDefaultRegistryVersion = "pollstrat-registry/1";

/// Six dimensions used by the diagnostic regression; the reference stratum
/// of each is dropped from the design matrix.
inline DimensionRegistry default_registry()
{
    return DimensionRegistry(
        {
            {"gender", {"male", "female"}, "female"},
            {"age", {"under30", "30to39", "40plus"}, "under30"},
            {"ideology", {"dem", "moderate", "rep"}, "moderate"},
            {"location", {"blue_state", "red_state", "swing_state"}, "swing_state"},
            {"bot", {"bot", "not_bot"}, "not_bot"},
            {"first_option", {"trump", "not_trump"}, "not_trump"},
        },
        kDefaultRegistryVersion);
}

inline std::vector<std::string> default_regression_dimensions()
{
    return {"gender", "age", "ideology", "location", "bot", "first_option"};
}

inline std::vector<std::string> default_poststrat_dimensions()
{
    return {"gender", "age", "ideology", "location"};
}

//---------------------------------------------------------------------------//

enum class Election { Y2016, Y2020 };

inline std::string_view to_string(Election e) noexcept
{
    return e == Election::Y2016 ? "2016" : "2020";
}

inline Election parse_election(std::string_view text)
{
    if (text == "2016" || text == "Y2016") {
        return Election::Y2016;
    }
    if (text == "2020" || text == "Y2020") {
        return Election::Y2020;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown election '" + std::string(text) + "'");
}

using Timestamp = std::chrono::sys_seconds;

inline std::chrono::year_month_day election_day(Election e)
{
    using namespace std::chrono;
    return e == Election::Y2016 ? year_month_day{year{2016}, November, day{8}}
                                : year_month_day{year{2020}, November, day{3}};
}

/// Last admissible poll timestamp: 23:59:59 UTC on election day.
inline Timestamp election_cutoff(Election e)
{
    using namespace std::chrono;
    return sys_days{election_day(e)} + hours{23} + minutes{59} + seconds{59};
}

struct PollOption {
    std::string label;
    std::uint64_t votes = 0;

    bool operator==(PollOption const&) const = default;
};

struct PollRecord {
    std::string poll_id;
    std::string author_id;
    Timestamp created_at{};
    Election election = Election::Y2020;
    std::vector<PollOption> options;  // display order, top first
    std::uint64_t retweets = 0;
    std::uint64_t favorites = 0;

    std::uint64_t total_votes() const
    {
        std::uint64_t total = 0;
        for (auto const& o : options) {
            total += o.votes;
        }
        return total;
    }

    bool operator==(PollRecord const&) const = default;
};

//---------------------------------------------------------------------------//

enum class Coverage { Observed, Missing };

/// Distribution of one poll's proxy voters over the strata of each dimension.
struct StratumMarginals {
    std::string poll_id;
    std::map<StratumKey, double> entries;
    std::map<std::string, Coverage> coverage;

    bool observed(std::string const& dimension) const
    {
        auto it = coverage.find(dimension);
        return it != coverage.end() && it->second == Coverage::Observed;
    }

    double fraction(StratumKey const& key) const
    {
        auto it = entries.find(key);
        return it == entries.end() ? 0.0 : it->second;
    }

    bool operator==(StratumMarginals const&) const = default;
};

inline std::vector<std::string> validate_marginals(StratumMarginals const& m,
                                                   DimensionRegistry const& registry,
                                                   double tol = 1e-9)
{
    std::vector<std::string> problems;
    for (auto const& [key, value] : m.entries) {
        if (!(value >= 0.0 && value <= 1.0)) {
            problems.push_back("fraction outside [0,1] for " + key.str());
        }
    }
    for (auto const& [dim, cov] : m.coverage) {
        if (cov != Coverage::Observed) {
            continue;
        }
        auto const* d = registry.find(dim);
        if (d == nullptr) {
            problems.push_back("unknown dimension '" + dim + "'");
            continue;
        }
        double sum = 0.0;
        for (auto const& s : d->strata) {
            sum += m.fraction({dim, s});
        }
        if (std::abs(sum - 1.0) > tol) {
            problems.push_back("marginals of '" + dim + "' sum to " + std::to_string(sum));
        }
    }
    return problems;
}

//---------------------------------------------------------------------------//

struct CoefficientEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;

    bool operator==(CoefficientEstimate const&) const = default;
};

struct FittedModel {
    CoefficientEstimate intercept;
    std::map<StratumKey, CoefficientEstimate> coefficients;  // non-reference strata only
    double r2 = 0.0;
    double adj_r2 = 0.0;
    std::size_t n_obs = 0;
    std::map<StratumKey, double> imputation_means;
    std::uint64_t min_votes = 0;
    std::vector<std::string> dimension_set;

    double coefficient(StratumKey const& key) const
    {
        auto it = coefficients.find(key);
        return it == coefficients.end() ? 0.0 : it->second.estimate;
    }

    bool operator==(FittedModel const&) const = default;
};

/// Throws InvalidModel if `model` violates its invariants against `registry`.
inline void validate_model(FittedModel const& model, DimensionRegistry const& registry)
{
    for (auto const& dim : model.dimension_set) {
        if (registry.find(dim) == nullptr) {
            throw Error(ErrorCode::InvalidModel, "dimension '" + dim + "' not in registry");
        }
    }
    for (auto const& [key, coef] : model.coefficients) {
        if (!registry.contains(key)) {
            throw Error(ErrorCode::InvalidModel, "coefficient " + key.str() + " not in registry");
        }
        if (registry.is_reference(key)) {
            throw Error(ErrorCode::InvalidModel,
                        "coefficient " + key.str() + " is keyed by a reference stratum");
        }
        if (std::find(model.dimension_set.begin(), model.dimension_set.end(), key.dimension)
            == model.dimension_set.end()) {
            throw Error(ErrorCode::InvalidModel,
                        "coefficient " + key.str() + " outside the model's dimension set");
        }
    }
    if (model.n_obs < model.coefficients.size() + 1) {
        throw Error(ErrorCode::InvalidModel, "n_obs smaller than number of parameters");
    }
}

//---------------------------------------------------------------------------//

/// (condition stratum, target stratum) -> p(target | condition)
using ConditionalKey = std::pair<StratumKey, StratumKey>;

struct ReferenceDistribution {
    Election election = Election::Y2020;
    std::map<StratumKey, double> marginals;
    std::map<ConditionalKey, double> conditionals;
    std::optional<double> overall_outcome;
    std::map<StratumKey, double> stratum_outcomes;

    bool operator==(ReferenceDistribution const&) const = default;
};

struct ReferenceTolerances {
    double sum_to_one = 1e-9;
    double consistency = 1e-6;
};

/// Checks sum-to-one of every marginal and conditional distribution and, for
/// each (condition dimension, target dimension) pair whose conditionals are
/// complete, the mixture identity sum_g p(g) p(g'|g) = p(g').
/// Returns one message per violation.
inline std::vector<std::string> check_reference(ReferenceDistribution const& ref,
                                                ReferenceTolerances tol = {})
{
    std::vector<std::string> problems;
    auto describe = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::string(buf);
    };

    std::map<std::string, double> marginal_sums;
    for (auto const& [key, p] : ref.marginals) {
        if (!(p >= 0.0 && p <= 1.0)) {
            problems.push_back("marginal " + key.str() + " outside [0,1]");
        }
        marginal_sums[key.dimension] += p;
    }
    for (auto const& [dim, sum] : marginal_sums) {
        if (std::abs(sum - 1.0) > tol.sum_to_one) {
            problems.push_back("marginals of dimension '" + dim + "' sum to " + describe(sum));
        }
    }

    // (condition, target dimension) -> target stratum -> probability
    std::map<std::pair<StratumKey, std::string>, std::map<std::string, double>> groups;
    for (auto const& [key, p] : ref.conditionals) {
        auto const& [given, target] = key;
        if (!(p >= 0.0 && p <= 1.0)) {
            problems.push_back("conditional p(" + target.str() + " | " + given.str()
                               + ") outside [0,1]");
        }
        groups[{given, target.dimension}][target.stratum] = p;
    }
    for (auto const& [group, dist] : groups) {
        double sum = 0.0;
        for (auto const& [s, p] : dist) {
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol.sum_to_one) {
            problems.push_back("conditionals of '" + group.second + "' given " + group.first.str()
                               + " sum to " + describe(sum));
        }
    }

    // Mixture consistency, only where all strata of the condition dimension
    // carry marginals and conditionals for the target dimension.
    std::map<std::string, std::vector<std::string>> strata_by_dim;
    for (auto const& [key, p] : ref.marginals) {
        strata_by_dim[key.dimension].push_back(key.stratum);
    }
    std::set<std::pair<std::string, std::string>> dim_pairs;
    for (auto const& [group, dist] : groups) {
        dim_pairs.insert({group.first.dimension, group.second});
    }
    for (auto const& [cond_dim, target_dim] : dim_pairs) {
        auto cs = strata_by_dim.find(cond_dim);
        auto ts = strata_by_dim.find(target_dim);
        if (cs == strata_by_dim.end() || ts == strata_by_dim.end()) {
            continue;
        }
        bool complete = true;
        for (auto const& g : cs->second) {
            if (!groups.contains({{cond_dim, g}, target_dim})) {
                complete = false;
            }
        }
        if (!complete) {
            continue;
        }
        for (auto const& target : ts->second) {
            double mixed = 0.0;
            for (auto const& g : cs->second) {
                auto const& dist = groups.at({{cond_dim, g}, target_dim});
                auto it = dist.find(target);
                mixed += ref.marginals.at({cond_dim, g}) * (it == dist.end() ? 0.0 : it->second);
            }
            double const direct = ref.marginals.at({target_dim, target});
            if (std::abs(mixed - direct) > tol.consistency) {
                problems.push_back("conditionals of '" + target_dim + "' given dimension '"
                                   + cond_dim + "' inconsistent with marginal " + target_dim + ":"
                                   + target + " (mixture " + describe(mixed) + " vs "
                                   + describe(direct) + ")");
            }
        }
    }
    return problems;
}

inline void validate_reference(ReferenceDistribution const& ref, ReferenceTolerances tol = {})
{
    auto problems = check_reference(ref, tol);
    if (!problems.empty()) {
        std::string msg = problems.front();
        for (std::size_t i = 1; i < problems.size(); ++i) {
            msg += "; " + problems[i];
        }
        throw Error(ErrorCode::DistributionInvalid, msg);
    }
}

}  // namespace pollstrat
