#pragma once

// Mapping of inferred user attributes onto registry strata and per-poll
// aggregation of proxy-voter marginals.

#include <pollstrat/error.hpp>
#include <pollstrat/model.hpp>
#include <pollstrat/normalize.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pollstrat {

enum class UserRole { Author, Retweeter, Favoriter, Follower };

inline std::string_view to_string(UserRole r) noexcept
{
    switch (r) {
    case UserRole::Author: return "author";
    case UserRole::Retweeter: return "retweeter";
    case UserRole::Favoriter: return "favoriter";
    case UserRole::Follower: return "follower";
    }
    return "";
}

inline UserRole parse_role(std::string_view text)
{
    if (text == "author") return UserRole::Author;
    if (text == "retweeter") return UserRole::Retweeter;
    if (text == "favoriter") return UserRole::Favoriter;
    if (text == "follower") return UserRole::Follower;
    throw Error(ErrorCode::InvalidArgument, "unknown role '" + std::string(text) + "'");
}

enum class Gender { Male, Female };

inline std::string_view to_string(Gender g) noexcept
{
    return g == Gender::Male ? "male" : "female";
}

struct UserAttributeRecord {
    std::string user_id;
    UserRole role = UserRole::Retweeter;
    std::string poll_id;
    std::optional<double> ideology_score;  // [-3, 3]
    std::optional<double> bot_score;       // [0, 1]
    std::optional<double> org_score;       // [0, 1]
    std::optional<unsigned> age_years;
    std::optional<std::string> age_bin;  // alternative to age_years
    std::optional<Gender> gender;
    std::optional<std::string> state;  // US state or country code

    bool operator==(UserAttributeRecord const&) const = default;
};

//---------------------------------------------------------------------------//

/// Three equal-width bins over [-3, 3]; the moderate bin is closed, so the
/// boundaries -1 and +1 are moderate.
inline std::string bin_ideology(double score)
{
    if (!(score >= -3.0 && score <= 3.0)) {
        throw Error(ErrorCode::OutOfRange, "ideology score " + std::to_string(score) + " outside [-3, 3]");
    }
    if (score < -1.0) {
        return "dem";
    }
    if (score > 1.0) {
        return "rep";
    }
    return "moderate";
}

inline std::string bin_age(unsigned age_years)
{
    if (age_years < 30) {
        return "under30";
    }
    if (age_years < 40) {
        return "30to39";
    }
    return "40plus";
}

/// Smallest candidate threshold t in scores U {1.0} such that the fraction
/// of scores >= t does not exceed `target_fraction`. Users are then
/// classified as bots iff score >= t. When even 1.0 flags too many (scores
/// equal to 1.0 exceed the target), the next double above 1.0 is returned so
/// that nobody is flagged.
inline double calibrate_bot_threshold(std::span<double const> scores, double target_fraction)
{
    if (scores.empty()) {
        throw Error(ErrorCode::InvalidArgument, "calibrate_bot_threshold: no scores");
    }
    if (!(target_fraction >= 0.0 && target_fraction <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, "target fraction outside [0, 1]");
    }
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    auto const n = sorted.size();
    // Largest admissible flag count; the epsilon absorbs decimal fractions
    // such as 0.1 * 100 landing a hair below the integer.
    auto const max_flagged = static_cast<std::size_t>(std::floor(target_fraction * static_cast<double>(n) + 1e-9));

    std::vector<double> candidates(sorted.begin(), sorted.end());
    candidates.push_back(1.0);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    for (double t : candidates) {
        auto const flagged = static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
        if (flagged <= max_flagged) {
            return t;
        }
    }
    return std::nextafter(1.0, 2.0);
}

struct OrganizationSplit {
    std::vector<UserAttributeRecord> kept;
    std::vector<UserAttributeRecord> dropped;
};

inline constexpr double kDefaultOrgCutoff = 0.90;
inline constexpr double kDefaultBotThreshold = 0.83;

/// Drops users whose organization score strictly exceeds `cutoff`.
inline OrganizationSplit filter_organizations(std::span<UserAttributeRecord const> records,
                                              double cutoff = kDefaultOrgCutoff)
{
    OrganizationSplit out;
    for (auto const& r : records) {
        if (r.org_score && *r.org_score > cutoff) {
            out.dropped.push_back(r);
        } else {
            out.kept.push_back(r);
        }
    }
    return out;
}

//---------------------------------------------------------------------------//

enum class StateColor { Blue, Red, Swing };

inline std::string_view to_string(StateColor c) noexcept
{
    switch (c) {
    case StateColor::Blue: return "blue";
    case StateColor::Red: return "red";
    case StateColor::Swing: return "swing";
    }
    return "";
}

inline StateColor parse_state_color(std::string_view text)
{
    if (text == "blue") return StateColor::Blue;
    if (text == "red") return StateColor::Red;
    if (text == "swing") return StateColor::Swing;
    throw Error(ErrorCode::InvalidArgument, "unknown state color '" + std::string(text) + "'");
}

inline std::string_view location_stratum(StateColor c) noexcept
{
    switch (c) {
    case StateColor::Blue: return "blue_state";
    case StateColor::Red: return "red_state";
    case StateColor::Swing: return "swing_state";
    }
    return "";
}

using StateColorMap = std::map<std::string, StateColor>;

inline std::array<std::string_view, 13> const& swing_states()
{
    static constexpr std::array<std::string_view, 13> states{
        "WI", "PA", "NH", "MN", "AZ", "GA", "VA", "FL", "MI", "NV", "CO", "NC", "ME"};
    return states;
}

inline std::string canonical_state(std::string_view code)
{
    std::string out;
    for (char c : code) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

/// Color map holding only the fixed swing-state list.
inline StateColorMap swing_only_color_map()
{
    StateColorMap map;
    for (auto s : swing_states()) {
        map[std::string(s)] = StateColor::Swing;
    }
    return map;
}

struct StateResult {
    std::string state;
    double dem_votes = 0.0;
    double rep_votes = 0.0;
};

/// Swing states stay swing; every other state takes the color of the party
/// that carried it. An exact tie is treated as swing.
inline StateColorMap color_map_from_results(std::span<StateResult const> results)
{
    StateColorMap map = swing_only_color_map();
    for (auto const& r : results) {
        auto const code = canonical_state(r.state);
        if (map.contains(code) && map[code] == StateColor::Swing) {
            continue;
        }
        if (r.dem_votes > r.rep_votes) {
            map[code] = StateColor::Blue;
        } else if (r.rep_votes > r.dem_votes) {
            map[code] = StateColor::Red;
        } else {
            map[code] = StateColor::Swing;
        }
    }
    return map;
}

inline std::string map_state_color(std::string_view state, StateColorMap const& colors)
{
    auto it = colors.find(canonical_state(state));
    if (it == colors.end()) {
        throw Error(ErrorCode::UnknownState, "state '" + std::string(state) + "' not in color map");
    }
    return std::string(location_stratum(it->second));
}

//---------------------------------------------------------------------------//

struct AggregationOptions {
    double bot_threshold = kDefaultBotThreshold;
    double org_cutoff = kDefaultOrgCutoff;
    StateColorMap colors = swing_only_color_map();
    bool include_authors = false;
};

/// Stratum of one user in one dimension, or nullopt when unobserved.
inline std::optional<std::string> classify_user(UserAttributeRecord const& r, Dimension const& dim,
                                                AggregationOptions const& opts)
{
    std::optional<std::string> s;
    if (dim.id == "gender") {
        if (r.gender) {
            s = std::string(to_string(*r.gender));
        }
    } else if (dim.id == "age") {
        if (r.age_years) {
            s = bin_age(*r.age_years);
        } else if (r.age_bin) {
            s = *r.age_bin;
        }
    } else if (dim.id == "ideology") {
        if (r.ideology_score) {
            s = bin_ideology(*r.ideology_score);
        }
    } else if (dim.id == "location") {
        // Codes outside the color map are non-US and count as unobserved.
        if (r.state) {
            auto it = opts.colors.find(canonical_state(*r.state));
            if (it != opts.colors.end()) {
                s = std::string(location_stratum(it->second));
            }
        }
    } else if (dim.id == "bot") {
        if (r.bot_score) {
            s = *r.bot_score >= opts.bot_threshold ? "bot" : "not_bot";
        }
    }
    if (s && !dim.contains(*s)) {
        return std::nullopt;
    }
    return s;
}

/// Marginal distribution of a poll's proxy voters (retweeters and
/// favoriters, deduplicated by user id, organizations removed) over every
/// registry dimension. Users lacking an attribute are left out of that
/// dimension's denominator; dimensions with no observed user are flagged
/// missing. The first_option dimension comes from `outcome` when given.
inline StratumMarginals aggregate_marginals(std::string const& poll_id,
                                            std::span<UserAttributeRecord const> records,
                                            DimensionRegistry const& registry,
                                            AggregationOptions const& opts = {},
                                            NormalizedOutcome const* outcome = nullptr)
{
    std::vector<UserAttributeRecord const*> proxies;
    std::set<std::string> seen;
    for (auto const& r : records) {
        bool const is_proxy = r.role == UserRole::Retweeter || r.role == UserRole::Favoriter
                              || (opts.include_authors && r.role == UserRole::Author);
        if (!is_proxy || !seen.insert(r.user_id).second) {
            continue;
        }
        if (r.org_score && *r.org_score > opts.org_cutoff) {
            continue;
        }
        proxies.push_back(&r);
    }

    StratumMarginals m;
    m.poll_id = poll_id;
    for (auto const& dim : registry.dimensions()) {
        std::map<std::string, double> counts;
        double total = 0.0;
        if (dim.id == "first_option") {
            if (outcome != nullptr) {
                std::string const s = outcome->trump_listed_first_among_focal ? "trump" : "not_trump";
                if (dim.contains(s)) {
                    counts[s] = 1.0;
                    total = 1.0;
                }
            }
        } else {
            for (auto const* r : proxies) {
                if (auto s = classify_user(*r, dim, opts)) {
                    counts[*s] += 1.0;
                    total += 1.0;
                }
            }
        }
        if (total == 0.0) {
            m.coverage[dim.id] = Coverage::Missing;
            continue;
        }
        m.coverage[dim.id] = Coverage::Observed;
        for (auto const& s : dim.strata) {
            auto it = counts.find(s);
            m.entries[{dim.id, s}] = it == counts.end() ? 0.0 : it->second / total;
        }
    }
    return m;
}

}  // namespace pollstrat
