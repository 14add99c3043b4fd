#pragma once

// Synthetic poll corpora with known ground truth.
//
// Each poll gets an audience drawn around the population distribution, a
// Poisson number of proxy users sampled from that audience, and an outcome
// computed from the users' stratum fractions with the true coefficients
// (plus Gaussian noise). Users are written out as attribute rows whose raw
// scores map back to exactly the sampled strata, so the ordinary ingest and
// aggregation code sees what the generator used.

#include <pollstrat/attrs.hpp>
#include <pollstrat/error.hpp>
#include <pollstrat/model.hpp>
#include <pollstrat/poststrat.hpp>
#include <pollstrat/random.hpp>
#include <pollstrat/serialize.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pollstrat {

//---------------------------------------------------------------------------//
// Random consistent reference tables
//---------------------------------------------------------------------------//

/// Random marginals for `dimensions` plus pairwise conditionals derived from
/// random joint tables fitted to those marginals by iterative proportional
/// fitting, so that sum_g p(g) p(g'|g) = p(g') holds to rounding.
inline ReferenceDistribution random_consistent_reference(DimensionRegistry const& registry,
                                                         std::vector<std::string> const& dimensions,
                                                         std::uint64_t seed, Election election = Election::Y2020)
{
    Rng rng(derive_seed(seed, {0x7265665fULL}));
    ReferenceDistribution ref;
    ref.election = election;
    std::map<std::string, std::vector<double>> margins;
    for (auto const& id : dimensions) {
        auto const& dim = registry.at(id);
        std::vector<double> alpha(dim.strata.size(), 4.0);
        auto p = rng.dirichlet(alpha);
        for (auto& v : p) {
            v = 0.05 + 0.9 * v;  // keep every stratum populated
        }
        double sum = 0.0;
        for (double v : p) {
            sum += v;
        }
        for (auto& v : p) {
            v /= sum;
        }
        margins[id] = p;
        for (std::size_t i = 0; i < p.size(); ++i) {
            ref.marginals[{id, dim.strata[i]}] = p[i];
        }
    }

    for (std::size_t a = 0; a < dimensions.size(); ++a) {
        for (std::size_t b = a + 1; b < dimensions.size(); ++b) {
            auto const& da = registry.at(dimensions[a]);
            auto const& db = registry.at(dimensions[b]);
            auto const& pa = margins[da.id];
            auto const& pb = margins[db.id];
            std::size_t const ra = pa.size();
            std::size_t const rb = pb.size();
            std::vector<double> joint(ra * rb);
            for (auto& v : joint) {
                v = rng.uniform(0.2, 1.0);
            }
            for (int iter = 0; iter < 2000; ++iter) {
                for (std::size_t i = 0; i < ra; ++i) {
                    double row = 0.0;
                    for (std::size_t j = 0; j < rb; ++j) row += joint[i * rb + j];
                    for (std::size_t j = 0; j < rb; ++j) joint[i * rb + j] *= pa[i] / row;
                }
                double worst = 0.0;
                for (std::size_t j = 0; j < rb; ++j) {
                    double col = 0.0;
                    for (std::size_t i = 0; i < ra; ++i) col += joint[i * rb + j];
                    for (std::size_t i = 0; i < ra; ++i) joint[i * rb + j] *= pb[j] / col;
                }
                for (std::size_t i = 0; i < ra; ++i) {
                    double row = 0.0;
                    for (std::size_t j = 0; j < rb; ++j) row += joint[i * rb + j];
                    worst = std::max(worst, std::abs(row - pa[i]));
                }
                if (worst < 1e-16) {
                    break;
                }
            }
            for (std::size_t i = 0; i < ra; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < rb; ++j) row += joint[i * rb + j];
                for (std::size_t j = 0; j < rb; ++j) {
                    ref.conditionals[{{da.id, da.strata[i]}, {db.id, db.strata[j]}}] = joint[i * rb + j] / row;
                }
            }
            for (std::size_t j = 0; j < rb; ++j) {
                double col = 0.0;
                for (std::size_t i = 0; i < ra; ++i) col += joint[i * rb + j];
                for (std::size_t i = 0; i < ra; ++i) {
                    ref.conditionals[{{db.id, db.strata[j]}, {da.id, da.strata[i]}}] = joint[i * rb + j] / col;
                }
            }
        }
    }
    return ref;
}

//---------------------------------------------------------------------------//
// Spec
//---------------------------------------------------------------------------//

struct SyntheticSpec {
    std::uint64_t seed = 1;
    std::size_t n_polls = 500;
    Election election = Election::Y2020;
    std::uint64_t votes_min = 10;
    std::uint64_t votes_max = 5000;
    double proxies_mean = 30.0;

    /// Dimensions whose strata are sampled per user (first_option is a poll
    /// property and is handled separately).
    std::vector<std::string> dimensions = default_poststrat_dimensions();
    double true_intercept = 0.5;
    std::map<StratumKey, double> true_coefficients;

    /// Population marginals and conditionals (outcomes are filled in by
    /// generate()).
    ReferenceDistribution population;
    /// Center of the per-poll audience distribution; population marginals
    /// where a dimension is absent.
    std::map<StratumKey, double> audience_marginals;
    /// Dirichlet concentration of per-poll audiences around their center;
    /// 0 means every poll's audience equals the center.
    double audience_concentration = 20.0;

    std::map<std::string, double> missingness;  // per dimension, poll level
    double noise_sd = 0.0;
    double trump_first_rate = 0.5;
    double extra_option_rate = 0.0;
    double bot_threshold = kDefaultBotThreshold;
    StateColorMap colors;  // empty -> synthetic_color_map()
    std::size_t max_attempts = 1000;
};

/// Swing list plus a few uncontroversial red and blue states; enough for
/// generated location attributes.
inline StateColorMap synthetic_color_map()
{
    auto map = swing_only_color_map();
    for (auto s : {"CA", "NY", "IL", "MA", "WA", "MD", "NJ"}) {
        map[s] = StateColor::Blue;
    }
    for (auto s : {"TX", "AL", "OK", "WY", "KY", "ID", "TN"}) {
        map[s] = StateColor::Red;
    }
    return map;
}

inline void validate_spec(SyntheticSpec const& spec, DimensionRegistry const& registry)
{
    auto fail = [](std::string const& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
    if (spec.n_polls == 0) fail("n_polls must be positive");
    if (spec.votes_min == 0 || spec.votes_min > spec.votes_max) fail("need 0 < votes_min <= votes_max");
    if (!(spec.noise_sd >= 0.0)) fail("noise_sd must be non-negative");
    if (!(spec.proxies_mean > 0.0)) fail("proxies_mean must be positive");
    if (!(spec.audience_concentration >= 0.0)) fail("audience_concentration must be non-negative");
    for (auto const& d : spec.dimensions) {
        if (registry.find(d) == nullptr) fail("dimension '" + d + "' not in registry");
        if (d == "first_option") fail("first_option is a poll property, not a sampled dimension");
        for (auto const& s : registry.at(d).strata) {
            if (!spec.population.marginals.contains({d, s})) {
                fail("population has no marginal for " + d + ":" + s);
            }
        }
    }
    for (auto const& [k, b] : spec.true_coefficients) {
        if (!registry.contains(k) || registry.is_reference(k)) fail("bad true coefficient key " + k.str());
        bool const sampled = std::find(spec.dimensions.begin(), spec.dimensions.end(), k.dimension)
                             != spec.dimensions.end();
        if (!sampled && k.dimension != "first_option") fail("coefficient " + k.str() + " on an unsampled dimension");
        if (!spec.population.marginals.contains(k)) fail("population has no marginal for coefficient " + k.str());
    }
    for (auto const& [d, rate] : spec.missingness) {
        if (!(rate >= 0.0 && rate <= 1.0)) fail("missingness of '" + d + "' outside [0,1]");
    }
    try {
        validate_reference(spec.population);
    } catch (Error const& e) {
        fail(std::string("population: ") + e.what());
    }
}

//---------------------------------------------------------------------------//
// Ground truth
//---------------------------------------------------------------------------//

struct GroundTruth {
    double overall = 0.0;
    std::map<StratumKey, double> per_stratum;
};

inline FittedModel true_model(SyntheticSpec const& spec)
{
    FittedModel m;
    m.intercept.estimate = spec.true_intercept;
    for (auto const& [k, b] : spec.true_coefficients) {
        m.coefficients[k].estimate = b;
    }
    return m;
}

/// Population-level outcome implied by the true coefficients, overall and
/// for every stratum of the sampled dimensions with complete conditionals.
inline GroundTruth ground_truth(SyntheticSpec const& spec, DimensionRegistry const& registry)
{
    auto const model = true_model(spec);
    GroundTruth t;
    t.overall = poststratify(model, spec.population);
    for (auto const& d : spec.dimensions) {
        for (auto const& s : registry.at(d).strata) {
            try {
                t.per_stratum[{d, s}] = poststratify_conditional(model, spec.population, {d, s});
            } catch (Error const& e) {
                if (e.code() != ErrorCode::MissingConditional) {
                    throw;
                }
            }
        }
    }
    return t;
}

//---------------------------------------------------------------------------//
// Generation
//---------------------------------------------------------------------------//

struct SyntheticCorpus {
    std::vector<PollRecord> polls;
    std::vector<UserAttributeRecord> attributes;
    ReferenceDistribution reference;  // population with ground-truth outcomes
    StateColorMap colors;
    GroundTruth truth;
};

namespace detail {

inline std::vector<std::string> states_of(StateColorMap const& colors, StateColor c)
{
    std::vector<std::string> out;
    for (auto const& [s, col] : colors) {
        if (col == c) {
            out.push_back(s);
        }
    }
    return out;
}

/// Writes a raw attribute value on `user` that classifies back to `stratum`.
inline void set_attribute(UserAttributeRecord& user, std::string const& dim, std::string const& stratum,
                          SyntheticSpec const& spec, StateColorMap const& colors, Rng& rng)
{
    if (dim == "gender") {
        user.gender = stratum == "male" ? Gender::Male : Gender::Female;
    } else if (dim == "age") {
        if (stratum == "under30") {
            user.age_years = static_cast<unsigned>(18 + rng.index(12));
        } else if (stratum == "30to39") {
            user.age_years = static_cast<unsigned>(30 + rng.index(10));
        } else if (stratum == "40plus") {
            user.age_years = static_cast<unsigned>(40 + rng.index(41));
        } else {
            user.age_bin = stratum;
        }
    } else if (dim == "ideology") {
        if (stratum == "dem") {
            user.ideology_score = rng.uniform(-3.0, -1.0);
        } else if (stratum == "rep") {
            user.ideology_score = 3.0 - 2.0 * rng.uniform();
        } else {
            user.ideology_score = rng.uniform(-1.0, 1.0);
        }
    } else if (dim == "location") {
        StateColor const c = stratum == "blue_state" ? StateColor::Blue
                             : stratum == "red_state" ? StateColor::Red
                                                      : StateColor::Swing;
        auto const candidates = states_of(colors, c);
        if (candidates.empty()) {
            throw Error(ErrorCode::InvalidSpec, "color map has no " + std::string(to_string(c)) + " state");
        }
        user.state = candidates[rng.index(candidates.size())];
    } else if (dim == "bot") {
        user.bot_score = stratum == "bot" ? spec.bot_threshold + (1.0 - spec.bot_threshold) * (1.0 - rng.uniform())
                                          : spec.bot_threshold * rng.uniform();
    } else {
        throw Error(ErrorCode::InvalidSpec, "cannot synthesize attribute for dimension '" + dim + "'");
    }
}

inline std::uint64_t log_uniform_votes(Rng& rng, std::uint64_t lo, std::uint64_t hi)
{
    double const a = std::log(static_cast<double>(lo));
    double const b = std::log(static_cast<double>(hi) + 1.0);
    auto v = static_cast<std::uint64_t>(std::floor(std::exp(rng.uniform(a, b))));
    return std::clamp(v, lo, hi);
}

}  // namespace detail

inline SyntheticCorpus generate(SyntheticSpec const& spec, DimensionRegistry const& registry)
{
    validate_spec(spec, registry);
    SyntheticCorpus out;
    out.colors = spec.colors.empty() ? synthetic_color_map() : spec.colors;
    out.truth = ground_truth(spec, registry);
    out.reference = spec.population;
    out.reference.election = spec.election;
    out.reference.overall_outcome = out.truth.overall;
    out.reference.stratum_outcomes = out.truth.per_stratum;

    auto const focal = spec.election == Election::Y2016 ? std::pair{"Donald Trump", "Hillary Clinton"}
                                                        : std::pair{"Donald Trump", "Joe Biden"};
    auto const cutoff = election_cutoff(spec.election);
    auto const first_option_coef = [&] {
        auto it = spec.true_coefficients.find({"first_option", "trump"});
        return it == spec.true_coefficients.end() ? 0.0 : it->second;
    }();

    for (std::size_t p = 0; p < spec.n_polls; ++p) {
        Rng rng(derive_seed(spec.seed, {p}));
        std::string const poll_id = "p" + std::to_string(p + 1);

        // Audience composition, then the sampled proxies.
        std::map<std::string, std::vector<double>> audience;
        for (auto const& d : spec.dimensions) {
            auto const& strata = registry.at(d).strata;
            std::vector<double> center;
            for (auto const& s : strata) {
                auto it = spec.audience_marginals.find({d, s});
                center.push_back(it != spec.audience_marginals.end() ? it->second
                                                                     : spec.population.marginals.at({d, s}));
            }
            if (spec.audience_concentration > 0.0) {
                std::vector<double> alpha;
                for (double c : center) {
                    alpha.push_back(std::max(spec.audience_concentration * c, 1e-6));
                }
                audience[d] = rng.dirichlet(alpha);
            } else {
                audience[d] = center;
            }
        }
        auto const n_users = std::max<std::uint64_t>(1, rng.poisson(spec.proxies_mean));
        std::map<std::string, bool> masked;
        for (auto const& d : spec.dimensions) {
            auto it = spec.missingness.find(d);
            masked[d] = it != spec.missingness.end() && rng.bernoulli(it->second);
        }

        std::map<StratumKey, double> fractions;
        std::vector<UserAttributeRecord> users;
        for (std::uint64_t u = 0; u < n_users; ++u) {
            UserAttributeRecord user;
            user.user_id = poll_id + "_u" + std::to_string(u + 1);
            user.poll_id = poll_id;
            user.role = rng.bernoulli(0.5) ? UserRole::Retweeter : UserRole::Favoriter;
            user.org_score = 0.9 * rng.uniform();
            for (auto const& d : spec.dimensions) {
                auto const& strata = registry.at(d).strata;
                auto const& s = strata[rng.categorical(audience[d])];
                fractions[{d, s}] += 1.0 / static_cast<double>(n_users);
                if (!masked[d]) {
                    detail::set_attribute(user, d, s, spec, out.colors, rng);
                }
            }
            if (std::find(spec.dimensions.begin(), spec.dimensions.end(), "bot") == spec.dimensions.end()) {
                // Bot scores unrelated to the outcome keep the diagnostic
                // regression's bot column observable.
                detail::set_attribute(user, "bot", rng.bernoulli(0.05) ? "bot" : "not_bot", spec, out.colors, rng);
            }
            users.push_back(user);
            if (rng.bernoulli(0.1)) {
                // Same user under the other proxy role; counted once.
                user.role = user.role == UserRole::Retweeter ? UserRole::Favoriter : UserRole::Retweeter;
                users.push_back(user);
            }
        }
        // Accounts that never enter the marginals: an organization, a
        // follower and the author.
        {
            UserAttributeRecord org;
            org.user_id = poll_id + "_org";
            org.poll_id = poll_id;
            org.role = UserRole::Retweeter;
            org.org_score = 0.95;
            org.gender = Gender::Male;
            org.ideology_score = 2.5;
            users.push_back(org);
            UserAttributeRecord follower = org;
            follower.user_id = poll_id + "_follower";
            follower.role = UserRole::Follower;
            follower.org_score = 0.1;
            users.push_back(follower);
            UserAttributeRecord author = follower;
            author.user_id = poll_id + "_author";
            author.role = UserRole::Author;
            users.push_back(author);
        }

        bool const trump_first = rng.bernoulli(spec.trump_first_rate);
        double mean = spec.true_intercept + (trump_first ? first_option_coef : 0.0);
        for (auto const& [k, b] : spec.true_coefficients) {
            if (k.dimension != "first_option") {
                auto it = fractions.find(k);
                mean += b * (it == fractions.end() ? 0.0 : it->second);
            }
        }
        double y = mean;
        std::size_t attempts = 0;
        do {
            if (++attempts > spec.max_attempts) {
                throw Error(ErrorCode::InvalidSpec, "poll " + poll_id + ": outcome stays outside [0,1] after "
                                                        + std::to_string(spec.max_attempts) + " draws");
            }
            y = spec.noise_sd > 0.0 ? rng.normal(mean, spec.noise_sd) : mean;
        } while (y < 0.0 || y > 1.0);

        auto const focal_votes = detail::log_uniform_votes(rng, spec.votes_min, spec.votes_max);
        auto const trump_votes = static_cast<std::uint64_t>(std::llround(y * static_cast<double>(focal_votes)));

        PollRecord poll;
        poll.poll_id = poll_id;
        poll.author_id = poll_id + "_author";
        poll.election = spec.election;
        poll.created_at = cutoff - std::chrono::seconds(static_cast<std::int64_t>(rng.index(90 * 86400)));
        PollOption const t{focal.first, trump_votes};
        PollOption const d{focal.second, focal_votes - trump_votes};
        poll.options = trump_first ? std::vector{t, d} : std::vector{d, t};
        if (rng.bernoulli(spec.extra_option_rate)) {
            auto const other = static_cast<std::uint64_t>(std::llround(rng.uniform(0.02, 0.2) * static_cast<double>(focal_votes)));
            auto const pos = static_cast<std::ptrdiff_t>(rng.index(3));
            poll.options.insert(poll.options.begin() + pos, PollOption{"Someone else", other});
        }
        auto const total = static_cast<double>(poll.total_votes());
        poll.retweets = static_cast<std::uint64_t>(std::llround(total * rng.uniform(0.005, 0.03)));
        poll.favorites = static_cast<std::uint64_t>(std::llround(total * rng.uniform(0.01, 0.05)));

        out.polls.push_back(std::move(poll));
        for (auto& u : users) {
            out.attributes.push_back(std::move(u));
        }
    }
    return out;
}

//---------------------------------------------------------------------------//
// JSON
//---------------------------------------------------------------------------//

/// Parses a generator spec. "population" takes the reference-file layout;
/// when absent, a random consistent population over "dimensions" is drawn
/// from "population_seed".
inline SyntheticSpec spec_from_json(Json const& j, DimensionRegistry const& registry)
{
    SyntheticSpec s;
    auto num = [&](char const* key, auto fallback) {
        using T = decltype(fallback);
        return j.contains(key) ? j.at(key).get<T>() : fallback;
    };
    s.seed = num("seed", s.seed);
    s.n_polls = num("n_polls", s.n_polls);
    if (j.contains("election")) s.election = parse_election(j.at("election").get<std::string>());
    s.votes_min = num("votes_min", s.votes_min);
    s.votes_max = num("votes_max", s.votes_max);
    s.proxies_mean = num("proxies_mean", s.proxies_mean);
    if (j.contains("dimensions")) s.dimensions = j.at("dimensions").get<std::vector<std::string>>();
    s.true_intercept = num("true_intercept", s.true_intercept);
    if (j.contains("true_coefficients")) {
        s.true_coefficients = detail::parse_stratum_table(j.at("true_coefficients"), "spec.true_coefficients");
    }
    if (j.contains("population")) {
        Json pop = j.at("population");
        if (!pop.contains("election")) pop["election"] = std::string(to_string(s.election));
        s.population = reference_from_json(pop);
    } else {
        s.population = random_consistent_reference(registry, s.dimensions, num("population_seed", std::uint64_t{7}),
                                                   s.election);
    }
    if (j.contains("audience_marginals")) {
        s.audience_marginals = detail::parse_stratum_table(j.at("audience_marginals"), "spec.audience_marginals");
    }
    s.audience_concentration = num("audience_concentration", s.audience_concentration);
    if (j.contains("missingness")) s.missingness = j.at("missingness").get<std::map<std::string, double>>();
    s.noise_sd = num("noise_sd", s.noise_sd);
    s.trump_first_rate = num("trump_first_rate", s.trump_first_rate);
    s.extra_option_rate = num("extra_option_rate", s.extra_option_rate);
    s.bot_threshold = num("bot_threshold", s.bot_threshold);
    if (j.contains("colors")) s.colors = color_map_from_json(j.at("colors"));
    s.max_attempts = num("max_attempts", s.max_attempts);
    validate_spec(s, registry);
    return s;
}

}  // namespace pollstrat
