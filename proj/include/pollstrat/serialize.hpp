#pragma once

// JSON encodings of registries, reference tables, fitted models, estimate
// reports and state color maps. Objects are emitted with sorted keys, so the
// same value always serializes to the same bytes.

#include <pollstrat/attrs.hpp>
#include <pollstrat/error.hpp>
#include <pollstrat/model.hpp>
#include <pollstrat/poststrat.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace pollstrat {

using Json = nlohmann::json;

inline constexpr int kModelSchemaVersion = 1;
inline constexpr int kReferenceSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

namespace detail {

/// JSON has no inf/nan; they travel as strings.
inline Json real_to_json(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return v;
}

inline double real_from_json(Json const& j, std::string const& what)
{
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        auto const s = j.get<std::string>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw Error(ErrorCode::SchemaMismatch, what + ": expected a number");
}

template <class T>
T required(Json const& j, char const* key, std::string const& context)
{
    if (!j.is_object() || !j.contains(key)) {
        throw Error(ErrorCode::SchemaMismatch, context + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (nlohmann::json::exception const&) {
        throw Error(ErrorCode::SchemaMismatch, context + ": field '" + key + "' has the wrong type");
    }
}

inline Json stratum_table(std::map<StratumKey, double> const& values)
{
    Json out = Json::object();
    for (auto const& [k, v] : values) {
        out[k.dimension][k.stratum] = v;
    }
    return out;
}

inline std::map<StratumKey, double> parse_stratum_table(Json const& j, std::string const& context)
{
    if (!j.is_object()) {
        throw Error(ErrorCode::SchemaMismatch, context + ": expected an object of dimensions");
    }
    std::map<StratumKey, double> out;
    for (auto const& [dim, strata] : j.items()) {
        if (!strata.is_object()) {
            throw Error(ErrorCode::SchemaMismatch, context + "." + dim + ": expected an object of strata");
        }
        for (auto const& [s, v] : strata.items()) {
            if (!v.is_number()) {
                throw Error(ErrorCode::SchemaMismatch, context + "." + dim + "." + s + ": expected a number");
            }
            out[{dim, s}] = v.get<double>();
        }
    }
    return out;
}

}  // namespace detail

//---------------------------------------------------------------------------//
// Registry
//---------------------------------------------------------------------------//

inline Json registry_to_json(DimensionRegistry const& registry)
{
    Json dims = Json::array();
    for (auto const& d : registry.dimensions()) {
        dims.push_back({{"id", d.id}, {"strata", d.strata}, {"reference", d.reference}});
    }
    return {{"version", registry.version()}, {"dimensions", dims}};
}

/// Throws InvalidRegistry listing every violation.
inline DimensionRegistry registry_from_json(Json const& j)
{
    std::string const ctx = "registry";
    auto const dims_json = detail::required<Json>(j, "dimensions", ctx);
    if (!dims_json.is_array()) {
        throw Error(ErrorCode::SchemaMismatch, ctx + ": 'dimensions' must be an array");
    }
    std::vector<Dimension> dims;
    for (auto const& d : dims_json) {
        dims.push_back({detail::required<std::string>(d, "id", ctx),
                        detail::required<std::vector<std::string>>(d, "strata", ctx),
                        detail::required<std::string>(d, "reference", ctx)});
    }
    std::string version = j.is_object() && j.contains("version") ? j.at("version").get<std::string>() : "custom";
    DimensionRegistry registry(std::move(dims), std::move(version));
    auto const violations = validate_registry(registry);
    if (!violations.empty()) {
        std::string msg;
        for (auto const& v : violations) {
            msg += (msg.empty() ? "" : "; ") + v;
        }
        throw Error(ErrorCode::InvalidRegistry, msg);
    }
    return registry;
}

//---------------------------------------------------------------------------//
// Reference distribution
//---------------------------------------------------------------------------//

inline Json reference_to_json(ReferenceDistribution const& ref)
{
    Json j;
    j["schema_version"] = kReferenceSchemaVersion;
    j["election"] = std::string(to_string(ref.election));
    j["marginals"] = detail::stratum_table(ref.marginals);

    std::map<StratumKey, std::map<StratumKey, double>> grouped;
    for (auto const& [key, p] : ref.conditionals) {
        grouped[key.first][key.second] = p;
    }
    Json conds = Json::array();
    for (auto const& [given, dist] : grouped) {
        conds.push_back({{"given", given.str()}, {"distributions", detail::stratum_table(dist)}});
    }
    j["conditionals"] = conds;

    Json outcomes = Json::object();
    if (ref.overall_outcome) {
        outcomes["overall"] = *ref.overall_outcome;
    }
    if (!ref.stratum_outcomes.empty()) {
        outcomes["strata"] = detail::stratum_table(ref.stratum_outcomes);
    }
    j["outcomes"] = outcomes;
    return j;
}

/// Parses and validates (sum-to-one, mixture consistency); throws
/// DistributionInvalid naming the offending distribution.
inline ReferenceDistribution reference_from_json(Json const& j, ReferenceTolerances tol = {})
{
    std::string const ctx = "reference";
    if (j.is_object() && j.contains("schema_version")
        && j.at("schema_version") != Json(kReferenceSchemaVersion)) {
        throw Error(ErrorCode::VersionMismatch, ctx + ": unsupported schema_version " + j.at("schema_version").dump());
    }
    ReferenceDistribution ref;
    ref.election = parse_election(detail::required<std::string>(j, "election", ctx));
    ref.marginals = detail::parse_stratum_table(detail::required<Json>(j, "marginals", ctx), ctx + ".marginals");
    if (j.contains("conditionals")) {
        for (auto const& c : j.at("conditionals")) {
            auto const given = parse_stratum_key(detail::required<std::string>(c, "given", ctx + ".conditionals"));
            auto const dist = detail::parse_stratum_table(detail::required<Json>(c, "distributions", ctx),
                                                          ctx + ".conditionals[" + given.str() + "]");
            for (auto const& [target, p] : dist) {
                ref.conditionals[{given, target}] = p;
            }
        }
    }
    if (j.contains("outcomes")) {
        auto const& o = j.at("outcomes");
        if (o.contains("overall")) {
            ref.overall_outcome = detail::real_from_json(o.at("overall"), ctx + ".outcomes.overall");
        }
        if (o.contains("strata")) {
            ref.stratum_outcomes = detail::parse_stratum_table(o.at("strata"), ctx + ".outcomes.strata");
        }
    }
    validate_reference(ref, tol);
    return ref;
}

//---------------------------------------------------------------------------//
// Fitted model
//---------------------------------------------------------------------------//

namespace detail {

inline Json coefficient_json(CoefficientEstimate const& c)
{
    return {{"estimate", real_to_json(c.estimate)},
            {"std_error", real_to_json(c.std_error)},
            {"t_stat", real_to_json(c.t_stat)},
            {"p_value", real_to_json(c.p_value)}};
}

inline CoefficientEstimate coefficient_from_json(Json const& j, std::string const& ctx)
{
    auto field = [&](char const* k) { return real_from_json(required<Json>(j, k, ctx), ctx + "." + k); };
    return {field("estimate"), field("std_error"), field("t_stat"), field("p_value")};
}

}  // namespace detail

inline Json model_to_json(FittedModel const& m)
{
    Json j;
    j["schema_version"] = kModelSchemaVersion;
    j["dimension_set"] = m.dimension_set;
    j["min_votes"] = m.min_votes;
    j["n_obs"] = m.n_obs;
    j["r2"] = detail::real_to_json(m.r2);
    j["adj_r2"] = detail::real_to_json(m.adj_r2);
    j["intercept"] = detail::coefficient_json(m.intercept);
    Json coefs = Json::array();
    for (auto const& [k, c] : m.coefficients) {
        auto cj = detail::coefficient_json(c);
        cj["dimension"] = k.dimension;
        cj["stratum"] = k.stratum;
        coefs.push_back(cj);
    }
    j["coefficients"] = coefs;
    Json means = Json::array();
    for (auto const& [k, v] : m.imputation_means) {
        means.push_back({{"dimension", k.dimension}, {"stratum", k.stratum}, {"value", detail::real_to_json(v)}});
    }
    j["imputation_means"] = means;
    return j;
}

/// Throws VersionMismatch for an unknown schema_version and InvalidModel when
/// the decoded model breaks its invariants against `registry`.
inline FittedModel model_from_json(Json const& j, DimensionRegistry const& registry)
{
    std::string const ctx = "model";
    if (!j.is_object() || !j.contains("schema_version") || j.at("schema_version") != Json(kModelSchemaVersion)) {
        throw Error(ErrorCode::VersionMismatch,
                    ctx + ": unsupported schema_version "
                        + (j.is_object() && j.contains("schema_version") ? j.at("schema_version").dump() : "(none)"));
    }
    FittedModel m;
    m.dimension_set = detail::required<std::vector<std::string>>(j, "dimension_set", ctx);
    m.min_votes = detail::required<std::uint64_t>(j, "min_votes", ctx);
    m.n_obs = detail::required<std::size_t>(j, "n_obs", ctx);
    m.r2 = detail::real_from_json(detail::required<Json>(j, "r2", ctx), ctx + ".r2");
    m.adj_r2 = detail::real_from_json(detail::required<Json>(j, "adj_r2", ctx), ctx + ".adj_r2");
    m.intercept = detail::coefficient_from_json(detail::required<Json>(j, "intercept", ctx), ctx + ".intercept");
    for (auto const& c : detail::required<Json>(j, "coefficients", ctx)) {
        StratumKey const key{detail::required<std::string>(c, "dimension", ctx),
                             detail::required<std::string>(c, "stratum", ctx)};
        if (m.coefficients.contains(key)) {
            throw Error(ErrorCode::InvalidModel, "duplicate coefficient " + key.str());
        }
        m.coefficients[key] = detail::coefficient_from_json(c, ctx + "." + key.str());
    }
    for (auto const& v : detail::required<Json>(j, "imputation_means", ctx)) {
        StratumKey const key{detail::required<std::string>(v, "dimension", ctx),
                             detail::required<std::string>(v, "stratum", ctx)};
        m.imputation_means[key] = detail::real_from_json(detail::required<Json>(v, "value", ctx), ctx);
    }
    validate_model(m, registry);
    return m;
}

//---------------------------------------------------------------------------//
// Estimate report
//---------------------------------------------------------------------------//

inline Json summary_to_json(BootstrapSummary const& s)
{
    return {{"point", detail::real_to_json(s.point)},
            {"ci_low", detail::real_to_json(s.ci_low)},
            {"ci_high", detail::real_to_json(s.ci_high)},
            {"replicates", s.replicates},
            {"seed", s.seed}};
}

inline BootstrapSummary summary_from_json(Json const& j)
{
    std::string const ctx = "bootstrap summary";
    return {detail::real_from_json(detail::required<Json>(j, "point", ctx), ctx),
            detail::real_from_json(detail::required<Json>(j, "ci_low", ctx), ctx),
            detail::real_from_json(detail::required<Json>(j, "ci_high", ctx), ctx),
            detail::required<std::size_t>(j, "replicates", ctx), detail::required<std::uint64_t>(j, "seed", ctx)};
}

inline Json optional_real(std::optional<double> v)
{
    return v ? detail::real_to_json(*v) : Json(nullptr);
}

inline Json report_to_json(EstimateReport const& r)
{
    Json j;
    j["schema_version"] = kReportSchemaVersion;
    j["election"] = std::string(to_string(r.election));
    j["min_votes"] = r.min_votes;
    j["n_polls_used"] = r.n_polls_used;
    j["overall"] = summary_to_json(r.overall);
    Json strata = Json::object();
    for (auto const& [k, s] : r.per_stratum) {
        strata[k.dimension][k.stratum] = summary_to_json(s);
    }
    j["per_stratum"] = strata;
    j["abs_error"] = optional_real(r.abs_error);
    j["mean_stratum_abs_error"] = optional_real(r.mean_stratum_abs_error);
    j["strata_without_truth"] = r.strata_without_truth;
    j["out_of_range"] = r.out_of_range;
    return j;
}

inline EstimateReport report_from_json(Json const& j)
{
    std::string const ctx = "report";
    if (!j.is_object() || j.value("schema_version", 0) != kReportSchemaVersion) {
        throw Error(ErrorCode::VersionMismatch, ctx + ": unsupported schema_version");
    }
    EstimateReport r;
    r.election = parse_election(detail::required<std::string>(j, "election", ctx));
    r.min_votes = detail::required<std::uint64_t>(j, "min_votes", ctx);
    r.n_polls_used = detail::required<std::size_t>(j, "n_polls_used", ctx);
    r.overall = summary_from_json(detail::required<Json>(j, "overall", ctx));
    for (auto const& [dim, strata] : detail::required<Json>(j, "per_stratum", ctx).items()) {
        for (auto const& [s, v] : strata.items()) {
            r.per_stratum[{dim, s}] = summary_from_json(v);
        }
    }
    auto opt = [&](char const* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) {
            return std::nullopt;
        }
        return detail::real_from_json(j.at(key), ctx);
    };
    r.abs_error = opt("abs_error");
    r.mean_stratum_abs_error = opt("mean_stratum_abs_error");
    r.strata_without_truth = j.value("strata_without_truth", std::size_t{0});
    r.out_of_range = j.value("out_of_range", std::vector<std::string>{});
    return r;
}

//---------------------------------------------------------------------------//
// State color map
//---------------------------------------------------------------------------//

inline Json color_map_to_json(StateColorMap const& map)
{
    Json j = Json::object();
    for (auto const& [state, color] : map) {
        j[state] = std::string(to_string(color));
    }
    return j;
}

inline StateColorMap color_map_from_json(Json const& j)
{
    if (!j.is_object()) {
        throw Error(ErrorCode::SchemaMismatch, "color map: expected an object of state -> color");
    }
    StateColorMap map;
    for (auto const& [state, color] : j.items()) {
        if (!color.is_string()) {
            throw Error(ErrorCode::SchemaMismatch, "color map: color of '" + state + "' must be a string");
        }
        map[canonical_state(state)] = parse_state_color(color.get<std::string>());
    }
    return map;
}

}  // namespace pollstrat
