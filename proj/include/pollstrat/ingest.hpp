#pragma once

// File formats: poll and user-attribute CSVs, reference/model/registry JSON,
// and the sweep CSV. Loaders are total: every data row is either converted
// or listed in the rejection report with its row number and reason.

#include <pollstrat/attrs.hpp>
#include <pollstrat/csv.hpp>
#include <pollstrat/error.hpp>
#include <pollstrat/model.hpp>
#include <pollstrat/poststrat.hpp>
#include <pollstrat/serialize.hpp>

#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pollstrat {

struct Rejection {
    std::size_t row = 0;   // 1-based data row (header excluded)
    std::size_t line = 0;  // 1-based line in the file
    std::string id;        // poll_id / user_id when available
    std::string reason;
};

template <class T>
struct LoadResult {
    std::vector<T> records;
    std::vector<Rejection> rejections;
    std::size_t rows_read = 0;

    bool reconciles() const { return records.size() + rejections.size() == rows_read; }
};

namespace detail {

inline std::string read_file(std::filesystem::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Unreadable, "cannot open '" + path.string() + "'");
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline bool blank_record(csv::Record const& rec)
{
    return rec.fields.size() == 1 && csv::trim(rec.fields[0]).empty();
}

inline void write_file(std::filesystem::path const& path, std::string const& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Unreadable, "cannot write '" + path.string() + "'");
    }
    out << content;
}

}  // namespace detail

inline std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

inline std::string file_digest(std::filesystem::path const& path)
{
    return sha256_hex(detail::read_file(path));
}

//---------------------------------------------------------------------------//
// Polls
//---------------------------------------------------------------------------//

inline std::vector<std::string> poll_header(std::size_t option_slots = 4)
{
    std::vector<std::string> h{"poll_id", "author_id", "created_at", "election"};
    for (std::size_t i = 1; i <= option_slots; ++i) {
        h.push_back("option_" + std::to_string(i) + "_label");
    }
    for (std::size_t i = 1; i <= option_slots; ++i) {
        h.push_back("option_" + std::to_string(i) + "_votes");
    }
    h.push_back("retweets");
    h.push_back("favorites");
    return h;
}

inline constexpr std::size_t kMinOptions = 2;
inline constexpr std::size_t kMaxOptions = 4;

/// Parses a poll CSV. The header must be the canonical column list with
/// K >= 2 option slots (4 in files this library writes); rows are validated
/// for `season`, and polls created after its election day are rejected.
inline LoadResult<PollRecord> parse_polls(std::istream& in, Election season)
{
    csv::Reader reader(in);
    csv::Record rec;
    if (!reader.next(rec)) {
        throw Error(ErrorCode::SchemaMismatch, "poll file is empty (no header)");
    }
    auto const header = rec.fields;
    if (header.size() < 8 || (header.size() - 6) % 2 != 0 || header != poll_header((header.size() - 6) / 2)) {
        throw Error(ErrorCode::SchemaMismatch, "poll file header does not match the expected columns "
                                               "(poll_id, author_id, created_at, election, option_k_label..., "
                                               "option_k_votes..., retweets, favorites)");
    }
    std::size_t const slots = (header.size() - 6) / 2;

    LoadResult<PollRecord> out;
    std::set<std::string> seen;
    while (reader.next(rec)) {
        if (detail::blank_record(rec)) {
            continue;
        }
        ++out.rows_read;
        auto reject = [&](std::string reason) {
            out.rejections.push_back(
                {out.rows_read, rec.line, rec.fields.empty() ? "" : rec.fields[0], std::move(reason)});
        };
        auto const& f = rec.fields;
        if (f.size() != header.size()) {
            reject("field count " + std::to_string(f.size()) + ", expected " + std::to_string(header.size()));
            continue;
        }
        PollRecord poll;
        poll.poll_id = std::string(csv::trim(f[0]));
        poll.author_id = std::string(csv::trim(f[1]));
        if (poll.poll_id.empty()) {
            reject("empty poll_id");
            continue;
        }
        auto const created = csv::parse_timestamp(f[2]);
        if (!created) {
            reject("created_at is not an ISO-8601 UTC timestamp");
            continue;
        }
        poll.created_at = *created;
        try {
            poll.election = parse_election(csv::trim(f[3]));
        } catch (Error const&) {
            reject("unknown election '" + f[3] + "'");
            continue;
        }
        if (poll.election != season) {
            reject("season mismatch: election " + std::string(to_string(poll.election)));
            continue;
        }

        std::string problem;
        bool ended = false;
        for (std::size_t i = 0; i < slots && problem.empty(); ++i) {
            auto const label = std::string(csv::trim(f[4 + i]));
            auto const votes_text = csv::trim(f[4 + slots + i]);
            if (label.empty() && votes_text.empty()) {
                ended = true;
                continue;
            }
            if (ended) {
                problem = "option gap before option " + std::to_string(i + 1);
            } else if (label.empty()) {
                problem = "option " + std::to_string(i + 1) + " has votes but no label";
            } else if (auto v = csv::parse_count(votes_text)) {
                poll.options.push_back({label, *v});
            } else {
                problem = "vote count of option " + std::to_string(i + 1) + " is not a non-negative integer";
            }
        }
        if (!problem.empty()) {
            reject(problem);
            continue;
        }
        if (poll.options.size() < kMinOptions || poll.options.size() > kMaxOptions) {
            reject("option count " + std::to_string(poll.options.size()) + " outside 2-4");
            continue;
        }
        auto const rt = csv::parse_count(f[4 + 2 * slots]);
        auto const fav = csv::parse_count(f[5 + 2 * slots]);
        if (!rt || !fav) {
            reject("retweets/favorites must be non-negative integers");
            continue;
        }
        poll.retweets = *rt;
        poll.favorites = *fav;
        if (poll.created_at > election_cutoff(season)) {
            reject("post-election: created " + csv::format_timestamp(poll.created_at));
            continue;
        }
        if (!seen.insert(poll.poll_id).second) {
            reject("duplicate poll_id");
            continue;
        }
        out.records.push_back(std::move(poll));
    }
    return out;
}

inline LoadResult<PollRecord> load_polls(std::filesystem::path const& path, Election season)
{
    std::istringstream in(detail::read_file(path));
    return parse_polls(in, season);
}

inline void write_polls(std::ostream& out, std::span<PollRecord const> polls)
{
    csv::write_row(out, poll_header(kMaxOptions));
    for (auto const& p : polls) {
        std::vector<std::string> row{p.poll_id, p.author_id, csv::format_timestamp(p.created_at),
                                     std::string(to_string(p.election))};
        for (std::size_t i = 0; i < kMaxOptions; ++i) {
            row.push_back(i < p.options.size() ? p.options[i].label : "");
        }
        for (std::size_t i = 0; i < kMaxOptions; ++i) {
            row.push_back(i < p.options.size() ? std::to_string(p.options[i].votes) : "");
        }
        row.push_back(std::to_string(p.retweets));
        row.push_back(std::to_string(p.favorites));
        csv::write_row(out, row);
    }
}

//---------------------------------------------------------------------------//
// User attributes
//---------------------------------------------------------------------------//

inline std::vector<std::string> const& attribute_header()
{
    static std::vector<std::string> const h{"user_id", "role", "poll_id", "ideology_score", "bot_score",
                                            "org_score", "age_years", "gender", "state"};
    return h;
}

inline LoadResult<UserAttributeRecord> parse_attributes(std::istream& in)
{
    csv::Reader reader(in);
    csv::Record rec;
    if (!reader.next(rec) || rec.fields != attribute_header()) {
        throw Error(ErrorCode::SchemaMismatch,
                    "attribute file header must be: user_id,role,poll_id,ideology_score,bot_score,"
                    "org_score,age_years,gender,state");
    }
    LoadResult<UserAttributeRecord> out;
    while (reader.next(rec)) {
        if (detail::blank_record(rec)) {
            continue;
        }
        ++out.rows_read;
        auto const& f = rec.fields;
        auto reject = [&](std::string reason) {
            out.rejections.push_back({out.rows_read, rec.line, f.empty() ? "" : f[0], std::move(reason)});
        };
        if (f.size() != attribute_header().size()) {
            reject("field count " + std::to_string(f.size()) + ", expected 9");
            continue;
        }
        UserAttributeRecord r;
        r.user_id = std::string(csv::trim(f[0]));
        r.poll_id = std::string(csv::trim(f[2]));
        if (r.user_id.empty() || r.poll_id.empty()) {
            reject("empty user_id or poll_id");
            continue;
        }
        try {
            r.role = parse_role(csv::trim(f[1]));
        } catch (Error const&) {
            reject("unknown role '" + f[1] + "'");
            continue;
        }
        std::string problem;
        auto score = [&](std::string const& text, char const* name, double lo, double hi) -> std::optional<double> {
            if (csv::trim(text).empty()) {
                return std::nullopt;
            }
            auto v = csv::parse_real(text);
            if (!v || *v < lo || *v > hi) {
                problem = std::string(name) + " '" + text + "' outside [" + csv::format_real(lo) + ", "
                          + csv::format_real(hi) + "]";
                return std::nullopt;
            }
            return v;
        };
        r.ideology_score = score(f[3], "ideology_score", -3.0, 3.0);
        r.bot_score = score(f[4], "bot_score", 0.0, 1.0);
        r.org_score = score(f[5], "org_score", 0.0, 1.0);
        auto const age = csv::trim(f[6]);
        if (!age.empty()) {
            if (auto years = csv::parse_count(age)) {
                r.age_years = static_cast<unsigned>(*years);
            } else if (age.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_") == std::string_view::npos) {
                r.age_bin = std::string(age);
            } else {
                problem = "age_years '" + f[6] + "' is neither a non-negative integer nor an age-bin id";
            }
        }
        auto const gender = canonical_label(f[7]);
        if (gender == "male" || gender == "m") {
            r.gender = Gender::Male;
        } else if (gender == "female" || gender == "f") {
            r.gender = Gender::Female;
        } else if (!gender.empty()) {
            problem = "gender '" + f[7] + "' must be male or female";
        }
        auto const state = csv::trim(f[8]);
        if (!state.empty()) {
            r.state = canonical_state(state);
        }
        if (!problem.empty()) {
            reject(problem);
            continue;
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

inline LoadResult<UserAttributeRecord> load_attributes(std::filesystem::path const& path)
{
    std::istringstream in(detail::read_file(path));
    return parse_attributes(in);
}

inline void write_attributes(std::ostream& out, std::span<UserAttributeRecord const> records)
{
    csv::write_row(out, attribute_header());
    auto real = [](std::optional<double> v) { return v ? csv::format_real(*v) : std::string(); };
    for (auto const& r : records) {
        std::string age;
        if (r.age_years) {
            age = std::to_string(*r.age_years);
        } else if (r.age_bin) {
            age = *r.age_bin;
        }
        csv::write_row(out, {r.user_id, std::string(to_string(r.role)), r.poll_id, real(r.ideology_score),
                             real(r.bot_score), real(r.org_score), age,
                             r.gender ? std::string(to_string(*r.gender)) : "", r.state.value_or("")});
    }
}

//---------------------------------------------------------------------------//
// JSON documents
//---------------------------------------------------------------------------//

inline Json load_json(std::filesystem::path const& path)
{
    auto const text = detail::read_file(path);
    try {
        return Json::parse(text);
    } catch (nlohmann::json::parse_error const& e) {
        throw Error(ErrorCode::SchemaMismatch, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

/// Canonical text form: two-space indent, sorted keys, trailing newline.
inline std::string dump_json(Json const& j)
{
    return j.dump(2) + "\n";
}

inline void save_json(std::filesystem::path const& path, Json const& j)
{
    detail::write_file(path, dump_json(j));
}

inline ReferenceDistribution load_reference(std::filesystem::path const& path, ReferenceTolerances tol = {})
{
    return reference_from_json(load_json(path), tol);
}

inline void save_reference(std::filesystem::path const& path, ReferenceDistribution const& ref)
{
    save_json(path, reference_to_json(ref));
}

inline DimensionRegistry load_registry(std::filesystem::path const& path)
{
    return registry_from_json(load_json(path));
}

inline void save_model(std::filesystem::path const& path, FittedModel const& model)
{
    save_json(path, model_to_json(model));
}

inline FittedModel load_model(std::filesystem::path const& path, DimensionRegistry const& registry)
{
    return model_from_json(load_json(path), registry);
}

inline StateColorMap load_color_map(std::filesystem::path const& path)
{
    return color_map_from_json(load_json(path));
}

/// CSV with columns state,dem_votes,rep_votes.
inline std::vector<StateResult> load_state_results(std::filesystem::path const& path)
{
    std::istringstream in(detail::read_file(path));
    csv::Reader reader(in);
    csv::Record rec;
    if (!reader.next(rec) || rec.fields != std::vector<std::string>{"state", "dem_votes", "rep_votes"}) {
        throw Error(ErrorCode::SchemaMismatch, "state results header must be: state,dem_votes,rep_votes");
    }
    std::vector<StateResult> out;
    while (reader.next(rec)) {
        if (detail::blank_record(rec)) {
            continue;
        }
        auto const dem = rec.fields.size() == 3 ? csv::parse_real(rec.fields[1]) : std::nullopt;
        auto const rep = rec.fields.size() == 3 ? csv::parse_real(rec.fields[2]) : std::nullopt;
        if (!dem || !rep) {
            throw Error(ErrorCode::SchemaMismatch, "state results line " + std::to_string(rec.line) + " is malformed");
        }
        out.push_back({rec.fields[0], *dem, *rep});
    }
    return out;
}

//---------------------------------------------------------------------------//
// Corpus assembly
//---------------------------------------------------------------------------//

struct FileProvenance {
    std::string path;
    std::string sha256;
    std::size_t rows = 0;
};

struct CorpusBundle {
    std::vector<PollRecord> polls;
    std::vector<UserAttributeRecord> attributes;
    std::optional<ReferenceDistribution> reference;
    std::vector<Rejection> poll_rejections;
    std::vector<Rejection> attribute_rejections;
    std::vector<FileProvenance> provenance;
};

/// Attribute rows whose poll_id names no loaded poll are moved to the
/// rejection report.
inline void link_attributes(CorpusBundle& bundle)
{
    std::set<std::string> ids;
    for (auto const& p : bundle.polls) {
        ids.insert(p.poll_id);
    }
    std::vector<UserAttributeRecord> linked;
    for (auto& r : bundle.attributes) {
        if (ids.contains(r.poll_id)) {
            linked.push_back(std::move(r));
        } else {
            bundle.attribute_rejections.push_back({0, 0, r.user_id, "unknown poll_id '" + r.poll_id + "'"});
        }
    }
    bundle.attributes = std::move(linked);
}

inline CorpusBundle load_corpus(std::filesystem::path const& polls_path,
                                std::optional<std::filesystem::path> const& attributes_path,
                                std::optional<std::filesystem::path> const& reference_path, Election season)
{
    CorpusBundle bundle;
    auto polls = load_polls(polls_path, season);
    bundle.provenance.push_back({polls_path.string(), file_digest(polls_path), polls.rows_read});
    bundle.polls = std::move(polls.records);
    bundle.poll_rejections = std::move(polls.rejections);
    if (attributes_path) {
        auto attrs = load_attributes(*attributes_path);
        bundle.provenance.push_back({attributes_path->string(), file_digest(*attributes_path), attrs.rows_read});
        bundle.attributes = std::move(attrs.records);
        bundle.attribute_rejections = std::move(attrs.rejections);
        link_attributes(bundle);
    }
    if (reference_path) {
        bundle.reference = load_reference(*reference_path);
        bundle.provenance.push_back({reference_path->string(), file_digest(*reference_path), 0});
    }
    return bundle;
}

struct ObservationBuild {
    std::vector<PollObservation> observations;
    std::vector<Rejection> excluded;  // polls that could not be normalized
};

/// Normalizes every poll and aggregates its proxy users into marginals.
inline ObservationBuild build_observations(std::span<PollRecord const> polls,
                                           std::span<UserAttributeRecord const> attributes,
                                           DimensionRegistry const& registry, AggregationOptions const& opts)
{
    std::map<std::string, std::vector<UserAttributeRecord>> by_poll;
    for (auto const& a : attributes) {
        by_poll[a.poll_id].push_back(a);
    }
    ObservationBuild out;
    std::size_t row = 0;
    for (auto const& poll : polls) {
        ++row;
        try {
            PollObservation obs;
            obs.outcome = normalize_poll(poll, focal_for(poll.election));
            auto it = by_poll.find(poll.poll_id);
            std::span<UserAttributeRecord const> users;
            if (it != by_poll.end()) {
                users = it->second;
            }
            obs.marginals = aggregate_marginals(poll.poll_id, users, registry, opts, &obs.outcome);
            out.observations.push_back(std::move(obs));
        } catch (Error const& e) {
            out.excluded.push_back({row, 0, poll.poll_id, e.what()});
        }
    }
    return out;
}

//---------------------------------------------------------------------------//
// Sweep output
//---------------------------------------------------------------------------//

inline void write_sweep_csv(std::ostream& out, std::span<SweepRow const> rows)
{
    csv::write_row(out, {"M", "n_polls", "estimate", "ci_low", "ci_high", "abs_error", "mean_stratum_abs_error",
                         "status"});
    auto real = [](std::optional<double> v) { return v ? csv::format_real(*v) : std::string(); };
    for (auto const& r : rows) {
        if (r.report) {
            auto const& rep = *r.report;
            csv::write_row(out, {std::to_string(r.min_votes), std::to_string(r.n_polls),
                                 csv::format_real(rep.overall.point), csv::format_real(rep.overall.ci_low),
                                 csv::format_real(rep.overall.ci_high), real(rep.abs_error),
                                 real(rep.mean_stratum_abs_error), "ok"});
        } else {
            csv::write_row(out, {std::to_string(r.min_votes), std::to_string(r.n_polls), "", "", "", "", "",
                                 std::string(to_string(r.error_code.value_or(ErrorCode::InvalidArgument)))});
        }
    }
}

inline Json rejections_to_json(std::span<Rejection const> rejections)
{
    Json arr = Json::array();
    for (auto const& r : rejections) {
        arr.push_back({{"row", r.row}, {"line", r.line}, {"id", r.id}, {"reason", r.reason}});
    }
    return arr;
}

}  // namespace pollstrat
