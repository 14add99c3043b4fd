// pollstrat command-line tool.
//
// Every subcommand writes its outputs plus run_manifest.json into --out-dir.
// Exit status: 0 success, 1 validation or data error, 2 usage error.

#include <pollstrat/pollstrat.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace pollstrat;

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

/// Raised for flag combinations CLI11 cannot express on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(std::string const& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto const t = csv::trim(item);
        if (!t.empty()) {
            out.emplace_back(t);
        }
    }
    return out;
}

std::string join_list(std::vector<std::string> const& items)
{
    std::string out;
    for (auto const& s : items) {
        out += (out.empty() ? "" : ",") + s;
    }
    return out;
}

//---------------------------------------------------------------------------//
// Options shared by the subcommands
//---------------------------------------------------------------------------//

struct Options {
    std::string out_dir = ".";
    std::string registry;
    std::string polls;
    std::string attributes;
    std::string reference;
    std::string state_colors;
    std::string state_results;
    std::string season = "2020";
    std::uint64_t min_votes = kDefaultMinVotes;
    std::string regression_dims = join_list(default_regression_dimensions());
    std::string poststrat_dims = join_list(default_poststrat_dimensions());
    std::size_t bootstrap_replicates = 1000;
    std::uint64_t bootstrap_seed = 0;
    std::string thresholds;
    double bot_threshold = kDefaultBotThreshold;
    double org_cutoff = kDefaultOrgCutoff;
    bool include_authors = false;
    std::string model;
    std::string condition;
    std::string ratings;
    std::string scores;
    std::string pairs;
    double fraction = 0.0;
    std::string spec;
};

/// Collects the resolved configuration and input digests for the manifest.
class Manifest {
public:
    explicit Manifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

    void config(std::string const& key, Json value) { config_[key] = std::move(value); }

    void input(std::string const& role, std::string const& path)
    {
        inputs_.push_back({{"role", role}, {"path", path}, {"sha256", file_digest(path)}});
    }

    void output(std::string const& name) { outputs_.push_back(name); }

    Json to_json() const
    {
        return {{"tool", "pollstrat"},
                {"version", kVersion},
                {"subcommand", subcommand_},
                {"config", config_},
                {"inputs", inputs_},
                {"outputs", outputs_}};
    }

private:
    std::string subcommand_;
    Json config_ = Json::object();
    Json inputs_ = Json::array();
    std::vector<std::string> outputs_;
};

class Runner {
public:
    Runner(Options const& o, std::string subcommand) : o_(o), manifest_(std::move(subcommand))
    {
        fs::create_directories(o_.out_dir);
    }

    Options const& opts() const { return o_; }
    Manifest& manifest() { return manifest_; }

    DimensionRegistry registry()
    {
        if (o_.registry.empty()) {
            manifest_.config("registry", "(built-in)");
            return default_registry();
        }
        manifest_.input("registry", o_.registry);
        return load_registry(o_.registry);
    }

    Election season()
    {
        manifest_.config("season", o_.season);
        return parse_election(o_.season);
    }

    StateColorMap colors()
    {
        if (!o_.state_colors.empty() && !o_.state_results.empty()) {
            throw UsageError("--state-colors and --state-results are mutually exclusive");
        }
        if (!o_.state_colors.empty()) {
            manifest_.input("state-colors", o_.state_colors);
            return load_color_map(o_.state_colors);
        }
        if (!o_.state_results.empty()) {
            manifest_.input("state-results", o_.state_results);
            auto const results = load_state_results(o_.state_results);
            return color_map_from_results(results);
        }
        manifest_.config("state-colors", "(swing states only)");
        return swing_only_color_map();
    }

    AggregationOptions aggregation()
    {
        AggregationOptions a;
        a.bot_threshold = o_.bot_threshold;
        a.org_cutoff = o_.org_cutoff;
        a.include_authors = o_.include_authors;
        a.colors = colors();
        manifest_.config("bot-threshold", o_.bot_threshold);
        manifest_.config("org-cutoff", o_.org_cutoff);
        manifest_.config("include-authors", o_.include_authors);
        return a;
    }

    /// Polls plus attributes turned into regression observations. Polls that
    /// cannot be normalized are listed in excluded_polls.csv.
    std::vector<PollObservation> observations(DimensionRegistry const& registry)
    {
        auto const season_value = season();
        manifest_.input("polls", o_.polls);
        manifest_.input("attributes", o_.attributes);
        auto bundle = load_corpus(o_.polls, fs::path(o_.attributes), std::nullopt, season_value);
        auto built = build_observations(bundle.polls, bundle.attributes, registry, aggregation());
        manifest_.config("polls-rejected", bundle.poll_rejections.size());
        manifest_.config("attributes-rejected", bundle.attribute_rejections.size());
        write_rejections("excluded_polls.csv", built.excluded);
        return std::move(built.observations);
    }

    std::vector<std::string> dimension_list(std::string const& flag, std::string const& value)
    {
        auto dims = split_list(value);
        if (dims.empty()) {
            throw UsageError(flag + " needs at least one dimension");
        }
        manifest_.config(flag.substr(2), dims);
        return dims;
    }

    BootstrapConfig bootstrap()
    {
        BootstrapConfig b;
        b.replicates = o_.bootstrap_replicates;
        b.seed = o_.bootstrap_seed;
        b.threads = resolve_threads(threads_from_env(0));
        manifest_.config("bootstrap-replicates", b.replicates);
        manifest_.config("bootstrap-seed", b.seed);
        return b;
    }

    fs::path out(std::string const& name)
    {
        manifest_.output(name);
        return fs::path(o_.out_dir) / name;
    }

    void write_text(std::string const& name, std::string const& content)
    {
        std::ofstream f(out(name), std::ios::binary);
        f << content;
        if (!f) {
            throw Error(ErrorCode::Unreadable, "cannot write " + name);
        }
    }

    void write_json(std::string const& name, Json const& j) { write_text(name, dump_json(j)); }

    void write_rejections(std::string const& name, std::vector<Rejection> const& rejections)
    {
        std::ostringstream s;
        csv::write_row(s, {"row", "line", "id", "reason"});
        for (auto const& r : rejections) {
            csv::write_row(s, {std::to_string(r.row), std::to_string(r.line), r.id, r.reason});
        }
        write_text(name, s.str());
    }

    void finish()
    {
        std::ofstream f(fs::path(o_.out_dir) / "run_manifest.json", std::ios::binary);
        f << dump_json(manifest_.to_json());
    }

private:
    Options const& o_;
    Manifest manifest_;
};

std::string fixed(double v, int digits)
{
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

/// Regression table: coefficient with stars, standard error below, and the
/// observation count and adjusted R^2 at the foot.
std::string render_table(FittedModel const& m, DimensionRegistry const& registry, Election e)
{
    std::ostringstream s;
    auto row = [&](std::string const& label, CoefficientEstimate const& c) {
        s << std::left << std::setw(28) << label << std::right << std::setw(12)
          << fixed(c.estimate, 4) + significance_stars(c.p_value) << "\n";
        s << std::left << std::setw(28) << "" << std::right << std::setw(12) << "(" + fixed(c.std_error, 4) + ")"
          << "\n";
    };
    s << "Outcome: share of " << focal_for(e).trump << " among " << focal_for(e).trump << "/"
      << focal_for(e).dem << " votes, " << to_string(e) << "\n";
    s << std::string(40, '-') << "\n";
    for (auto const& k : registry.predictor_keys(m.dimension_set)) {
        row("p(" + k.str() + ")", m.coefficients.at(k));
    }
    row("(intercept)", m.intercept);
    s << std::string(40, '-') << "\n";
    s << std::left << std::setw(28) << "Observations" << std::right << std::setw(12) << m.n_obs << "\n";
    s << std::left << std::setw(28) << "Adjusted R2" << std::right << std::setw(12) << fixed(m.adj_r2, 3) << "\n";
    s << std::left << std::setw(28) << "Min votes (M)" << std::right << std::setw(12) << m.min_votes << "\n";
    s << "Note: *p<0.05; **p<0.01; ***p<0.001\n";
    return s.str();
}

//---------------------------------------------------------------------------//
// Subcommands
//---------------------------------------------------------------------------//

int run_validate(Options const& o)
{
    Runner r(o, "validate");
    bool ok = true;
    Json report = Json::object();
    auto describe = [&](std::string const& file, auto const& result) {
        Json j{{"rows_read", result.rows_read},
               {"accepted", result.records.size()},
               {"rejected", result.rejections.size()},
               {"rejections", rejections_to_json(result.rejections)}};
        for (auto const& rej : result.rejections) {
            std::cerr << file << ": row " << rej.row << " (line " << rej.line << ", id '" << rej.id
                      << "'): " << rej.reason << "\n";
        }
        ok = ok && result.rejections.empty();
        return j;
    };
    if (o.polls.empty() && o.attributes.empty() && o.reference.empty()) {
        throw UsageError("validate needs at least one of --polls, --attributes, --reference");
    }
    if (!o.polls.empty()) {
        auto const season = r.season();
        r.manifest().input("polls", o.polls);
        report["polls"] = describe(o.polls, load_polls(o.polls, season));
    }
    if (!o.attributes.empty()) {
        r.manifest().input("attributes", o.attributes);
        report["attributes"] = describe(o.attributes, load_attributes(o.attributes));
    }
    if (!o.reference.empty()) {
        r.manifest().input("reference", o.reference);
        try {
            load_reference(o.reference);
            report["reference"] = {{"valid", true}};
        } catch (Error const& e) {
            std::cerr << o.reference << ": " << e.what() << "\n";
            report["reference"] = {{"valid", false}, {"error", e.what()}};
            ok = false;
        }
    }
    report["valid"] = ok;
    r.write_json("validation_report.json", report);
    r.finish();
    std::cout << (ok ? "valid" : "invalid") << "\n";
    return ok ? 0 : kExitData;
}

int run_normalize(Options const& o)
{
    Runner r(o, "normalize");
    auto const season = r.season();
    r.manifest().input("polls", o.polls);
    auto const loaded = load_polls(o.polls, season);
    std::ostringstream s;
    csv::write_row(s, {"poll_id", "share_focal", "votes_trump", "votes_dem", "effective_votes", "total_votes",
                       "trump_first", "option_count"});
    std::vector<Rejection> excluded;
    std::size_t row = 0;
    for (auto const& p : loaded.records) {
        ++row;
        try {
            auto const n = normalize_poll(p, focal_for(p.election));
            csv::write_row(s, {n.poll_id, csv::format_real(n.share_focal), std::to_string(n.votes_trump),
                               std::to_string(n.votes_dem), std::to_string(n.effective_votes),
                               std::to_string(n.total_votes), n.trump_listed_first_among_focal ? "1" : "0",
                               std::to_string(n.option_count)});
        } catch (Error const& e) {
            excluded.push_back({row, 0, p.poll_id, e.what()});
        }
    }
    r.write_text("normalized.csv", s.str());
    r.write_rejections("normalize_excluded.csv", excluded);
    r.write_rejections("poll_rejections.csv", loaded.rejections);
    r.finish();
    std::cout << loaded.records.size() - excluded.size() << " polls normalized, " << excluded.size()
              << " excluded, " << loaded.rejections.size() << " rows rejected\n";
    return 0;
}

int run_fit(Options const& o)
{
    Runner r(o, "fit");
    auto const registry = r.registry();
    auto const dims = r.dimension_list("--regression-dims", o.regression_dims);
    r.manifest().config("min-votes", o.min_votes);
    auto const obs = r.observations(registry);
    auto const model = fit_model(obs, registry, dims, o.min_votes);
    r.write_json("model.json", model_to_json(model));
    auto const table = render_table(model, registry, parse_election(o.season));
    r.write_text("model_table.txt", table);
    r.finish();
    std::cout << table;
    return 0;
}

int run_poststratify(Options const& o)
{
    Runner r(o, "poststratify");
    auto const registry = r.registry();
    EstimateConfig cfg;
    cfg.dimension_set = r.dimension_list("--poststrat-dims", o.poststrat_dims);
    cfg.min_votes = o.min_votes;
    cfg.bootstrap = r.bootstrap();
    r.manifest().config("min-votes", o.min_votes);
    r.manifest().input("reference", o.reference);
    auto const ref = load_reference(o.reference);
    auto const obs = r.observations(registry);
    auto const report = estimate(obs, registry, ref, cfg);
    r.write_json("estimate_report.json", report_to_json(report));
    r.write_json("model.json", model_to_json(fit_model(obs, registry, cfg.dimension_set, o.min_votes)));
    r.finish();
    std::cout << "estimate " << csv::format_real(report.overall.point) << " [" << csv::format_real(report.overall.ci_low)
              << ", " << csv::format_real(report.overall.ci_high) << "] from " << report.n_polls_used << " polls\n";
    for (auto const& label : report.out_of_range) {
        std::cerr << "warning: estimate for " << label << " lies outside [0, 1]\n";
    }
    return 0;
}

int run_conditional(Options const& o)
{
    Runner r(o, "conditional");
    auto const registry = r.registry();
    r.manifest().input("model", o.model);
    r.manifest().input("reference", o.reference);
    auto const model = load_model(o.model, registry);
    auto const ref = load_reference(o.reference);

    std::vector<StratumKey> conditions;
    if (!o.condition.empty()) {
        auto const key = parse_stratum_key(o.condition);
        if (!registry.contains(key)) {
            throw Error(ErrorCode::InvalidArgument, "condition " + key.str() + " is not a registry stratum");
        }
        conditions.push_back(key);
        r.manifest().config("condition", key.str());
    } else {
        for (auto const& d : model.dimension_set) {
            for (auto const& s : registry.at(d).strata) {
                conditions.push_back({d, s});
            }
        }
    }
    std::ostringstream s;
    csv::write_row(s, {"dimension", "stratum", "estimate", "truth", "abs_error"});
    for (auto const& c : conditions) {
        double const est = poststratify_conditional(model, ref, c);
        auto it = ref.stratum_outcomes.find(c);
        std::string truth, err;
        if (it != ref.stratum_outcomes.end()) {
            truth = csv::format_real(it->second);
            err = csv::format_real(std::abs(it->second - est));
        }
        csv::write_row(s, {c.dimension, c.stratum, csv::format_real(est), truth, err});
    }
    Json overall{{"estimate", poststratify(model, ref)}};
    if (ref.overall_outcome) {
        overall["truth"] = *ref.overall_outcome;
    }
    r.write_text("conditional.csv", s.str());
    r.write_json("overall.json", overall);
    r.finish();
    std::cout << s.str();
    return 0;
}

int run_sweep(Options const& o)
{
    Runner r(o, "sweep");
    auto const registry = r.registry();
    std::vector<std::uint64_t> grid;
    if (o.thresholds.empty()) {
        grid = default_threshold_grid();
    } else {
        for (auto const& t : split_list(o.thresholds)) {
            auto v = csv::parse_count(t);
            if (!v) {
                throw UsageError("--thresholds: '" + t + "' is not a non-negative integer");
            }
            grid.push_back(*v);
        }
    }
    r.manifest().config("thresholds", grid);
    EstimateConfig cfg;
    cfg.dimension_set = r.dimension_list("--poststrat-dims", o.poststrat_dims);
    cfg.bootstrap = r.bootstrap();
    r.manifest().input("reference", o.reference);
    auto const ref = load_reference(o.reference);
    auto const obs = r.observations(registry);
    auto const rows = threshold_sweep(obs, registry, ref, grid, cfg);

    std::ostringstream s;
    write_sweep_csv(s, rows);
    Json reports = Json::array();
    for (auto const& row : rows) {
        Json j{{"M", row.min_votes}, {"n_polls", row.n_polls}};
        if (row.report) {
            j["report"] = report_to_json(*row.report);
        } else {
            j["error"] = row.error;
        }
        reports.push_back(j);
    }
    r.write_text("sweep.csv", s.str());
    r.write_json("sweep_reports.json", reports);
    r.finish();
    std::cout << s.str();
    return 0;
}

/// CSV with a header row; returns the named column (blank cells skipped).
std::vector<double> read_real_column(std::string const& path, std::vector<std::string> const& names)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Unreadable, "cannot open '" + path + "'");
    }
    csv::Reader reader(in);
    csv::Record rec;
    if (!reader.next(rec)) {
        throw Error(ErrorCode::SchemaMismatch, path + ": missing header");
    }
    std::size_t col = rec.fields.size();
    for (auto const& n : names) {
        auto it = std::find(rec.fields.begin(), rec.fields.end(), n);
        if (it != rec.fields.end()) {
            col = static_cast<std::size_t>(it - rec.fields.begin());
            break;
        }
    }
    if (col == rec.fields.size()) {
        throw Error(ErrorCode::SchemaMismatch, path + ": no column named " + join_list(names));
    }
    std::vector<double> out;
    while (reader.next(rec)) {
        if (col >= rec.fields.size() || csv::trim(rec.fields[col]).empty()) {
            continue;
        }
        auto v = csv::parse_real(rec.fields[col]);
        if (!v) {
            throw Error(ErrorCode::SchemaMismatch,
                        path + " line " + std::to_string(rec.line) + ": '" + rec.fields[col] + "' is not a number");
        }
        out.push_back(*v);
    }
    return out;
}

int run_correlate(Options const& o)
{
    Runner r(o, "correlate");
    if (o.polls.empty() == o.pairs.empty()) {
        throw UsageError("correlate needs exactly one of --polls or --pairs");
    }
    if (!o.pairs.empty()) {
        r.manifest().input("pairs", o.pairs);
        auto const xs = read_real_column(o.pairs, {"x"});
        auto const ys = read_real_column(o.pairs, {"y"});
        auto const c = pearson(xs, ys);
        r.write_json("correlation.json", {{"r", c.r}, {"p", c.p}, {"n", c.n}});
        r.finish();
        std::cout << "r = " << csv::format_real(c.r) << ", p = " << csv::format_real(c.p) << ", n = " << c.n << "\n";
        return 0;
    }
    auto const season = r.season();
    r.manifest().input("polls", o.polls);
    auto const loaded = load_polls(o.polls, season);
    auto const shares = position_share_pairs(loaded.records);
    std::ostringstream s;
    csv::write_row(s, {"option_count", "n_pairs", "r", "p", "status"});
    for (auto const& [count, pairs] : shares.groups) {
        std::vector<std::pair<double, double>> real_pairs;
        for (auto const& [pos, share] : pairs) {
            real_pairs.emplace_back(static_cast<double>(pos), share);
        }
        try {
            auto const c = pearson(real_pairs);
            csv::write_row(s, {std::to_string(count), std::to_string(c.n), csv::format_real(c.r),
                               csv::format_real(c.p), "ok"});
        } catch (Error const& e) {
            csv::write_row(s, {std::to_string(count), std::to_string(pairs.size()), "", "",
                               std::string(to_string(e.code()))});
        }
    }
    r.manifest().config("skipped-zero-vote-polls", shares.skipped_zero_vote);
    r.write_text("position_correlation.csv", s.str());
    r.finish();
    std::cout << s.str();
    return 0;
}

int run_kappa(Options const& o)
{
    Runner r(o, "kappa");
    r.manifest().input("ratings", o.ratings);
    std::ifstream in(o.ratings, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Unreadable, "cannot open '" + o.ratings + "'");
    }
    csv::Reader reader(in);
    csv::Record rec;
    if (!reader.next(rec) || rec.fields.size() < 3) {
        throw Error(ErrorCode::SchemaMismatch, o.ratings + ": header must be item,rater_1,rater_2[,...]");
    }
    auto const raters = rec.fields.size() - 1;
    std::vector<std::vector<std::optional<std::string>>> table;
    while (reader.next(rec)) {
        if (rec.fields.size() == 1 && csv::trim(rec.fields[0]).empty()) {
            continue;
        }
        std::vector<std::optional<std::string>> row;
        for (std::size_t j = 1; j < rec.fields.size(); ++j) {
            auto const label = csv::trim(rec.fields[j]);
            row.push_back(label.empty() ? std::nullopt : std::optional<std::string>(label));
        }
        table.push_back(std::move(row));
    }
    Json out{{"items", table.size()}, {"raters", raters}, {"fleiss_kappa", fleiss_kappa(table)}};
    if (raters == 2) {
        std::vector<std::string> a, b;
        for (auto const& row : table) {
            a.push_back(*row[0]);
            b.push_back(*row[1]);
        }
        out["cohens_kappa"] = cohens_kappa(a, b);
    }
    r.write_json("kappa.json", out);
    r.finish();
    std::cout << out.dump() << "\n";
    return 0;
}

int run_calibrate_bot(Options const& o)
{
    Runner r(o, "calibrate-bot");
    r.manifest().input("scores", o.scores);
    r.manifest().config("fraction", o.fraction);
    auto const scores = read_real_column(o.scores, {"bot_score", "score"});
    double const t = calibrate_bot_threshold(scores, o.fraction);
    auto const flagged = std::count_if(scores.begin(), scores.end(), [t](double s) { return s >= t; });
    Json out{{"threshold", t}, {"flagged", flagged}, {"n", scores.size()}, {"target_fraction", o.fraction}};
    r.write_json("bot_calibration.json", out);
    r.finish();
    std::cout << "threshold " << csv::format_real(t) << " flags " << flagged << " of " << scores.size() << "\n";
    return 0;
}

int run_synth(Options const& o)
{
    Runner r(o, "synth");
    auto const registry = r.registry();
    r.manifest().input("spec", o.spec);
    auto const spec = spec_from_json(load_json(o.spec), registry);
    auto const corpus = generate(spec, registry);

    std::ostringstream polls, attrs;
    write_polls(polls, corpus.polls);
    write_attributes(attrs, corpus.attributes);
    r.write_text("polls.csv", polls.str());
    r.write_text("attributes.csv", attrs.str());
    r.write_json("reference.json", reference_to_json(corpus.reference));
    r.write_json("state_colors.json", color_map_to_json(corpus.colors));
    Json truth{{"intercept", spec.true_intercept},
               {"coefficients", detail::stratum_table(spec.true_coefficients)},
               {"overall", corpus.truth.overall},
               {"strata", detail::stratum_table(corpus.truth.per_stratum)}};
    r.write_json("truth.json", truth);
    r.finish();
    std::cout << corpus.polls.size() << " polls, " << corpus.attributes.size() << " attribute rows, truth "
              << csv::format_real(corpus.truth.overall) << "\n";
    return 0;
}

//---------------------------------------------------------------------------//
// Argument handling
//---------------------------------------------------------------------------//

/// Expands --config FILE into flags placed before the command line's own,
/// so that explicit flags (taking the last value) win.
std::vector<std::string> expand_config(std::vector<std::string> args)
{
    std::optional<std::string> path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (!path) {
        return rest;
    }
    auto const j = load_json(*path);
    if (!j.is_object()) {
        throw UsageError("--config: '" + *path + "' must hold a JSON object");
    }
    std::vector<std::string> flags;
    for (auto const& [key, value] : j.items()) {
        std::string text;
        if (value.is_string()) {
            text = value.get<std::string>();
        } else if (value.is_array()) {
            std::vector<std::string> parts;
            for (auto const& v : value) {
                parts.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            }
            text = join_list(parts);
        } else if (value.is_boolean()) {
            if (value.get<bool>()) {
                flags.push_back("--" + key);
            }
            continue;
        } else {
            text = value.dump();
        }
        flags.push_back("--" + key);
        flags.push_back(text);
    }
    // Subcommand name first, then config flags, then explicit flags.
    std::vector<std::string> out;
    if (!rest.empty() && rest.front().rfind("-", 0) != 0) {
        out.push_back(rest.front());
        rest.erase(rest.begin());
    }
    out.insert(out.end(), flags.begin(), flags.end());
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    Options o;
    CLI::App app{"pollstrat: debias social-media election polls by regression and poststratification"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.add_option("--config", "JSON file of flag values (keys are flag names without dashes); flags win");

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--registry", o.registry, "Dimension registry JSON (default: built-in)");
        sub->add_option("--season", o.season, "Election season: 2016 or 2020")->capture_default_str();
    };
    auto corpus = [&](CLI::App* sub) {
        sub->add_option("--polls", o.polls, "Poll CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--attributes", o.attributes, "User attribute CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--state-colors", o.state_colors, "JSON map state -> blue|red|swing")
            ->check(CLI::ExistingFile);
        sub->add_option("--state-results", o.state_results, "CSV state,dem_votes,rep_votes to derive colors")
            ->check(CLI::ExistingFile);
        sub->add_option("--bot-threshold", o.bot_threshold, "Bot classification threshold")->capture_default_str();
        sub->add_option("--org-cutoff", o.org_cutoff, "Organization score cutoff (strict)")->capture_default_str();
        sub->add_flag("--include-authors", o.include_authors, "Count poll authors as proxy voters");
        sub->add_option("--min-votes", o.min_votes, "Minimum focal votes per poll (M)")->capture_default_str();
    };
    auto boot = [&](CLI::App* sub) {
        sub->add_option("--bootstrap-replicates", o.bootstrap_replicates, "Bootstrap replicates")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        sub->add_option("--bootstrap-seed", o.bootstrap_seed, "Bootstrap seed")->capture_default_str();
        sub->add_option("--poststrat-dims", o.poststrat_dims, "Comma-separated poststratification dimensions")
            ->capture_default_str();
    };

    auto* validate = app.add_subcommand("validate", "Check input files and report rejected rows");
    common(validate);
    validate->add_option("--polls", o.polls, "Poll CSV")->check(CLI::ExistingFile);
    validate->add_option("--attributes", o.attributes, "User attribute CSV")->check(CLI::ExistingFile);
    validate->add_option("--reference", o.reference, "Reference distribution JSON")->check(CLI::ExistingFile);

    auto* normalize = app.add_subcommand("normalize", "Focal-candidate vote shares per poll");
    common(normalize);
    normalize->add_option("--polls", o.polls, "Poll CSV")->required()->check(CLI::ExistingFile);

    auto* fit = app.add_subcommand("fit", "Fit the regression and write the coefficient table");
    common(fit);
    corpus(fit);
    fit->add_option("--regression-dims", o.regression_dims, "Comma-separated regression dimensions")
        ->capture_default_str();

    auto* post = app.add_subcommand("poststratify", "Poststratified estimate with bootstrap intervals");
    common(post);
    corpus(post);
    boot(post);
    post->add_option("--reference", o.reference, "Reference distribution JSON")
        ->required()
        ->check(CLI::ExistingFile);

    auto* cond = app.add_subcommand("conditional", "Per-stratum estimates from a saved model");
    common(cond);
    cond->add_option("--model", o.model, "Model JSON written by fit or poststratify")
        ->required()
        ->check(CLI::ExistingFile);
    cond->add_option("--reference", o.reference, "Reference distribution JSON")
        ->required()
        ->check(CLI::ExistingFile);
    cond->add_option("--condition", o.condition, "dimension:stratum (default: every stratum)");

    auto* sweep = app.add_subcommand("sweep", "Re-estimate across vote thresholds");
    common(sweep);
    corpus(sweep);
    boot(sweep);
    sweep->add_option("--reference", o.reference, "Reference distribution JSON")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--thresholds", o.thresholds, "Comma-separated M values (default 0,10,...,1000)");

    auto* correlate = app.add_subcommand("correlate", "Pearson correlation (option position vs share, or x,y pairs)");
    common(correlate);
    correlate->add_option("--polls", o.polls, "Poll CSV")->check(CLI::ExistingFile);
    correlate->add_option("--pairs", o.pairs, "CSV with columns x,y")->check(CLI::ExistingFile);

    auto* kappa = app.add_subcommand("kappa", "Inter-rater agreement");
    common(kappa);
    kappa->add_option("--ratings", o.ratings, "CSV item,rater_1,rater_2[,...]")->required()->check(CLI::ExistingFile);

    auto* calibrate = app.add_subcommand("calibrate-bot", "Bot-score threshold matching an annotated bot fraction");
    common(calibrate);
    calibrate->add_option("--scores", o.scores, "CSV with a bot_score (or score) column")
        ->required()
        ->check(CLI::ExistingFile);
    calibrate->add_option("--fraction", o.fraction, "Annotated bot fraction")
        ->required()
        ->check(CLI::Range(0.0, 1.0));

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with known ground truth");
    common(synth);
    synth->add_option("--spec", o.spec, "Generator spec JSON")->required()->check(CLI::ExistingFile);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (CLI::ParseError const& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    } catch (UsageError const& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (Error const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }

    try {
        auto* chosen = app.get_subcommands().front();
        auto const name = chosen->get_name();
        if (name == "validate") return run_validate(o);
        if (name == "normalize") return run_normalize(o);
        if (name == "fit") return run_fit(o);
        if (name == "poststratify") return run_poststratify(o);
        if (name == "conditional") return run_conditional(o);
        if (name == "sweep") return run_sweep(o);
        if (name == "correlate") return run_correlate(o);
        if (name == "kappa") return run_kappa(o);
        if (name == "calibrate-bot") return run_calibrate_bot(o);
        if (name == "synth") return run_synth(o);
    } catch (UsageError const& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (Error const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
