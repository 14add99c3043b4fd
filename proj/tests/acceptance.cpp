// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances are fixed below.

#include "oracles.hpp"

#include <pollstrat/pollstrat.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace pollstrat;
namespace fs = std::filesystem;

namespace {

constexpr double kRecoveryTol = 1e-6;
constexpr double kRecoverySeconds = 10.0;
constexpr double kNoisyErrorMax = 0.02;
constexpr double kCoverageLow = 0.90;
constexpr double kCoverageHigh = 0.99;
constexpr std::size_t kNoisyRuns = 200;
constexpr std::size_t kNoisyReplicates = 1000;
constexpr double kConditionalTol = 1e-12;
constexpr double kMixtureTol = 1e-10;
constexpr std::size_t kIdentityReferences = 100;
constexpr std::size_t kSweepPolls = 800;
constexpr std::size_t kSweepCorpora = 20;
constexpr std::size_t kSweepSmallN = 100;
constexpr double kSweepGrowth = 1.5;
constexpr double kOlsTol = 1e-10;
constexpr double kPearsonTol = 1e-12;
constexpr double kWidthTol = 0.20;
constexpr std::size_t kNormalizePolls = 10000;

int failures = 0;

void report(int id, std::string const& name, bool pass, std::string const& detail)
{
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << detail << std::endl;
    failures += pass ? 0 : 1;
}

/// Runs a check, turning an unexpected exception into a failure line.
void criterion(int id, std::string const& name, std::function<std::pair<bool, std::string>()> const& body)
{
    try {
        auto const [pass, detail] = body();
        report(id, name, pass, detail);
    } catch (std::exception const& e) {
        report(id, name, false, std::string("exception: ") + e.what());
    }
}

std::string num(double v)
{
    std::ostringstream s;
    s << v;
    return s.str();
}

SyntheticSpec recovery_spec(std::uint64_t seed, std::size_t n_polls)
{
    auto const reg = default_registry();
    SyntheticSpec spec;
    spec.seed = seed;
    spec.n_polls = n_polls;
    spec.population = random_consistent_reference(reg, spec.dimensions, seed);
    spec.true_intercept = 0.42;
    spec.true_coefficients = {{{"ideology", "rep"}, 0.38},   {{"ideology", "dem"}, -0.15},
                              {{"gender", "male"}, 0.03},    {{"age", "30to39"}, -0.02},
                              {{"age", "40plus"}, 0.05},     {{"location", "red_state"}, 0.07},
                              {{"location", "blue_state"}, -0.04}};
    return spec;
}

std::vector<PollObservation> observations_for(SyntheticCorpus const& corpus, DimensionRegistry const& reg)
{
    AggregationOptions opts;
    opts.colors = corpus.colors;
    return build_observations(corpus.polls, corpus.attributes, reg, opts).observations;
}

//---------------------------------------------------------------------------//

std::pair<bool, std::string> zero_noise_recovery()
{
    auto const start = std::chrono::steady_clock::now();
    auto const reg = default_registry();
    auto spec = recovery_spec(101, 500);
    spec.votes_min = 100000000;
    spec.votes_max = 1000000000;
    auto const corpus = generate(spec, reg);
    auto const obs = observations_for(corpus, reg);
    auto const model = fit_model(obs, reg, spec.dimensions, 0);
    double const est = poststratify(model, corpus.reference);
    double const seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    double worst = std::abs(model.intercept.estimate - spec.true_intercept);
    for (auto const& k : reg.predictor_keys(spec.dimensions)) {
        auto it = spec.true_coefficients.find(k);
        worst = std::max(worst, std::abs(model.coefficient(k) - (it == spec.true_coefficients.end() ? 0.0 : it->second)));
    }
    double const est_err = std::abs(est - corpus.truth.overall);
    bool const pass = spec.dimensions.size() == 4 && worst <= kRecoveryTol && est_err <= kRecoveryTol &&
                      seconds < kRecoverySeconds;
    return {pass, "max coef err " + num(worst) + ", estimate err " + num(est_err) + ", " + num(seconds) + " s"};
}

std::pair<bool, std::string> noisy_recovery()
{
    auto const reg = default_registry();
    double worst = 0.0;
    std::size_t covered = 0;
    for (std::size_t run = 0; run < kNoisyRuns; ++run) {
        auto spec = recovery_spec(5000 + run, 500);
        spec.noise_sd = 0.05;
        for (auto const& d : spec.dimensions) {
            spec.missingness[d] = 0.2;
        }
        auto const corpus = generate(spec, reg);
        auto const obs = observations_for(corpus, reg);
        EstimateConfig cfg;
        cfg.dimension_set = spec.dimensions;
        cfg.min_votes = 0;
        cfg.per_stratum = false;
        cfg.bootstrap.replicates = kNoisyReplicates;
        cfg.bootstrap.seed = run;
        auto const r = estimate(obs, reg, corpus.reference, cfg);
        worst = std::max(worst, std::abs(r.overall.point - corpus.truth.overall));
        covered += r.overall.ci_low <= corpus.truth.overall && corpus.truth.overall <= r.overall.ci_high ? 1 : 0;
    }
    double const coverage = static_cast<double>(covered) / static_cast<double>(kNoisyRuns);
    bool const pass = worst <= kNoisyErrorMax && coverage >= kCoverageLow && coverage <= kCoverageHigh;
    return {pass, "max |err| " + num(worst) + " over " + std::to_string(kNoisyRuns) + " runs, 95% CI coverage " +
                      num(coverage)};
}

std::pair<bool, std::string> poststrat_identities()
{
    auto const reg = default_registry();
    auto const dims = default_poststrat_dimensions();
    double worst_conditional = 0.0;
    double worst_mixture = 0.0;
    for (std::uint64_t seed = 1; seed <= kIdentityReferences; ++seed) {
        auto const ref = random_consistent_reference(reg, dims, 900 + seed);
        Rng rng(seed);
        FittedModel m;
        m.dimension_set = dims;
        m.intercept.estimate = rng.uniform();
        for (auto const& k : reg.predictor_keys(dims)) {
            m.coefficients[k].estimate = rng.uniform(-0.5, 0.5);
        }
        double const overall = poststratify(m, ref);
        for (auto const& d : dims) {
            double mix = 0.0;
            for (auto const& s : reg.at(d).strata) {
                StratumKey const pinned{d, s};
                double const conditional = poststratify_conditional(m, ref, pinned);
                mix += ref.marginals.at(pinned) * conditional;

                // Overall estimate with dimension d's coefficients zeroed and
                // the other marginals replaced by conditionals on the pinned
                // stratum, plus the pinned stratum's own coefficient.
                std::map<StratumKey, double> coefs;
                std::map<StratumKey, double> marginals;
                for (auto const& [k, e] : m.coefficients) {
                    if (k.dimension != d) {
                        coefs[k] = e.estimate;
                        marginals[k] = ref.conditionals.at({pinned, k});
                    }
                }
                auto const own = m.coefficients.find(pinned);
                double const zeroed = oracle::poststrat_sum(m.intercept.estimate, coefs, marginals) +
                                      (own == m.coefficients.end() ? 0.0 : own->second.estimate);
                worst_conditional = std::max(worst_conditional, std::abs(conditional - zeroed));
            }
            worst_mixture = std::max(worst_mixture, std::abs(mix - overall));
        }
    }
    bool const pass = worst_conditional <= kConditionalTol && worst_mixture <= kMixtureTol;
    return {pass, "conditional vs zeroed-dimension max diff " + num(worst_conditional) +
                      ", mixture vs overall max diff " + num(worst_mixture) + " over " +
                      std::to_string(kIdentityReferences) + " references"};
}

std::pair<bool, std::string> sweep_shape()
{
    auto const reg = default_registry();
    std::vector<std::uint64_t> grid;
    for (std::uint64_t m = 0; m <= 1000; m += 100) {
        grid.push_back(m);
    }
    for (std::uint64_t m = 1500; m <= 4500; m += 500) {
        grid.push_back(m);
    }
    double large_sum = 0.0, small_sum = 0.0, large_worst = 0.0;
    std::size_t large_count = 0, small_count = 0;
    bool monotone = true;
    for (std::size_t c = 0; c < kSweepCorpora; ++c) {
        auto spec = recovery_spec(7000 + c, kSweepPolls);
        spec.noise_sd = 0.05;
        for (auto const& d : spec.dimensions) {
            spec.missingness[d] = 0.2;
        }
        auto const corpus = generate(spec, reg);
        auto const obs = observations_for(corpus, reg);
        EstimateConfig cfg;
        cfg.dimension_set = spec.dimensions;
        cfg.per_stratum = false;
        cfg.bootstrap.replicates = 50;
        cfg.bootstrap.seed = c;
        auto const rows = threshold_sweep(obs, reg, corpus.reference, grid, cfg);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && rows[i].n_polls > rows[i - 1].n_polls) {
                monotone = false;
            }
            if (!rows[i].ok()) {
                continue;
            }
            double const err = *rows[i].report->abs_error;
            if (rows[i].n_polls >= kSweepSmallN) {
                large_sum += err;
                large_worst = std::max(large_worst, err);
                ++large_count;
            } else {
                small_sum += err;
                ++small_count;
            }
        }
    }
    if (large_count == 0 || small_count == 0) {
        return {false, "grid never produced both n >= 100 and n < 100 estimates"};
    }
    double const large_mean = large_sum / static_cast<double>(large_count);
    double const small_mean = small_sum / static_cast<double>(small_count);
    bool const pass = monotone && large_worst <= kNoisyErrorMax && small_mean > kSweepGrowth * large_mean;
    return {pass, std::string(monotone ? "n_polls non-increasing" : "n_polls NOT monotone") +
                      "; mean |err| with n >= 100: " + num(large_mean) + " (max " + num(large_worst) +
                      "), with n < 100: " + num(small_mean) + " (" + std::to_string(small_count) + " rows)"};
}

std::pair<bool, std::string> kernel_oracles()
{
    std::vector<std::string> notes;
    bool pass = true;

    double ols_worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        auto const n = 30 + rng.index(200);
        auto const p = 2 + rng.index(6);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        oracle::Matrix rows;
        std::vector<double> ys;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row{1.0};
            for (std::size_t j = 1; j < p; ++j) {
                row.push_back(rng.uniform());
            }
            double yi = 0.1 * rng.normal();
            for (std::size_t j = 0; j < p; ++j) {
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
                yi += (0.5 - static_cast<double>(j) * 0.1) * row[j];
            }
            y[static_cast<Eigen::Index>(i)] = yi;
            rows.push_back(row);
            ys.push_back(yi);
        }
        auto const s = ols_solve(x, y);
        auto const beta = oracle::normal_equations(rows, ys);
        auto const se = oracle::normal_equation_std_errors(rows, ys);
        for (std::size_t j = 0; j < p; ++j) {
            ols_worst = std::max(ols_worst, std::abs(s.beta[static_cast<Eigen::Index>(j)] - beta[j]));
            ols_worst = std::max(ols_worst, std::abs(s.std_error[static_cast<Eigen::Index>(j)] - se[j]));
        }
    }
    pass = pass && ols_worst <= kOlsTol;
    notes.push_back("OLS max diff " + num(ols_worst));

    double pearson_worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(100 + seed);
        std::vector<std::pair<double, double>> pairs;
        for (int i = 0; i < 500; ++i) {
            double const x = rng.uniform();
            pairs.emplace_back(x, 0.3 * x + rng.uniform());
        }
        pearson_worst = std::max(pearson_worst, std::abs(pearson(pairs).r - oracle::pearson_r(pairs)));
    }
    pass = pass && pearson_worst <= kPearsonTol;
    notes.push_back("Pearson max diff " + num(pearson_worst));

    using V = std::vector<std::string>;
    double const cohen = cohens_kappa(V{"Y", "Y", "Y", "N"}, V{"Y", "Y", "N", "N"});
    pass = pass && std::abs(cohen - 0.5) <= 1e-15;
    notes.push_back("Cohen " + num(cohen));

    std::vector<std::vector<std::optional<std::string>>> unanimous;
    for (auto const& label : {"a", "b", "a", "c", "b"}) {
        unanimous.push_back({label, label, label});
    }
    double const fleiss = fleiss_kappa(unanimous);
    pass = pass && fleiss == 1.0;
    notes.push_back("Fleiss " + num(fleiss));

    Rng rng(2000);
    std::vector<double> data(1000);
    for (auto& v : data) {
        v = rng.normal();
    }
    auto const s = bootstrap(
        [&](std::span<std::size_t const> idx) {
            double sum = 0.0;
            for (auto i : idx) {
                sum += data[i];
            }
            return sum / static_cast<double>(idx.size());
        },
        data.size(), {2000, 3});
    double mean = 0.0, var = 0.0;
    for (double v : data) {
        mean += v;
    }
    mean /= 1000.0;
    for (double v : data) {
        var += (v - mean) * (v - mean);
    }
    double const analytic = 2.0 * 1.959963984540054 * std::sqrt(var / 999.0 / 1000.0);
    double const ratio = (s.ci_high - s.ci_low) / analytic;
    pass = pass && std::abs(ratio - 1.0) <= kWidthTol;
    notes.push_back("bootstrap/normal CI width " + num(ratio));

    std::string detail;
    for (auto const& n : notes) {
        detail += (detail.empty() ? "" : ", ") + n;
    }
    return {pass, detail};
}

std::pair<bool, std::string> normalization_properties()
{
    Rng rng(61);
    FocalPair const focal = focal_for(Election::Y2020);
    auto make = [](std::vector<PollOption> const& opts) {
        PollRecord p;
        p.poll_id = "p";
        p.options = opts;
        return p;
    };
    std::size_t scale_bad = 0, drop_bad = 0, complement_bad = 0, dropped = 0, two_option = 0;
    for (std::size_t i = 0; i < kNormalizePolls; ++i) {
        std::vector<PollOption> opts{{"Donald Trump", rng.index(100000)}, {"Joe Biden", 1 + rng.index(100000)}};
        auto const extras = rng.index(3);
        for (std::uint64_t e = 0; e < extras; ++e) {
            opts.insert(opts.begin() + static_cast<std::ptrdiff_t>(rng.index(opts.size() + 1)),
                        PollOption{"Other " + std::to_string(e), rng.index(50000)});
        }
        auto const base = normalize_poll(make(opts), focal);

        auto scaled = opts;
        auto const k = 1 + rng.index(100000);
        for (auto& o : scaled) {
            o.votes *= k;
        }
        scale_bad += normalize_poll(make(scaled), focal).share_focal == base.share_focal ? 0 : 1;

        auto fewer = opts;
        auto const it = std::find_if(fewer.begin(), fewer.end(),
                                     [](PollOption const& o) { return o.label.rfind("Other", 0) == 0; });
        if (it != fewer.end()) {
            fewer.erase(it);
            ++dropped;
            drop_bad += normalize_poll(make(fewer), focal).share_focal == base.share_focal ? 0 : 1;
        }
        if (opts.size() == 2) {
            ++two_option;
            complement_bad += base.share_focal + base.share_dem() == 1.0 ? 0 : 1;
        }
    }
    bool const pass = scale_bad == 0 && drop_bad == 0 && complement_bad == 0 && dropped > 0 && two_option > 0;
    return {pass, std::to_string(kNormalizePolls) + " polls: scale mismatches " + std::to_string(scale_bad) +
                      ", drop mismatches " + std::to_string(drop_bad) + "/" + std::to_string(dropped) +
                      ", complement mismatches " + std::to_string(complement_bad) + "/" + std::to_string(two_option)};
}

std::pair<bool, std::string> calibration()
{
    std::vector<double> grid;
    for (int i = 0; i < 100; ++i) {
        grid.push_back(i / 100.0);
    }
    double const t = calibrate_bot_threshold(grid, 0.10);
    auto const flagged = std::count_if(grid.begin(), grid.end(), [t](double s) { return s >= t; });
    auto const bins = bin_ideology(-3.0) + "/" + bin_ideology(0.0) + "/" + bin_ideology(3.0);
    bool const pass = t == 0.90 && flagged == 10 && bins == "dem/moderate/rep";
    return {pass, "threshold " + num(t) + " flags " + std::to_string(flagged) + "; ideology bins " + bins};
}

//---------------------------------------------------------------------------//
// Determinism through the command-line tool
//---------------------------------------------------------------------------//

#ifdef POLLSTRAT_CLI_PATH

std::string slurp(fs::path const& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void write(fs::path const& p, std::string const& content)
{
    std::ofstream f(p, std::ios::binary);
    f << content;
}

int run_cli(std::string const& args, std::string const& threads, fs::path const& log)
{
    std::string const cmd = "POLLSTRAT_THREADS=" + threads + " " + std::string(POLLSTRAT_CLI_PATH) + " " + args +
                            " >" + log.string() + " 2>&1";
    int const status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Files in `a` and `b` match byte for byte and neither directory is empty.
bool same_tree(fs::path const& a, fs::path const& b, std::string& why)
{
    std::set<std::string> names_a, names_b;
    for (auto const& e : fs::directory_iterator(a)) {
        names_a.insert(e.path().filename().string());
    }
    for (auto const& e : fs::directory_iterator(b)) {
        names_b.insert(e.path().filename().string());
    }
    if (names_a.empty() || names_a != names_b) {
        why = a.filename().string() + ": file lists differ";
        return false;
    }
    for (auto const& n : names_a) {
        if (slurp(a / n) != slurp(b / n)) {
            why = a.filename().string() + "/" + n + " differs";
            return false;
        }
    }
    return true;
}

std::pair<bool, std::string> determinism()
{
    auto const root = fs::temp_directory_path() / "pollstrat_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    write(root / "spec.json", R"({"seed": 21, "n_polls": 300, "noise_sd": 0.04, "extra_option_rate": 0.3,
        "true_intercept": 0.45, "true_coefficients": {"ideology": {"rep": 0.3, "dem": -0.2},
        "location": {"red_state": 0.06}},
        "missingness": {"age": 0.2}})");
    write(root / "ratings.csv", "item,r1,r2,r3\n1,y,y,y\n2,y,n,y\n3,n,n,n\n4,n,y,n\n5,y,y,n\n");
    write(root / "pairs.csv", "x,y\n1,2.5\n2,2.9\n3,4.1\n4,3.8\n5,5.5\n");
    std::string scores = "score\n";
    for (int i = 0; i < 100; ++i) {
        scores += std::to_string(i / 100.0) + "\n";
    }
    write(root / "scores.csv", scores);

    auto const corpus = root / "corpus";
    if (run_cli("synth --spec " + (root / "spec.json").string() + " --out-dir " + corpus.string(), "1",
                root / "synth.log") != 0) {
        return {false, "synth failed: " + slurp(root / "synth.log")};
    }
    auto const c = [&](std::string const& f) { return (corpus / f).string(); };
    std::string const data = " --polls " + c("polls.csv") + " --attributes " + c("attributes.csv") +
                             " --state-colors " + c("state_colors.json");
    std::string const boot = " --bootstrap-replicates 200 --bootstrap-seed 9 --poststrat-dims "
                             "ideology,gender,age,location --reference " + c("reference.json");

    std::vector<std::pair<std::string, std::string>> commands{
        {"synth", "synth --spec " + (root / "spec.json").string()},
        {"validate", "validate --polls " + c("polls.csv") + " --attributes " + c("attributes.csv") +
                         " --reference " + c("reference.json")},
        {"normalize", "normalize --polls " + c("polls.csv")},
        {"fit", "fit --min-votes 20" + data},
        {"poststratify", "poststratify --min-votes 20" + data + boot},
        {"sweep", "sweep --thresholds 0,50,200,800,5000" + data + boot},
        {"correlate", "correlate --polls " + c("polls.csv")},
        {"correlate-pairs", "correlate --pairs " + (root / "pairs.csv").string()},
        {"kappa", "kappa --ratings " + (root / "ratings.csv").string()},
        {"calibrate-bot", "calibrate-bot --fraction 0.1 --scores " + (root / "scores.csv").string()},
    };

    std::string why;
    for (auto const& [name, args] : commands) {
        for (auto const& run : {"a", "b"}) {
            auto const out = root / (name + "_" + run);
            if (run_cli(args + " --out-dir " + out.string(), "1", root / (name + ".log")) != 0) {
                return {false, name + " failed: " + slurp(root / (name + ".log"))};
            }
        }
        if (!same_tree(root / (name + "_a"), root / (name + "_b"), why)) {
            return {false, why};
        }
    }
    // conditional reads the model written by poststratify.
    for (auto const& run : {"a", "b"}) {
        auto const args = "conditional --model " + (root / "poststratify_a" / "model.json").string() +
                          " --reference " + c("reference.json") + " --out-dir " +
                          (root / (std::string("conditional_") + run)).string();
        if (run_cli(args, "1", root / "conditional.log") != 0) {
            return {false, "conditional failed: " + slurp(root / "conditional.log")};
        }
    }
    if (!same_tree(root / "conditional_a", root / "conditional_b", why)) {
        return {false, why};
    }

    auto const sweep_args = commands[5].second + " --out-dir " + (root / "sweep_threads").string();
    if (run_cli(sweep_args, "4", root / "sweep_threads.log") != 0) {
        return {false, "threaded sweep failed: " + slurp(root / "sweep_threads.log")};
    }
    if (!same_tree(root / "sweep_a", root / "sweep_threads", why)) {
        return {false, "sweep with 4 threads: " + why};
    }
    return {true, std::to_string(commands.size() + 1) +
                      " subcommand runs byte-identical on rerun; sweep identical with 1 and 4 threads"};
}

#else

std::pair<bool, std::string> determinism()
{
    return {false, "command-line tool not built"};
}

#endif

}  // namespace

int main()
{
    criterion(1, "zero-noise synthetic recovery", zero_noise_recovery);
    criterion(2, "noisy recovery and interval coverage", noisy_recovery);
    criterion(3, "conditional and mixture identities", poststrat_identities);
    criterion(4, "threshold sweep shape", sweep_shape);
    criterion(5, "statistics kernel oracles", kernel_oracles);
    criterion(6, "normalization properties", normalization_properties);
    criterion(7, "bot calibration and ideology bins", calibration);
    criterion(8, "determinism", determinism);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
