#include <pollstrat/model.hpp>
#include <pollstrat/random.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <string>

using namespace pollstrat;

namespace {

bool mentions(std::vector<std::string> const& violations, std::string const& needle)
{
    return std::any_of(violations.begin(), violations.end(),
                       [&](std::string const& v) { return v.find(needle) != std::string::npos; });
}

}  // namespace

TEST(Registry, DefaultIsValidAndMatchesRegressionTable)
{
    auto const reg = default_registry();
    EXPECT_TRUE(validate_registry(reg).empty());
    ASSERT_EQ(reg.dimensions().size(), 6u);
    EXPECT_EQ(reg.at("gender").reference, "female");
    EXPECT_EQ(reg.at("age").reference, "under30");
    EXPECT_EQ(reg.at("ideology").reference, "moderate");
    EXPECT_EQ(reg.at("location").reference, "swing_state");
    EXPECT_EQ(reg.at("bot").reference, "not_bot");
    EXPECT_EQ(reg.at("first_option").reference, "not_trump");

    auto const keys = reg.predictor_keys(default_regression_dimensions());
    EXPECT_EQ(keys.size(), 9u);
    for (auto const& k : keys) {
        EXPECT_FALSE(reg.is_reference(k)) << k.str();
    }
}

TEST(Registry, SingleStratumDimensionIsViolation)
{
    DimensionRegistry reg({{"gender", {"male"}, "male"}});
    EXPECT_TRUE(mentions(validate_registry(reg), "dimension with <2 strata"));
}

TEST(Registry, UnknownReferenceIsViolation)
{
    DimensionRegistry reg({{"gender", {"male", "female"}, "unknown"}});
    EXPECT_TRUE(mentions(validate_registry(reg), "reference not in dimension"));
}

TEST(Registry, DuplicateIdsAreViolations)
{
    DimensionRegistry reg({{"a", {"x", "x"}, "x"}, {"a", {"y", "z"}, "y"}});
    auto const v = validate_registry(reg);
    EXPECT_TRUE(mentions(v, "duplicate stratum id"));
    EXPECT_TRUE(mentions(v, "duplicate dimension id"));
}

TEST(Registry, StratumKeyParsing)
{
    EXPECT_EQ(parse_stratum_key("ideology:rep"), (StratumKey{"ideology", "rep"}));
    EXPECT_THROW(parse_stratum_key("ideology"), Error);
    EXPECT_THROW(parse_stratum_key(":rep"), Error);
}

// Property: on random valid registries, a model whose coefficients are the
// predictor keys passes validation, and adding a reference-keyed coefficient
// fails it.
TEST(Registry, PredictorKeysAlwaysResolve)
{
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Dimension> dims;
        auto const n_dims = 1 + rng.index(5);
        for (std::uint64_t d = 0; d < n_dims; ++d) {
            Dimension dim;
            dim.id = "d" + std::to_string(d);
            auto const n_strata = 2 + rng.index(4);
            for (std::uint64_t s = 0; s < n_strata; ++s) {
                dim.strata.push_back("s" + std::to_string(s));
            }
            dim.reference = dim.strata[rng.index(n_strata)];
            dims.push_back(dim);
        }
        DimensionRegistry reg(dims);
        ASSERT_TRUE(validate_registry(reg).empty());

        FittedModel m;
        m.dimension_set = reg.dimension_ids();
        for (auto const& k : reg.predictor_keys(m.dimension_set)) {
            ASSERT_TRUE(reg.contains(k));
            ASSERT_FALSE(reg.is_reference(k));
            m.coefficients[k] = {};
        }
        m.n_obs = m.coefficients.size() + 1;
        EXPECT_NO_THROW(validate_model(m, reg));

        auto const& first = reg.dimensions().front();
        m.coefficients[{first.id, first.reference}] = {};
        m.n_obs += 1;
        EXPECT_THROW(validate_model(m, reg), Error);
    }
}

TEST(Model, TooFewObservationsRejected)
{
    FittedModel m;
    m.dimension_set = {"gender"};
    m.coefficients[{"gender", "male"}] = {};
    m.n_obs = 1;
    EXPECT_THROW(validate_model(m, default_registry()), Error);
    m.n_obs = 2;
    EXPECT_NO_THROW(validate_model(m, default_registry()));
}

TEST(Marginals, SumToOneChecked)
{
    StratumMarginals m;
    m.coverage["gender"] = Coverage::Observed;
    m.entries[{"gender", "male"}] = 0.4;
    m.entries[{"gender", "female"}] = 0.6;
    EXPECT_TRUE(validate_marginals(m, default_registry()).empty());
    m.entries[{"gender", "female"}] = 0.5;
    EXPECT_FALSE(validate_marginals(m, default_registry()).empty());
}

TEST(Election, CutoffIsEndOfElectionDayUtc)
{
    using namespace std::chrono;
    auto const cutoff = election_cutoff(Election::Y2020);
    EXPECT_EQ(cutoff, sys_days{year{2020} / November / day{3}} + seconds{86399});
    EXPECT_EQ(sys_days{election_day(Election::Y2016)}, sys_days{year{2016} / November / day{8}});
}

TEST(Reference, MarginalSumAndConsistency)
{
    ReferenceDistribution ref;
    ref.marginals[{"gender", "male"}] = 0.47;
    ref.marginals[{"gender", "female"}] = 0.53;
    EXPECT_TRUE(check_reference(ref).empty());

    ref.marginals[{"ideology", "dem"}] = 0.5;
    ref.marginals[{"ideology", "rep"}] = 0.5;
    // p(gender | ideology) consistent: 0.5*0.4 + 0.5*0.54 = 0.47
    ref.conditionals[{{"ideology", "dem"}, {"gender", "male"}}] = 0.40;
    ref.conditionals[{{"ideology", "dem"}, {"gender", "female"}}] = 0.60;
    ref.conditionals[{{"ideology", "rep"}, {"gender", "male"}}] = 0.54;
    ref.conditionals[{{"ideology", "rep"}, {"gender", "female"}}] = 0.46;
    EXPECT_TRUE(check_reference(ref).empty());

    ref.conditionals[{{"ideology", "rep"}, {"gender", "male"}}] = 0.56;
    ref.conditionals[{{"ideology", "rep"}, {"gender", "female"}}] = 0.44;
    auto const problems = check_reference(ref);
    ASSERT_FALSE(problems.empty());
    EXPECT_NE(problems.front().find("inconsistent"), std::string::npos);
    EXPECT_NE(problems.front().find("gender"), std::string::npos);
}
