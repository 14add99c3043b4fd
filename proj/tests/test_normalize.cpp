#include <pollstrat/normalize.hpp>
#include <pollstrat/random.hpp>
#include <pollstrat/stats.hpp>

#include <gtest/gtest.h>

using namespace pollstrat;

namespace {

PollRecord poll(std::vector<PollOption> options)
{
    PollRecord p;
    p.poll_id = "x";
    p.options = std::move(options);
    return p;
}

FocalPair const k2020 = focal_for(Election::Y2020);

}  // namespace

TEST(NormalizePoll, DropsNonFocalOptions)
{
    auto const out = normalize_poll(poll({{"Trump", 60}, {"Biden", 30}, {"Other", 10}}), k2020);
    EXPECT_DOUBLE_EQ(out.share_focal, 60.0 / 90.0);
    EXPECT_NEAR(out.share_focal, 0.6667, 1e-4);
    EXPECT_EQ(out.effective_votes, 90u);
    EXPECT_EQ(out.total_votes, 100u);
    EXPECT_TRUE(out.trump_listed_first_among_focal);
    EXPECT_EQ(out.option_count, 3);
}

TEST(NormalizePoll, EvenSplitDemocratFirst)
{
    auto const out = normalize_poll(poll({{"Biden", 50}, {"Trump", 50}}), k2020);
    EXPECT_EQ(out.share_focal, 0.5);
    EXPECT_FALSE(out.trump_listed_first_among_focal);
}

TEST(NormalizePoll, ZeroFocalVotes)
{
    try {
        normalize_poll(poll({{"Biden", 0}, {"Trump", 0}, {"Kanye", 7}}), k2020);
        FAIL() << "expected ZeroFocalVotes";
    } catch (Error const& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroFocalVotes);
    }
}

TEST(NormalizePoll, LabelCanonicalization)
{
    EXPECT_EQ(canonical_label("  @RealDonaldTrump "), "realdonaldtrump");
    auto const out = normalize_poll(poll({{"@JoeBiden", 3}, {" Donald J. TRUMP ", 1}}), k2020);
    EXPECT_EQ(out.share_focal, 0.25);
    EXPECT_THROW(normalize_poll(poll({{"Trump", 3}, {"Clinton", 1}}), k2020), Error);
    EXPECT_NO_THROW(normalize_poll(poll({{"Trump", 3}, {"Clinton", 1}}), focal_for(Election::Y2016)));
}

TEST(NormalizePoll, MissingDuplicateOrAmbiguousFocal)
{
    auto code = [](PollRecord const& p) {
        try {
            normalize_poll(p, k2020);
        } catch (Error const& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code(poll({{"Trump", 1}, {"Sanders", 2}})), ErrorCode::MissingFocalOption);
    EXPECT_EQ(code(poll({{"Trump", 1}, {"Trump again", 2}, {"Biden", 2}})), ErrorCode::MissingFocalOption);
    EXPECT_EQ(code(poll({{"Trump/Biden ticket", 1}, {"Biden", 2}})), ErrorCode::MissingFocalOption);
}

TEST(NormalizeHeadToHead, RescalesShares)
{
    EXPECT_DOUBLE_EQ(normalize_head_to_head(0.46, 0.51), 0.46 / 0.97);
    EXPECT_THROW(normalize_head_to_head(0.0, 0.0), Error);
}

TEST(NormalizeProperties, ScaleDropAndComplement)
{
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        std::vector<PollOption> opts{{"Trump", rng.index(10000)}, {"Biden", 1 + rng.index(10000)}};
        auto const extras = rng.index(3);
        for (std::uint64_t e = 0; e < extras; ++e) {
            opts.insert(opts.begin() + static_cast<std::ptrdiff_t>(rng.index(opts.size() + 1)),
                        PollOption{"Other " + std::to_string(e), rng.index(5000)});
        }
        auto const base = normalize_poll(poll(opts), k2020);

        auto scaled = opts;
        auto const k = 1 + rng.index(1000);
        for (auto& o : scaled) {
            o.votes *= k;
        }
        EXPECT_EQ(normalize_poll(poll(scaled), k2020).share_focal, base.share_focal);

        auto dropped = opts;
        auto const it = std::find_if(dropped.begin(), dropped.end(),
                                     [](PollOption const& o) { return o.label.rfind("Other", 0) == 0; });
        if (it != dropped.end()) {
            dropped.erase(it);
            EXPECT_EQ(normalize_poll(poll(dropped), k2020).share_focal, base.share_focal);
        }
        if (opts.size() == 2) {
            EXPECT_EQ(base.share_focal + base.share_dem(), 1.0);
        }
    }
}

TEST(PositionShares, TwoOptionPoll)
{
    std::vector<PollRecord> polls{poll({{"A", 75}, {"B", 25}})};
    auto const out = position_share_pairs(polls);
    ASSERT_EQ(out.groups.at(2).size(), 2u);
    EXPECT_EQ(out.groups.at(2)[0], (std::pair<int, double>{1, 0.75}));
    EXPECT_EQ(out.groups.at(2)[1], (std::pair<int, double>{2, 0.25}));
}

TEST(PositionShares, ThreeOptionPollAndZeroVoteSkip)
{
    std::vector<PollRecord> polls{poll({{"A", 0}, {"B", 0}, {"C", 10}}), poll({{"A", 0}, {"B", 0}})};
    auto const out = position_share_pairs(polls);
    EXPECT_EQ(out.skipped_zero_vote, 1u);
    auto const& g = out.groups.at(3);
    ASSERT_EQ(g.size(), 3u);
    EXPECT_EQ(g[0], (std::pair<int, double>{1, 0.0}));
    EXPECT_EQ(g[1], (std::pair<int, double>{2, 0.0}));
    EXPECT_EQ(g[2], (std::pair<int, double>{3, 1.0}));
    EXPECT_FALSE(out.groups.contains(2));
}

// Top option gets twice the votes of the next: correlation of position and
// share must be negative. Expected r from the covariance formula over the
// emitted pairs, computed here independently of pearson().
TEST(PositionShares, OrderEffectGivesNegativeCorrelation)
{
    Rng rng(11);
    std::vector<PollRecord> polls;
    for (int i = 0; i < 200; ++i) {
        auto const bottom = 1 + rng.index(500);
        polls.push_back(poll({{"A", 2 * bottom}, {"B", bottom}}));
    }
    auto const pairs = position_share_pairs(polls).groups.at(2);
    double mx = 0, my = 0;
    for (auto const& [x, y] : pairs) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pairs.size());
    my /= static_cast<double>(pairs.size());
    double cov = 0, vx = 0, vy = 0;
    for (auto const& [x, y] : pairs) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    double const expected = cov / std::sqrt(vx * vy);
    EXPECT_LT(expected, 0.0);

    std::vector<std::pair<double, double>> as_real;
    for (auto const& [x, y] : pairs) {
        as_real.emplace_back(x, y);
    }
    EXPECT_NEAR(pearson(as_real).r, expected, 1e-12);
}
