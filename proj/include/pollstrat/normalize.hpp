#pragma once

// Head-to-head normalization of poll outcomes and option-ordering features.

#include <pollstrat/error.hpp>
#include <pollstrat/model.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pollstrat {

/// Canonical (lowercase) substrings identifying the two focal candidates.
struct FocalPair {
    std::string trump = "trump";
    std::string dem = "biden";
};

inline FocalPair focal_for(Election e)
{
    return e == Election::Y2016 ? FocalPair{"trump", "clinton"} : FocalPair{"trump", "biden"};
}

/// Trim, lowercase and strip leading '@' characters.
inline std::string canonical_label(std::string_view label)
{
    auto const is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!label.empty() && is_space(static_cast<unsigned char>(label.front()))) {
        label.remove_prefix(1);
    }
    while (!label.empty() && is_space(static_cast<unsigned char>(label.back()))) {
        label.remove_suffix(1);
    }
    while (!label.empty() && label.front() == '@') {
        label.remove_prefix(1);
    }
    std::string out(label);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

struct NormalizedOutcome {
    std::string poll_id;
    double share_focal = 0.0;  // Trump's share of the two-candidate vote
    std::uint64_t votes_trump = 0;
    std::uint64_t votes_dem = 0;
    std::uint64_t effective_votes = 0;  // votes_trump + votes_dem
    std::uint64_t total_votes = 0;
    bool trump_listed_first_among_focal = false;
    int option_count = 0;

    double share_dem() const
    {
        return static_cast<double>(votes_dem) / static_cast<double>(effective_votes);
    }

    bool operator==(NormalizedOutcome const&) const = default;
};

/// Drops every non-focal option and rescales the two focal counts to sum to
/// one. Throws MissingFocalOption when a focal candidate is absent, listed
/// twice, or a label names both candidates; ZeroFocalVotes when neither
/// focal option received a vote.
inline NormalizedOutcome normalize_poll(PollRecord const& poll, FocalPair const& focal)
{
    std::vector<std::size_t> trump_idx;
    std::vector<std::size_t> dem_idx;
    for (std::size_t i = 0; i < poll.options.size(); ++i) {
        auto const label = canonical_label(poll.options[i].label);
        bool const is_trump = label.find(focal.trump) != std::string::npos;
        bool const is_dem = label.find(focal.dem) != std::string::npos;
        if (is_trump && is_dem) {
            throw Error(ErrorCode::MissingFocalOption,
                        "poll " + poll.poll_id + ": ambiguous option label '"
                            + poll.options[i].label + "'");
        }
        if (is_trump) {
            trump_idx.push_back(i);
        }
        if (is_dem) {
            dem_idx.push_back(i);
        }
    }
    if (trump_idx.size() != 1 || dem_idx.size() != 1) {
        throw Error(ErrorCode::MissingFocalOption,
                    "poll " + poll.poll_id + ": expected exactly one '" + focal.trump
                        + "' and one '" + focal.dem + "' option, found "
                        + std::to_string(trump_idx.size()) + " and "
                        + std::to_string(dem_idx.size()));
    }

    NormalizedOutcome out;
    out.poll_id = poll.poll_id;
    out.votes_trump = poll.options[trump_idx[0]].votes;
    out.votes_dem = poll.options[dem_idx[0]].votes;
    out.effective_votes = out.votes_trump + out.votes_dem;
    out.total_votes = poll.total_votes();
    out.trump_listed_first_among_focal = trump_idx[0] < dem_idx[0];
    out.option_count = static_cast<int>(poll.options.size());
    if (out.effective_votes == 0) {
        throw Error(ErrorCode::ZeroFocalVotes, "poll " + poll.poll_id + ": no focal votes");
    }
    out.share_focal = static_cast<double>(out.votes_trump) / static_cast<double>(out.effective_votes);
    return out;
}

/// Head-to-head normalization for sources that report two focal shares
/// directly (mainstream polls, election results); shares need not sum to 1.
inline double normalize_head_to_head(double share_trump, double share_dem)
{
    if (!(share_trump >= 0.0) || !(share_dem >= 0.0) || share_trump + share_dem <= 0.0) {
        throw Error(ErrorCode::ZeroFocalVotes, "head-to-head shares must be non-negative with a positive sum");
    }
    return share_trump / (share_trump + share_dem);
}

struct PositionShares {
    /// option count -> (1-based display position, share of that option)
    std::map<int, std::vector<std::pair<int, double>>> groups;
    std::size_t skipped_zero_vote = 0;
};

inline PositionShares position_share_pairs(std::span<PollRecord const> polls)
{
    PositionShares out;
    for (auto const& poll : polls) {
        auto const total = poll.total_votes();
        if (total == 0) {
            ++out.skipped_zero_vote;
            continue;
        }
        auto& group = out.groups[static_cast<int>(poll.options.size())];
        for (std::size_t i = 0; i < poll.options.size(); ++i) {
            group.emplace_back(static_cast<int>(i + 1),
                               static_cast<double>(poll.options[i].votes) / static_cast<double>(total));
        }
    }
    return out;
}

}  // namespace pollstrat
