#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pollstrat {

enum class ErrorCode {
    InvalidArgument,
    MissingFocalOption,
    ZeroFocalVotes,
    RankDeficient,
    InsufficientObservations,
    ZeroVariance,
    TooFewPairs,
    LengthMismatch,
    MissingCell,
    NoPollsAfterFilter,
    AllMissingDimension,
    MissingMarginal,
    MissingConditional,
    OutOfRange,
    UnknownState,
    SchemaMismatch,
    Unreadable,
    DistributionInvalid,
    VersionMismatch,
    InvalidModel,
    InvalidRegistry,
    InvalidSpec,
    BootstrapExhausted,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingFocalOption: return "MissingFocalOption";
    case ErrorCode::ZeroFocalVotes: return "ZeroFocalVotes";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InsufficientObservations: return "InsufficientObservations";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::NoPollsAfterFilter: return "NoPollsAfterFilter";
    case ErrorCode::AllMissingDimension: return "AllMissingDimension";
    case ErrorCode::MissingMarginal: return "MissingMarginal";
    case ErrorCode::MissingConditional: return "MissingConditional";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::UnknownState: return "UnknownState";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::Unreadable: return "Unreadable";
    case ErrorCode::DistributionInvalid: return "DistributionInvalid";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::InvalidRegistry: return "InvalidRegistry";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::BootstrapExhausted: return "BootstrapExhausted";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code; the
/// message is prefixed with the code name so CLI output stays greppable.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string const& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace pollstrat
