#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace qmc {

// Closed error taxonomy. Codes are stable contract values; the C API maps
// them 1:1 to integer status codes.
enum class ErrorCode {
    Ok = 0,
    InvalidArgument,     // NaN/inf/negative where finiteness or sign is required
    UnknownUnit,
    IoFailure,
    BadMagic,
    HeaderMismatch,      // declared dims disagree with payload size
    NonMonotonicAxis,
    UnsupportedFormat,   // e.g. 16-bit or color images
    MissingScale,
    EmptySpectrum,
    WindowTooSmall,
    TooFewSamples,
    AllModesUnresolved,  // no mode could be extracted at all
    SeedPeakNotFound,
    TrackLost,
    ZeroOffResonanceSignal,
    ChipletOutOfRange,
    ImageTooSmall,
    LowCoherence,
    EdgeCountMismatch,
    TrapezoidViolation,
    RidgeCountMismatch,
    NonParallelRidges,
    InvalidGeometry,
    DegenerateTilt,
    UnstableGeometry,
    OutOfValidityRange,
    PoleProximity,
    OutOfValidityBox,
    RankDeficient,
    NoSignChange,
    NonMonotoneOnBracket,
    TooManyFailures,
    NoPairsInRange,
};

const char* to_string(ErrorCode code);

// What a failed operation reports: code, human-readable message, and the
// offending values as key/value context.
struct ErrorReport {
    ErrorCode code = ErrorCode::Ok;
    std::string message;
    std::map<std::string, std::string> context;
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::map<std::string, std::string> context = {})
        : std::runtime_error(message), code_(code), context_(std::move(context)) {}

    ErrorCode code() const { return code_; }
    const std::map<std::string, std::string>& context() const { return context_; }

    ErrorReport report() const { return ErrorReport{code_, what(), context_}; }

private:
    ErrorCode code_;
    std::map<std::string, std::string> context_;
};

} // namespace qmc
