#include "qmc/units.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace qmc {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Ok: return "Ok";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::UnknownUnit: return "UnknownUnit";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::HeaderMismatch: return "HeaderMismatch";
        case ErrorCode::NonMonotonicAxis: return "NonMonotonicAxis";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::MissingScale: return "MissingScale";
        case ErrorCode::EmptySpectrum: return "EmptySpectrum";
        case ErrorCode::WindowTooSmall: return "WindowTooSmall";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::AllModesUnresolved: return "AllModesUnresolved";
        case ErrorCode::SeedPeakNotFound: return "SeedPeakNotFound";
        case ErrorCode::TrackLost: return "TrackLost";
        case ErrorCode::ZeroOffResonanceSignal: return "ZeroOffResonanceSignal";
        case ErrorCode::ChipletOutOfRange: return "ChipletOutOfRange";
        case ErrorCode::ImageTooSmall: return "ImageTooSmall";
        case ErrorCode::LowCoherence: return "LowCoherence";
        case ErrorCode::EdgeCountMismatch: return "EdgeCountMismatch";
        case ErrorCode::TrapezoidViolation: return "TrapezoidViolation";
        case ErrorCode::RidgeCountMismatch: return "RidgeCountMismatch";
        case ErrorCode::NonParallelRidges: return "NonParallelRidges";
        case ErrorCode::InvalidGeometry: return "InvalidGeometry";
        case ErrorCode::DegenerateTilt: return "DegenerateTilt";
        case ErrorCode::UnstableGeometry: return "UnstableGeometry";
        case ErrorCode::OutOfValidityRange: return "OutOfValidityRange";
        case ErrorCode::PoleProximity: return "PoleProximity";
        case ErrorCode::OutOfValidityBox: return "OutOfValidityBox";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::NoSignChange: return "NoSignChange";
        case ErrorCode::NonMonotoneOnBracket: return "NonMonotoneOnBracket";
        case ErrorCode::TooManyFailures: return "TooManyFailures";
        case ErrorCode::NoPairsInRange: return "NoPairsInRange";
    }
    return "Unknown";
}

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(name) + " must be finite",
                    {{name, std::to_string(v)}});
    }
}

void require_positive(double v, const char* name) {
    require_finite(v, name);
    if (v <= 0.0) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(name) + " must be > 0",
                    {{name, std::to_string(v)}});
    }
}

void require_non_negative(double v, const char* name) {
    require_finite(v, name);
    if (v < 0.0) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(name) + " must be >= 0",
                    {{name, std::to_string(v)}});
    }
}

LengthUnit parse_length_unit(const std::string& name) {
    if (name == "nm") return LengthUnit::nm;
    if (name == "um") return LengthUnit::um;
    if (name == "mm") return LengthUnit::mm;
    throw Error(ErrorCode::UnknownUnit, "unknown length unit", {{"unit", name}});
}

const char* to_string(LengthUnit unit) {
    switch (unit) {
        case LengthUnit::nm: return "nm";
        case LengthUnit::um: return "um";
        case LengthUnit::mm: return "mm";
    }
    return "?";
}

namespace {
// Decade rank of each unit relative to nm: nm=0, um=3, mm=6.
int decade_rank(LengthUnit u) {
    switch (u) {
        case LengthUnit::nm: return 0;
        case LengthUnit::um: return 3;
        case LengthUnit::mm: return 6;
    }
    throw Error(ErrorCode::UnknownUnit, "unknown length unit");
}

constexpr double kPow10[7] = {1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6};
} // namespace

double convert_length(double value, LengthUnit from, LengthUnit to) {
    require_finite(value, "value");
    const int shift = decade_rank(from) - decade_rank(to);
    if (shift == 0) return value;
    // Powers of ten up to 1e6 are exact doubles, so one multiply or one
    // divide gives a single correctly-rounded result.
    return shift > 0 ? value * kPow10[shift] : value / kPow10[-shift];
}

Length Length::nm(double value) {
    require_finite(value, "length_nm");
    return Length(value / 1e3);
}

Length Length::um(double value) {
    require_finite(value, "length_um");
    return Length(value);
}

Length Length::mm(double value) {
    require_finite(value, "length_mm");
    return Length(value * 1e3);
}

Length Length::of(double value, LengthUnit unit) {
    switch (unit) {
        case LengthUnit::nm: return nm(value);
        case LengthUnit::um: return um(value);
        case LengthUnit::mm: return mm(value);
    }
    throw Error(ErrorCode::UnknownUnit, "unknown length unit");
}

double Length::in(LengthUnit unit) const {
    return convert_length(um_, LengthUnit::um, unit);
}

Angle Angle::rad(double value) {
    require_finite(value, "angle_rad");
    return Angle(value);
}

Angle Angle::deg(double value) {
    require_finite(value, "angle_deg");
    return Angle(value * std::numbers::pi / 180.0);
}

double Angle::deg() const { return rad_ * 180.0 / std::numbers::pi; }

GaussianSpec::GaussianSpec(double mean_, double std_) : mean(mean_), std(std_) {
    require_finite(mean, "mean");
    require_non_negative(std, "std");
}

} // namespace qmc
