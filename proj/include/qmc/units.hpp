#pragma once

#include <compare>

#include "qmc/error.hpp"

namespace qmc {

enum class LengthUnit { nm, um, mm };

LengthUnit parse_length_unit(const std::string& name);
const char* to_string(LengthUnit unit);

// Length with canonical storage in micrometers. Factories reject NaN/inf;
// sign constraints (widths, radii, thicknesses) are enforced at use sites.
class Length {
public:
    constexpr Length() = default;

    static Length nm(double value);
    static Length um(double value);
    static Length mm(double value);
    static Length of(double value, LengthUnit unit);

    constexpr double nm() const { return um_ * 1e3; }
    constexpr double um() const { return um_; }
    constexpr double mm() const { return um_ / 1e3; }
    double in(LengthUnit unit) const;

    friend constexpr auto operator<=>(Length a, Length b) = default;
    friend Length operator+(Length a, Length b) { return Length(a.um_ + b.um_); }
    friend Length operator-(Length a, Length b) { return Length(a.um_ - b.um_); }
    friend Length operator*(double s, Length a) { return Length(s * a.um_); }
    friend Length operator*(Length a, double s) { return Length(s * a.um_); }
    friend Length operator/(Length a, double s) { return Length(a.um_ / s); }

private:
    constexpr explicit Length(double um) : um_(um) {}
    double um_ = 0.0;
};

// Numeric unit conversion with exact decimal ratios: scaling is a single
// multiply (ratio >= 1) or divide (ratio < 1), so a round trip stays within
// one ULP. Throws UnknownUnit / InvalidArgument.
double convert_length(double value, LengthUnit from, LengthUnit to);

// Angle with canonical storage in radians.
class Angle {
public:
    constexpr Angle() = default;

    static Angle rad(double value);
    static Angle deg(double value);

    constexpr double rad() const { return rad_; }
    double deg() const;

    friend constexpr auto operator<=>(Angle a, Angle b) = default;
    friend Angle operator-(Angle a, Angle b) { return Angle(a.rad_ - b.rad_); }

private:
    constexpr explicit Angle(double rad) : rad_(rad) {}
    double rad_ = 0.0;
};

// Mean/width pair for Gaussian-distributed inputs; std >= 0, both finite.
struct GaussianSpec {
    double mean = 0.0;
    double std = 0.0;

    GaussianSpec() = default;
    GaussianSpec(double mean_, double std_);
};

// Throws InvalidArgument when v is NaN or infinite.
void require_finite(double v, const char* name);
// Additionally requires v > 0 (strict) or v >= 0.
void require_positive(double v, const char* name);
void require_non_negative(double v, const char* name);

} // namespace qmc
