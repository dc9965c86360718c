#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <numbers>

#include "qmc/spectrum.hpp"
#include "qmc/units.hpp"

using namespace qmc;

namespace {

int64_t ulps_between(double a, double b) {
    auto ia = std::bit_cast<int64_t>(a);
    auto ib = std::bit_cast<int64_t>(b);
    // Map to a monotone integer line (works for same-sign finite values).
    if (ia < 0) ia = std::numeric_limits<int64_t>::min() - ia;
    if (ib < 0) ib = std::numeric_limits<int64_t>::min() - ib;
    return ia > ib ? ia - ib : ib - ia;
}

} // namespace

TEST_CASE("length unit conversion uses exact decimal ratios") {
    CHECK(convert_length(620.0, LengthUnit::nm, LengthUnit::um) == doctest::Approx(0.620).epsilon(1e-15));
    CHECK(convert_length(1.0, LengthUnit::mm, LengthUnit::um) == 1000.0);
    CHECK(convert_length(1.0, LengthUnit::mm, LengthUnit::nm) == 1e6);
    CHECK(convert_length(0.5, LengthUnit::um, LengthUnit::um) == 0.5);
    // 620 nm -> um -> nm must land within one ULP of the start.
    const double back = convert_length(convert_length(620.0, LengthUnit::nm, LengthUnit::um),
                                       LengthUnit::um, LengthUnit::nm);
    CHECK(ulps_between(back, 620.0) <= 1);
}

TEST_CASE("length round trip within one ULP across units and magnitudes") {
    const LengthUnit units[] = {LengthUnit::nm, LengthUnit::um, LengthUnit::mm};
    const double values[] = {1e-3, 0.123456789, 1.0, 45.0, 633.2, 1e6, 3.0e-7};
    for (auto from : units) {
        for (auto to : units) {
            for (double v : values) {
                const double there = convert_length(v, from, to);
                const double back = convert_length(there, to, from);
                INFO("v=", v, " from=", to_string(from), " to=", to_string(to));
                CHECK(ulps_between(back, v) <= 1);
            }
        }
    }
}

TEST_CASE("length rejects non-finite input with a typed error") {
    CHECK_THROWS_WITH_AS(convert_length(std::nan(""), LengthUnit::nm, LengthUnit::um),
                         doctest::Contains("finite"), Error);
    try {
        Length::nm(std::numeric_limits<double>::infinity());
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidArgument);
    }
}

TEST_CASE("unit names parse and unknown units are typed errors") {
    CHECK(parse_length_unit("nm") == LengthUnit::nm);
    CHECK(parse_length_unit("um") == LengthUnit::um);
    CHECK(parse_length_unit("mm") == LengthUnit::mm);
    try {
        parse_length_unit("furlong");
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownUnit);
        CHECK(e.context().at("unit") == "furlong");
    }
}

TEST_CASE("length comparisons are total on valid values") {
    const Length a = Length::nm(619.5);
    const Length b = Length::nm(620.0);
    CHECK(a < b);
    CHECK(b > a);
    CHECK(a == Length::um(0.6195));
    CHECK((a <=> b) == std::strong_ordering::less);
}

TEST_CASE("angle conversions") {
    CHECK(Angle::deg(45.0).rad() == doctest::Approx(std::numbers::pi / 4).epsilon(1e-15));
    CHECK(Angle::rad(std::numbers::pi).deg() == doctest::Approx(180.0).epsilon(1e-15));
    CHECK(Angle::deg(-30.0) < Angle::deg(0.0));
}

TEST_CASE("gaussian spec validates width") {
    CHECK_NOTHROW(GaussianSpec(0.33, 0.004));
    CHECK_NOTHROW(GaussianSpec(0.33, 0.0));
    try {
        GaussianSpec(0.33, -1.0);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidArgument);
    }
}

TEST_CASE("spectrum enforces monotone axis and non-negative intensity") {
    CHECK_NOTHROW(Spectrum({0.619, 0.620, 0.621}, {1.0, 2.0, 1.0}));
    try {
        Spectrum({0.620, 0.620, 0.621}, {1.0, 2.0, 1.0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonMonotonicAxis);
    }
    try {
        Spectrum({0.619, 0.620, 0.621}, {1.0, -2.0, 1.0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidArgument);
    }
    try {
        Spectrum({0.619}, {1.0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptySpectrum);
    }
}

TEST_CASE("spectrum window selects the inclusive wavelength range") {
    Spectrum s({0.610, 0.615, 0.620, 0.625, 0.630}, {1, 1, 1, 1, 1});
    auto [first, last] = s.window(Length::nm(615.0), Length::nm(625.0));
    CHECK(first == 1);
    CHECK(last == 4);
    auto [ef, el] = s.window(Length::nm(700.0), Length::nm(710.0));
    CHECK(ef == el);
}

TEST_CASE("error report carries code, message and context") {
    const Error e(ErrorCode::BadMagic, "not a cube file", {{"path", "x.cube"}});
    const ErrorReport r = e.report();
    CHECK(r.code == ErrorCode::BadMagic);
    CHECK(r.message == "not a cube file");
    CHECK(r.context.at("path") == "x.cube");
    CHECK(std::string(to_string(ErrorCode::BadMagic)) == "BadMagic");
}
