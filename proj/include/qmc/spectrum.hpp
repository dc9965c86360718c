#pragma once

#include <map>
#include <string>
#include <vector>

#include "qmc/units.hpp"

namespace qmc {

// A single intensity trace over a strictly increasing wavelength axis.
// Wavelengths are stored in micrometers (canonical unit); intensities are
// non-negative, unit-agnostic counts.
class Spectrum {
public:
    Spectrum(std::vector<double> wavelength_um, std::vector<double> intensity,
             std::map<std::string, std::string> metadata = {});

    static Spectrum from_nm(const std::vector<double>& wavelength_nm,
                            std::vector<double> intensity,
                            std::map<std::string, std::string> metadata = {});

    size_t size() const { return wavelength_um_.size(); }
    const std::vector<double>& wavelength_um() const { return wavelength_um_; }
    const std::vector<double>& intensity() const { return intensity_; }
    double wavelength_nm(size_t i) const { return wavelength_um_[i] * 1e3; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    // Index range [first, last) with wavelength in [lo, hi]. May be empty.
    std::pair<size_t, size_t> window(Length lo, Length hi) const;

private:
    std::vector<double> wavelength_um_;
    std::vector<double> intensity_;
    std::map<std::string, std::string> metadata_;
};

} // namespace qmc
