#include "qmc/spectrum.hpp"

#include <algorithm>
#include <cmath>

namespace qmc {

Spectrum::Spectrum(std::vector<double> wavelength_um, std::vector<double> intensity,
                   std::map<std::string, std::string> metadata)
    : wavelength_um_(std::move(wavelength_um)),
      intensity_(std::move(intensity)),
      metadata_(std::move(metadata)) {
    if (wavelength_um_.size() < 2) {
        throw Error(ErrorCode::EmptySpectrum, "spectrum needs at least 2 samples",
                    {{"n", std::to_string(wavelength_um_.size())}});
    }
    if (wavelength_um_.size() != intensity_.size()) {
        throw Error(ErrorCode::InvalidArgument, "wavelength/intensity length mismatch",
                    {{"n_wavelength", std::to_string(wavelength_um_.size())},
                     {"n_intensity", std::to_string(intensity_.size())}});
    }
    for (size_t i = 0; i < wavelength_um_.size(); ++i) {
        if (!std::isfinite(wavelength_um_[i])) {
            throw Error(ErrorCode::InvalidArgument, "non-finite wavelength",
                        {{"index", std::to_string(i)}});
        }
        if (i > 0 && wavelength_um_[i] <= wavelength_um_[i - 1]) {
            throw Error(ErrorCode::NonMonotonicAxis,
                        "wavelength axis must be strictly increasing",
                        {{"index", std::to_string(i)}});
        }
        if (!std::isfinite(intensity_[i]) || intensity_[i] < 0.0) {
            throw Error(ErrorCode::InvalidArgument, "intensity must be finite and >= 0",
                        {{"index", std::to_string(i)}});
        }
    }
}

Spectrum Spectrum::from_nm(const std::vector<double>& wavelength_nm,
                           std::vector<double> intensity,
                           std::map<std::string, std::string> metadata) {
    std::vector<double> um(wavelength_nm.size());
    for (size_t i = 0; i < wavelength_nm.size(); ++i) um[i] = wavelength_nm[i] / 1e3;
    return Spectrum(std::move(um), std::move(intensity), std::move(metadata));
}

std::pair<size_t, size_t> Spectrum::window(Length lo, Length hi) const {
    auto first = std::lower_bound(wavelength_um_.begin(), wavelength_um_.end(), lo.um());
    auto last = std::upper_bound(wavelength_um_.begin(), wavelength_um_.end(), hi.um());
    return {static_cast<size_t>(first - wavelength_um_.begin()),
            static_cast<size_t>(last - wavelength_um_.begin())};
}

} // namespace qmc
