#ifndef QMCMET_SVG_PLOT_HPP
#define QMCMET_SVG_PLOT_HPP

#include <string>
#include <vector>

namespace cli {

enum class PlotKind { Spectrum, Map, Histogram, Variogram, Trajectory };

// One plot request. Line kinds (spectrum, variogram, trajectory) read the
// x/y series; a non-finite y splits the line into segments. Histograms
// take raw samples in x. Maps fill map_nx * map_ny cells (row-major,
// y-outer, NaN = empty) plus optional value-colored markers in image
// coordinates.
struct PlotData {
    PlotKind kind = PlotKind::Spectrum;
    std::string title;
    std::string x_label;          // axis labels carry the units
    std::string y_label;
    std::vector<double> x;
    std::vector<double> y;
    int bins = 0;                 // histogram bin count; 0 = sqrt rule
    int map_nx = 0;
    int map_ny = 0;
    std::vector<double> cells;
    std::vector<double> mark_x;
    std::vector<double> mark_y;
    std::vector<double> mark_value;  // colors map markers; may be empty
    std::string value_label;         // colorbar caption for maps
    std::string provenance;          // footer: command line plus seed
};

// Writes a standalone SVG, byte-deterministic for identical inputs.
// Empty data is a validation failure; an unwritable path is a runtime
// failure.
void emit_plot(const PlotData& d, const std::string& path);

}  // namespace cli

#endif
