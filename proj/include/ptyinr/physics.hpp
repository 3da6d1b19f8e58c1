#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptyinr/field.hpp"

namespace ptyinr {

/// Raster scan geometry. Positions are (row, col) pixel offsets of the
/// top-left corner of the probe window in object coordinates.
struct ScanGrid {
    int object_rows = 0, object_cols = 0;
    int probe_rows = 0, probe_cols = 0;
    int step_y = 0, step_x = 0;
    std::vector<std::pair<int, int>> positions;

    size_t count() const { return positions.size(); }
    /// Checks window bounds and position uniqueness.
    void validate() const;
};

/// Raster positions 0, step, 2*step, ... with the final row/column clamped so
/// the last window touches the far edge (full coverage, no padding).
ScanGrid make_scan_grid(int object_rows, int object_cols, int probe_rows, int probe_cols,
                        int step_y, int step_x);

/// (1 - step/diameter) * 100; negative when the step exceeds the diameter.
double overlap_ratio(double step_pixels, double probe_diameter_pixels);

/// Probe diameter from the intensity FWHM: the profiles through the intensity
/// centroid's row and column are scanned for half-max crossings (linearly
/// interpolated) and the two widths averaged.
/// Throws std::runtime_error("unbounded probe") when a profile never falls
/// below half max.
double probe_fwhm_diameter(const ComplexField& probe);

ComplexField extract_patch(const ComplexField& object, std::pair<int, int> position, int h, int w);

/// How the measured intensities were degraded, carried as metadata.
struct NoiseRecord {
    std::string kind = "none";  // none | poisson | gaussian | mixed
    double alpha = 0.0;
    double sigma = 0.0;
    uint64_t seed = 0;
};

/// A stack of diffraction intensity frames, one per scan position.
struct DiffractionSet {
    ScanGrid grid;
    std::vector<double> frames;  // count * probe_rows * probe_cols, row-major
    NoiseRecord noise;

    size_t frame_count() const { return grid.count(); }
    size_t frame_pixels() const {
        return static_cast<size_t>(grid.probe_rows) * grid.probe_cols;
    }
    std::span<const double> frame(size_t j) const {
        return std::span<const double>(frames).subspan(j * frame_pixels(), frame_pixels());
    }
    std::span<double> frame(size_t j) {
        return std::span<double>(frames).subspan(j * frame_pixels(), frame_pixels());
    }
    /// Checks finiteness, nonnegativity, and frame-count consistency.
    void validate() const;
};

/// Noise-free forward model: frame j = |cfft2_centered(P * O_patch_j)|^2.
DiffractionSet simulate_intensity(const ComplexField& object, const ComplexField& probe,
                                  const ScanGrid& grid);

}  // namespace ptyinr
