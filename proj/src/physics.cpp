#include "ptyinr/physics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ptyinr/fft.hpp"

namespace ptyinr {

void ScanGrid::validate() const {
    if (object_rows < 1 || object_cols < 1 || probe_rows < 1 || probe_cols < 1)
        throw std::invalid_argument("scan grid shapes must be positive");
    std::set<std::pair<int, int>> seen;
    for (auto [r, c] : positions) {
        if (r < 0 || c < 0 || r + probe_rows > object_rows || c + probe_cols > object_cols)
            throw std::invalid_argument("scan window out of object bounds");
        if (!seen.insert({r, c}).second)
            throw std::invalid_argument("duplicate scan position");
    }
}

namespace {
std::vector<int> axis_positions(int object_extent, int probe_extent, int step) {
    std::vector<int> out;
    const int last = object_extent - probe_extent;
    for (int p = 0; p <= last; p += step) out.push_back(p);
    if (out.back() != last) out.push_back(last);
    return out;
}
}  // namespace

ScanGrid make_scan_grid(int object_rows, int object_cols, int probe_rows, int probe_cols,
                        int step_y, int step_x) {
    if (step_y < 1 || step_x < 1) throw std::invalid_argument("scan step must be at least 1");
    if (probe_rows > object_rows || probe_cols > object_cols)
        throw std::invalid_argument("probe larger than object");
    ScanGrid g;
    g.object_rows = object_rows;
    g.object_cols = object_cols;
    g.probe_rows = probe_rows;
    g.probe_cols = probe_cols;
    g.step_y = step_y;
    g.step_x = step_x;
    const auto ys = axis_positions(object_rows, probe_rows, step_y);
    const auto xs = axis_positions(object_cols, probe_cols, step_x);
    for (int y : ys)
        for (int x : xs) g.positions.emplace_back(y, x);
    g.validate();
    return g;
}

double overlap_ratio(double step_pixels, double probe_diameter_pixels) {
    if (probe_diameter_pixels <= 0.0)
        throw std::invalid_argument("probe diameter must be positive");
    return (1.0 - step_pixels / probe_diameter_pixels) * 100.0;
}

namespace {
/// Width of the half-max region of a 1-D profile, crossings linearly
/// interpolated around the peak.
double half_max_width(const std::vector<double>& p) {
    const size_t n = p.size();
    size_t peak = 0;
    for (size_t i = 1; i < n; ++i)
        if (p[i] > p[peak]) peak = i;
    const double half = p[peak] / 2.0;

    double left = -1.0, right = -1.0;
    for (size_t i = peak; i-- > 0;) {
        if (p[i] < half) {
            // crossing between i and i+1
            left = static_cast<double>(i) + (half - p[i]) / (p[i + 1] - p[i]);
            break;
        }
    }
    for (size_t i = peak + 1; i < n; ++i) {
        if (p[i] < half) {
            right = static_cast<double>(i) - (half - p[i]) / (p[i - 1] - p[i]);
            break;
        }
    }
    if (left < 0.0 || right < 0.0) throw std::runtime_error("unbounded probe");
    return right - left;
}
}  // namespace

double probe_fwhm_diameter(const ComplexField& probe) {
    const int rows = probe.rows(), cols = probe.cols();
    std::vector<double> intensity(probe.size());
    double total = 0.0;
    for (size_t i = 0; i < probe.size(); ++i) {
        const double re = probe.data()[2 * i], im = probe.data()[2 * i + 1];
        intensity[i] = re * re + im * im;
        total += intensity[i];
    }
    if (total <= 0.0) throw std::invalid_argument("probe has no intensity");

    double cy = 0.0, cx = 0.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double v = intensity[static_cast<size_t>(r) * cols + c];
            cy += r * v;
            cx += c * v;
        }
    const int r0 = std::clamp(static_cast<int>(std::lround(cy / total)), 0, rows - 1);
    const int c0 = std::clamp(static_cast<int>(std::lround(cx / total)), 0, cols - 1);

    std::vector<double> row_profile(cols), col_profile(rows);
    for (int c = 0; c < cols; ++c) row_profile[c] = intensity[static_cast<size_t>(r0) * cols + c];
    for (int r = 0; r < rows; ++r) col_profile[r] = intensity[static_cast<size_t>(r) * cols + c0];

    return (half_max_width(row_profile) + half_max_width(col_profile)) / 2.0;
}

ComplexField extract_patch(const ComplexField& object, std::pair<int, int> position, int h, int w) {
    return crop(object, position.first, position.second, h, w);
}

void DiffractionSet::validate() const {
    grid.validate();
    if (frames.size() != frame_count() * frame_pixels())
        throw std::invalid_argument("frame count does not match scan grid");
    for (double v : frames) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite field");
        if (v < 0.0) throw std::invalid_argument("negative intensity");
    }
}

DiffractionSet simulate_intensity(const ComplexField& object, const ComplexField& probe,
                                  const ScanGrid& grid) {
    if (probe.rows() != grid.probe_rows || probe.cols() != grid.probe_cols)
        throw std::invalid_argument("shape mismatch");
    if (object.rows() != grid.object_rows || object.cols() != grid.object_cols)
        throw std::invalid_argument("shape mismatch");
    grid.validate();

    DiffractionSet set;
    set.grid = grid;
    set.frames.resize(grid.count() * static_cast<size_t>(grid.probe_rows) * grid.probe_cols);
    const int h = grid.probe_rows, w = grid.probe_cols;
    ComplexField exit(h, w);
    for (size_t j = 0; j < grid.count(); ++j) {
        const auto [py, px] = grid.positions[j];
        const ComplexField patch = crop(object, py, px, h, w);
        for (size_t i = 0; i < exit.size(); ++i) {
            const double ar = probe.data()[2 * i], ai = probe.data()[2 * i + 1];
            const double br = patch.data()[2 * i], bi = patch.data()[2 * i + 1];
            exit.data()[2 * i] = ar * br - ai * bi;
            exit.data()[2 * i + 1] = ar * bi + ai * br;
        }
        const ComplexField far = cfft2_centered(exit);
        auto frame = set.frame(j);
        for (size_t i = 0; i < far.size(); ++i) {
            const double re = far.data()[2 * i], im = far.data()[2 * i + 1];
            frame[i] = re * re + im * im;
        }
    }
    return set;
}

}  // namespace ptyinr
