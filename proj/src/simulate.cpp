#include "ptyinr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ptyinr/fft.hpp"

namespace ptyinr {

void NoiseSpec::validate() const {
    if (kind != "none" && kind != "poisson" && kind != "gaussian" && kind != "mixed")
        throw std::invalid_argument("unknown noise kind: " + kind);
    if ((kind == "poisson" || kind == "mixed") && alpha <= 0.0)
        throw std::invalid_argument("noise alpha must be positive");
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be nonnegative");
}

namespace {

constexpr double kPi = std::numbers::pi;

double smoothstep01(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

/// Antialiased spoke value in [0, 1]. The transition width scales with the
/// angular footprint of one pixel at radius rho.
double star(double theta, double rho, int spokes, double offset) {
    const double t = std::sin(spokes * (theta + offset));
    const double delta = std::min(1.0, spokes / std::max(rho, 1.0));
    return smoothstep01((t + delta) / (2.0 * delta));
}

void fill_siemens(ComplexField& object) {
    const int rows = object.rows(), cols = object.cols();
    const int spokes = 16;
    const double cy = (rows - 1) / 2.0, cx = (cols - 1) / 2.0;
    const double outer = 0.48 * std::min(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double dy = r - cy, dx = c - cx;
            const double rho = std::hypot(dy, dx);
            const double theta = std::atan2(dy, dx);
            const double env = smoothstep01((outer - rho) / 1.5);
            const double sa = star(theta, rho, spokes, 0.0);
            const double sp = star(theta, rho, spokes, kPi / (2.0 * spokes));
            const double amp = 1.0 + env * (0.4 + 0.6 * sa - 1.0);
            const double ph = env * sp;
            object.at(r, c) = std::polar(amp, ph);
        }
}

std::vector<double> gaussian_mixture(int rows, int cols, Rng& rng) {
    const int k = 6;
    std::vector<double> ys(k), xs(k), ss(k), ws(k);
    for (int i = 0; i < k; ++i) {
        ys[i] = rng.uniform(0.1, 0.9) * rows;
        xs[i] = rng.uniform(0.1, 0.9) * cols;
        ss[i] = rng.uniform(0.1, 0.25) * std::min(rows, cols);
        ws[i] = rng.uniform(-1.0, 1.0);
    }
    std::vector<double> field(static_cast<size_t>(rows) * cols, 0.0);
    double peak = 0.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double v = 0.0;
            for (int i = 0; i < k; ++i) {
                const double d2 = (r - ys[i]) * (r - ys[i]) + (c - xs[i]) * (c - xs[i]);
                v += ws[i] * std::exp(-d2 / (2.0 * ss[i] * ss[i]));
            }
            field[static_cast<size_t>(r) * cols + c] = v;
            peak = std::max(peak, std::fabs(v));
        }
    if (peak > 0.0)
        for (double& v : field) v /= peak;
    return field;
}

void fill_blobs(ComplexField& object, Rng& rng) {
    const int rows = object.rows(), cols = object.cols();
    Rng ra = rng.stream("amp");
    Rng rp = rng.stream("phase");
    const auto ga = gaussian_mixture(rows, cols, ra);
    const auto gp = gaussian_mixture(rows, cols, rp);
    for (size_t i = 0; i < object.size(); ++i)
        object.c(i) = std::polar(0.65 + 0.3 * ga[i], 0.5 + 0.5 * gp[i]);
}

void fill_checker(ComplexField& object) {
    const int rows = object.rows(), cols = object.cols();
    const int tile = std::max(4, std::min(rows, cols) / 8);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const bool odd = ((r / tile) + (c / tile)) % 2 != 0;
            object.at(r, c) = std::polar(odd ? 1.0 : 0.5, odd ? 0.8 : 0.0);
        }
}

}  // namespace

ComplexField make_focused_probe(int rows, int cols) {
    // circular aperture with quadratic phase, transformed to the focal plane
    ComplexField aperture(rows, cols);
    const double cy = rows / 2, cx = cols / 2;
    const double radius = std::max(2.0, 0.085 * std::min(rows, cols));
    const double defocus = 1.5;  // radians of quadratic phase at the aperture edge
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double rho = std::hypot(r - cy, c - cx);
            const double a = smoothstep01((radius - rho) / 0.75);
            if (a > 0.0) {
                const double ph = defocus * (rho * rho) / (radius * radius);
                aperture.at(r, c) = std::polar(a, ph);
            }
        }
    ComplexField probe = cfft2_centered(aperture);
    const double m = probe.max_abs();
    for (double& x : probe.raw()) x /= m;
    return probe;
}

Phantom make_phantom(const std::string& kind, int object_rows, int object_cols, int probe_rows,
                     int probe_cols, Rng& rng) {
    if (object_rows < 16 || object_cols < 16 || probe_rows < 16 || probe_cols < 16)
        throw std::invalid_argument("phantom shapes must be at least 16");
    Phantom p;
    p.object = ComplexField(object_rows, object_cols);
    if (kind == "siemens") {
        fill_siemens(p.object);
    } else if (kind == "blobs") {
        fill_blobs(p.object, rng);
    } else if (kind == "checker") {
        fill_checker(p.object);
    } else {
        throw std::invalid_argument("unknown phantom kind: " + kind);
    }
    p.probe = make_focused_probe(probe_rows, probe_cols);
    p.description = kind;
    return p;
}

void add_poisson(DiffractionSet& set, double alpha, const Rng& rng) {
    if (alpha <= 0.0) throw std::invalid_argument("noise alpha must be positive");
    double peak = 0.0;
    for (double v : set.frames) {
        if (v < 0.0) throw std::invalid_argument("negative intensity");
        peak = std::max(peak, v);
    }
    if (peak == 0.0) return;
    const double scale = peak / alpha;
    const Rng base = rng.stream("poisson");
    for (size_t j = 0; j < set.frame_count(); ++j) {
        Rng rj = base.substream(j);
        auto frame = set.frame(j);
        for (double& v : frame)
            v = scale * static_cast<double>(rj.poisson(v * alpha / peak));
    }
}

void add_gaussian(DiffractionSet& set, double sigma, const Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be nonnegative");
    if (sigma == 0.0) return;
    const Rng base = rng.stream("gaussian");
    for (size_t j = 0; j < set.frame_count(); ++j) {
        Rng rj = base.substream(j);
        auto frame = set.frame(j);
        for (double& v : frame) {
            v += sigma * rj.normal();
            if (v < 0.0) v = 0.0;
        }
    }
}

void add_mixed(DiffractionSet& set, double alpha, double sigma, const Rng& rng) {
    add_poisson(set, alpha, rng);
    add_gaussian(set, sigma, rng);
}

Dataset build_dataset(const Phantom& phantom, int step_y, int step_x, const NoiseSpec& noise) {
    noise.validate();
    Dataset d;
    d.truth = phantom;
    const ScanGrid grid =
        make_scan_grid(phantom.object.rows(), phantom.object.cols(), phantom.probe.rows(),
                       phantom.probe.cols(), step_y, step_x);
    d.data = simulate_intensity(phantom.object, phantom.probe, grid);
    const Rng root(noise.seed);
    if (noise.kind == "poisson") {
        add_poisson(d.data, noise.alpha, root);
    } else if (noise.kind == "gaussian") {
        add_gaussian(d.data, noise.sigma, root);
    } else if (noise.kind == "mixed") {
        add_mixed(d.data, noise.alpha, noise.sigma, root);
    }
    d.data.noise.kind = noise.kind;
    d.data.noise.alpha = noise.alpha;
    d.data.noise.sigma = noise.sigma;
    d.data.noise.seed = noise.seed;
    return d;
}

}  // namespace ptyinr
