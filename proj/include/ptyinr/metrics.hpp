#pragma once

#include <span>
#include <string>
#include <vector>

#include "ptyinr/engine.hpp"
#include "ptyinr/field.hpp"
#include "ptyinr/simulate.hpp"

namespace ptyinr {

/// 10*log10(max^2 / MSE); identical inputs give +infinity.
double psnr(std::span<const double> image, std::span<const double> reference, double max_value);

/// Wrap into [-pi, pi].
double wrap_angle(double x);

struct PhaseAlignment {
    double theta = 0.0;       // radians applied to the reconstruction
    ComplexField aligned;     // recon * exp(i*theta)
};

/// Removes the global phase gauge: finds the theta minimizing the summed
/// squared wrapped angular difference to the truth via a 4096-point scan
/// refined by golden-section search to 1e-6 rad.
PhaseAlignment align_global_phase(const ComplexField& recon, const ComplexField& truth);

struct FrcCurve {
    std::vector<double> frequencies;   // ring index / Nyquist, in [0, 1]
    std::vector<double> correlations;  // Re part of the normalized ring sum
    std::vector<double> imag_residue;  // Im part, reported separately
    std::vector<size_t> ring_counts;
};

/// Fourier ring correlation over integer-radius annuli around the centered DC.
FrcCurve frc(const ComplexField& a, const ComplexField& b);

double half_bit_threshold(size_t ring_count);

/// First crossing of the half-bit threshold (linearly interpolated between
/// rings); Nyquist when the curve never crosses.
double half_bit_resolution(const FrcCurve& curve);

struct MetricReport {
    double theta_star_rad = 0.0;
    double object_amplitude_psnr_db = 0.0;
    double object_phase_psnr_db = 0.0;
    double probe_amplitude_psnr_db = 0.0;
    double probe_phase_psnr_db = 0.0;
    bool has_frc = false;
    double frc_half_bit_frequency = 0.0;
    FrcCurve frc_curve;

    /// key = value lines.
    std::string to_text() const;
    /// ring_frequency,correlation,threshold,n rows.
    std::string frc_csv() const;
};

/// Aligns the reconstruction's global phase against the truth, then reports
/// amplitude/phase PSNR for object and probe. margin crops that many pixels
/// off every object edge first (probe windows see less of the rim, so edge
/// pixels are weakly constrained for every method). second_object, when
/// given, is an independent reconstruction used for the FRC split.
MetricReport evaluate(const ReconResult& recon, const Phantom& truth, int margin = 0,
                      const ComplexField* second_object = nullptr);

}  // namespace ptyinr
