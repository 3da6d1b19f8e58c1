#include "ptyinr/metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ptyinr/fft.hpp"

namespace ptyinr {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

double psnr(std::span<const double> image, std::span<const double> reference, double max_value) {
    if (image.size() != reference.size()) throw std::invalid_argument("shape mismatch in psnr");
    if (image.empty()) throw std::invalid_argument("empty image in psnr");
    if (!(max_value > 0.0)) throw std::invalid_argument("psnr max_value must be positive");
    double mse = 0.0;
    for (size_t i = 0; i < image.size(); ++i) {
        const double d = image[i] - reference[i];
        mse += d * d;
    }
    mse /= static_cast<double>(image.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_value * max_value / mse);
}

double wrap_angle(double x) { return std::remainder(x, kTwoPi); }

namespace {

double phase_objective(const std::vector<double>& diffs, double theta) {
    double acc = 0.0;
    for (double d : diffs) {
        const double w = wrap_angle(d - theta);
        acc += w * w;
    }
    return acc;
}

}  // namespace

PhaseAlignment align_global_phase(const ComplexField& recon, const ComplexField& truth) {
    if (recon.rows() != truth.rows() || recon.cols() != truth.cols())
        throw std::invalid_argument("shape mismatch in align_global_phase");
    if (recon.max_abs() == 0.0 || truth.max_abs() == 0.0)
        throw std::invalid_argument("all-zero field in align_global_phase");

    const size_t n = recon.size();
    std::vector<double> diffs(n);
    for (size_t i = 0; i < n; ++i)
        diffs[i] = wrap_angle(std::arg(truth.c(i)) - std::arg(recon.c(i)));

    constexpr size_t kScan = 4096;
    double best = std::numeric_limits<double>::infinity();
    double theta0 = 0.0;
    for (size_t k = 0; k < kScan; ++k) {
        const double theta = -kPi + kTwoPi * static_cast<double>(k) / kScan;
        const double e = phase_objective(diffs, theta);
        if (e < best) {
            best = e;
            theta0 = theta;
        }
    }

    const double step = kTwoPi / kScan;
    double a = theta0 - step;
    double b = theta0 + step;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a);
    double x2 = a + gr * (b - a);
    double f1 = phase_objective(diffs, x1);
    double f2 = phase_objective(diffs, x2);
    while (b - a > 1e-6) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = phase_objective(diffs, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = phase_objective(diffs, x2);
        }
    }

    PhaseAlignment out;
    out.theta = wrap_angle(0.5 * (a + b));
    out.aligned = ComplexField(recon.rows(), recon.cols());
    const double c = std::cos(out.theta);
    const double s = std::sin(out.theta);
    for (size_t i = 0; i < n; ++i) {
        const std::complex<double> z = recon.c(i);
        out.aligned.c(i) = {z.real() * c - z.imag() * s, z.real() * s + z.imag() * c};
    }
    return out;
}

FrcCurve frc(const ComplexField& a, const ComplexField& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
        throw std::invalid_argument("frc requires matching square fields");
    const int n = a.rows();
    const ComplexField fa = cfft2_centered(a);
    const ComplexField fb = cfft2_centered(b);

    const size_t nyquist = static_cast<size_t>(n) / 2;
    const size_t rings = nyquist + 1;
    std::vector<double> num_re(rings, 0.0), num_im(rings, 0.0);
    std::vector<double> e1(rings, 0.0), e2(rings, 0.0);
    std::vector<size_t> counts(rings, 0);

    const double cy = static_cast<double>(n / 2);
    const double cx = static_cast<double>(n / 2);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double rho = std::hypot(y - cy, x - cx);
            const long ring = std::lround(rho);
            if (ring < 0 || static_cast<size_t>(ring) >= rings) continue;
            const std::complex<double> za = fa.at(y, x);
            const std::complex<double> zb = fb.at(y, x);
            num_re[ring] += za.real() * zb.real() + za.imag() * zb.imag();
            num_im[ring] += za.imag() * zb.real() - za.real() * zb.imag();
            e1[ring] += std::norm(za);
            e2[ring] += std::norm(zb);
            counts[ring] += 1;
        }
    }

    FrcCurve out;
    out.frequencies.resize(rings);
    out.correlations.resize(rings);
    out.imag_residue.resize(rings);
    out.ring_counts = counts;
    for (size_t r = 0; r < rings; ++r) {
        out.frequencies[r] = static_cast<double>(r) / static_cast<double>(nyquist);
        const double denom = std::sqrt(e1[r] * e2[r]);
        if (denom == 0.0) {
            out.correlations[r] = (e1[r] == 0.0 && e2[r] == 0.0) ? 1.0 : 0.0;
            out.imag_residue[r] = 0.0;
        } else {
            out.correlations[r] = num_re[r] / denom;
            out.imag_residue[r] = num_im[r] / denom;
        }
    }
    return out;
}

double half_bit_threshold(size_t ring_count) {
    if (ring_count == 0) throw std::invalid_argument("half_bit_threshold needs a nonempty ring");
    const double rn = 1.0 / std::sqrt(static_cast<double>(ring_count));
    return (0.2071 + 1.9102 * rn) / (1.2071 + 0.9102 * rn);
}

double half_bit_resolution(const FrcCurve& curve) {
    if (curve.frequencies.empty()) throw std::invalid_argument("empty curve in half_bit_resolution");
    if (curve.correlations.size() != curve.frequencies.size() ||
        curve.ring_counts.size() != curve.frequencies.size())
        throw std::invalid_argument("inconsistent curve in half_bit_resolution");

    // The DC ring holds one pixel and its threshold saturates at 1, so it
    // cannot discriminate anything; the search starts at the first ring with
    // headroom. A curve already below threshold there has no resolved band.
    double prev_d = 0.0;
    bool have_prev = false;
    for (size_t r = 1; r < curve.frequencies.size(); ++r) {
        const double d = curve.correlations[r] - half_bit_threshold(curve.ring_counts[r]);
        if (d < 0.0) {
            if (!have_prev) return curve.frequencies[0];
            const double f0 = curve.frequencies[r - 1];
            const double f1 = curve.frequencies[r];
            return f0 + (f1 - f0) * prev_d / (prev_d - d);
        }
        prev_d = d;
        have_prev = true;
    }
    return curve.frequencies.back();
}

namespace {

std::vector<double> wrapped_phase_residual(const ComplexField& recon, const ComplexField& truth) {
    const size_t n = recon.size();
    std::vector<double> res(n);
    for (size_t i = 0; i < n; ++i)
        res[i] = wrap_angle(std::arg(recon.c(i)) - std::arg(truth.c(i)));
    return res;
}

double max_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
}

ComplexField rotate_field(const ComplexField& f, double theta) {
    ComplexField out(f.rows(), f.cols());
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (size_t i = 0; i < f.size(); ++i) {
        const std::complex<double> z = f.c(i);
        out.c(i) = {z.real() * c - z.imag() * s, z.real() * s + z.imag() * c};
    }
    return out;
}

}  // namespace

MetricReport evaluate(const ReconResult& recon, const Phantom& truth, int margin,
                      const ComplexField* second_object) {
    if (recon.object.rows() != truth.object.rows() || recon.object.cols() != truth.object.cols())
        throw std::invalid_argument("shape mismatch between reconstructed and truth object");
    if (recon.probe.rows() != truth.probe.rows() || recon.probe.cols() != truth.probe.cols())
        throw std::invalid_argument("shape mismatch between reconstructed and truth probe");
    if (margin < 0) throw std::invalid_argument("margin must be nonnegative");
    if (2 * margin >= recon.object.rows() || 2 * margin >= recon.object.cols())
        throw std::invalid_argument("margin leaves no interior pixels");

    const PhaseAlignment align = align_global_phase(recon.object, truth.object);

    const int rr = recon.object.rows() - 2 * margin;
    const int cc = recon.object.cols() - 2 * margin;
    const ComplexField obj = crop(align.aligned, margin, margin, rr, cc);
    const ComplexField obj_truth = crop(truth.object, margin, margin, rr, cc);

    MetricReport rep;
    rep.theta_star_rad = align.theta;

    const std::vector<double> amp_r = obj.amplitude();
    const std::vector<double> amp_t = obj_truth.amplitude();
    rep.object_amplitude_psnr_db = psnr(amp_r, amp_t, max_of(amp_t));

    const std::vector<double> ph_res = wrapped_phase_residual(obj, obj_truth);
    const std::vector<double> zeros(ph_res.size(), 0.0);
    rep.object_phase_psnr_db = psnr(ph_res, zeros, kTwoPi);

    // the object took exp(i*theta), so the probe carries the opposite factor
    const ComplexField probe = rotate_field(recon.probe, -align.theta);
    const std::vector<double> pamp_r = probe.amplitude();
    const std::vector<double> pamp_t = truth.probe.amplitude();
    rep.probe_amplitude_psnr_db = psnr(pamp_r, pamp_t, max_of(pamp_t));
    const std::vector<double> pph_res = wrapped_phase_residual(probe, truth.probe);
    const std::vector<double> pzeros(pph_res.size(), 0.0);
    rep.probe_phase_psnr_db = psnr(pph_res, pzeros, kTwoPi);

    if (second_object != nullptr) {
        const PhaseAlignment align2 = align_global_phase(*second_object, truth.object);
        const ComplexField obj2 = crop(align2.aligned, margin, margin, rr, cc);
        rep.frc_curve = frc(obj, obj2);
        rep.frc_half_bit_frequency = half_bit_resolution(rep.frc_curve);
        rep.has_frc = true;
    }
    return rep;
}

std::string MetricReport::to_text() const {
    std::ostringstream os;
    os.precision(9);
    os << "theta_star_rad = " << theta_star_rad << "\n";
    os << "object_amplitude_psnr_db = " << object_amplitude_psnr_db << "\n";
    os << "object_phase_psnr_db = " << object_phase_psnr_db << "\n";
    os << "probe_amplitude_psnr_db = " << probe_amplitude_psnr_db << "\n";
    os << "probe_phase_psnr_db = " << probe_phase_psnr_db << "\n";
    if (has_frc) os << "frc_half_bit_frequency = " << frc_half_bit_frequency << "\n";
    return os.str();
}

std::string MetricReport::frc_csv() const {
    std::ostringstream os;
    os.precision(9);
    os << "ring_frequency,correlation,threshold,n\n";
    for (size_t r = 0; r < frc_curve.frequencies.size(); ++r) {
        os << frc_curve.frequencies[r] << "," << frc_curve.correlations[r] << ","
           << half_bit_threshold(frc_curve.ring_counts[r]) << "," << frc_curve.ring_counts[r]
           << "\n";
    }
    return os.str();
}

}  // namespace ptyinr
