#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "ptyinr/engine.hpp"
#include "ptyinr/metrics.hpp"
#include "ptyinr/rng.hpp"
#include "ptyinr/simulate.hpp"

using namespace ptyinr;
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

namespace {

ComplexField rotated(const ComplexField& f, double theta) {
    ComplexField out(f.rows(), f.cols());
    for (size_t i = 0; i < f.size(); ++i) out.c(i) = f.c(i) * std::polar(1.0, theta);
    return out;
}

Phantom test_phantom(int n, int p, uint64_t seed) {
    Rng rng(seed);
    return make_phantom("blobs", n, n, p, p, rng);
}

}  // namespace

TEST_CASE("psnr against the direct formula") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 16 + static_cast<size_t>(rng.below(64));
        std::vector<double> img(n), ref(n);
        for (size_t i = 0; i < n; ++i) {
            ref[i] = rng.uniform(0.0, 2.0);
            img[i] = ref[i] + rng.uniform(-0.3, 0.3);
        }
        const double mx = rng.uniform(0.5, 3.0);
        double mse = 0.0;
        for (size_t i = 0; i < n; ++i) mse += (img[i] - ref[i]) * (img[i] - ref[i]);
        mse /= static_cast<double>(n);
        const double expect = 10.0 * std::log10(mx * mx / mse);
        CHECK(psnr(img, ref, mx) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("psnr fixed examples") {
    std::vector<double> ref(100, 0.0);
    std::vector<double> img(100, 0.1);
    CHECK(psnr(img, ref, 1.0) == doctest::Approx(20.0).epsilon(1e-12));

    std::vector<double> same = {0.25, 0.5, 0.75};
    const double inf = psnr(same, same, 1.0);
    CHECK(std::isinf(inf));
    CHECK(inf > 0.0);
}

TEST_CASE("psnr argument checks") {
    std::vector<double> a = {1.0, 2.0};
    std::vector<double> b = {1.0};
    CHECK_THROWS_WITH(psnr(a, b, 1.0), "shape mismatch in psnr");
    std::vector<double> e;
    CHECK_THROWS_WITH(psnr(e, e, 1.0), "empty image in psnr");
    CHECK_THROWS_WITH(psnr(a, a, 0.0), "psnr max_value must be positive");
    CHECK_THROWS_WITH(psnr(a, a, -2.0), "psnr max_value must be positive");
}

TEST_CASE("wrap_angle lands in [-pi, pi]") {
    CHECK(wrap_angle(0.3) == doctest::Approx(0.3));
    CHECK(wrap_angle(kPi + 0.1) == doctest::Approx(-kPi + 0.1));
    CHECK(wrap_angle(-kPi - 0.1) == doctest::Approx(kPi - 0.1));
    CHECK(wrap_angle(7.0 * kPi + 0.2) == doctest::Approx(-kPi + 0.2));
    CHECK(wrap_angle(kTwoPi) == doctest::Approx(0.0));
    CHECK(wrap_angle(-6.0 * kPi) == doctest::Approx(0.0));
}

TEST_CASE("align_global_phase recovers a planted rotation") {
    Rng rng(5);
    ComplexField truth(16, 16);
    for (size_t i = 0; i < truth.size(); ++i)
        truth.c(i) = std::polar(rng.uniform(0.3, 1.0), rng.uniform(-1.3, 1.3));

    for (double theta0 : {0.7, -2.1, 3.0}) {
        ComplexField recon = rotated(truth, -theta0);
        PhaseAlignment al = align_global_phase(recon, truth);
        CHECK(std::fabs(wrap_angle(al.theta - theta0)) < 1e-5);
        double worst = 0.0;
        for (size_t i = 0; i < truth.size(); ++i)
            worst = std::max(worst, std::abs(al.aligned.c(i) - truth.c(i)));
        CHECK(worst < 1e-5);
    }

    PhaseAlignment self = align_global_phase(truth, truth);
    CHECK(std::fabs(self.theta) < 1e-5);
}

TEST_CASE("align_global_phase matches a dense scan") {
    Rng rng(9);
    ComplexField truth(16, 16);
    ComplexField recon(16, 16);
    for (size_t i = 0; i < truth.size(); ++i) {
        truth.c(i) = std::polar(rng.uniform(0.3, 1.0), rng.uniform(-2.0, 2.0));
        recon.c(i) = truth.c(i) * std::polar(1.0, -1.234 + rng.uniform(-0.05, 0.05));
    }
    std::vector<double> diffs(truth.size());
    for (size_t i = 0; i < truth.size(); ++i)
        diffs[i] = wrap_angle(std::arg(truth.c(i)) - std::arg(recon.c(i)));
    double best = std::numeric_limits<double>::infinity();
    double best_theta = 0.0;
    const int dense = 200001;
    for (int k = 0; k < dense; ++k) {
        const double theta = -kPi + kTwoPi * static_cast<double>(k) / dense;
        double acc = 0.0;
        for (double d : diffs) {
            const double w = wrap_angle(d - theta);
            acc += w * w;
        }
        if (acc < best) {
            best = acc;
            best_theta = theta;
        }
    }
    PhaseAlignment al = align_global_phase(recon, truth);
    CHECK(std::fabs(wrap_angle(al.theta - best_theta)) < 1e-4);
}

TEST_CASE("align_global_phase argument checks") {
    ComplexField a(4, 4), b(4, 5);
    CHECK_THROWS_WITH(align_global_phase(ComplexField::constant(4, 4, {1, 0}), b),
                      "shape mismatch in align_global_phase");
    CHECK_THROWS_WITH(align_global_phase(a, ComplexField::constant(4, 4, {1, 0})),
                      "all-zero field in align_global_phase");
}

TEST_CASE("frc of a field with itself is one") {
    Rng rng(13);
    ComplexField f(32, 32);
    for (size_t i = 0; i < f.size(); ++i)
        f.c(i) = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    FrcCurve c = frc(f, f);
    REQUIRE(c.frequencies.size() == 17);
    CHECK(c.frequencies.front() == 0.0);
    CHECK(c.frequencies.back() == 1.0);
    for (size_t r = 0; r < c.frequencies.size(); ++r) {
        CHECK(c.ring_counts[r] > 0);
        CHECK(c.correlations[r] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::fabs(c.imag_residue[r]) < 1e-12);
    }
    CHECK(half_bit_resolution(c) == 1.0);
}

TEST_CASE("frc is scale invariant and conjugate symmetric") {
    Rng rng(17);
    ComplexField a(24, 24), b(24, 24);
    for (size_t i = 0; i < a.size(); ++i) {
        a.c(i) = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        b.c(i) = a.c(i) + 0.4 * std::complex<double>(rng.uniform(-1.0, 1.0),
                                                     rng.uniform(-1.0, 1.0));
    }
    ComplexField b_scaled(24, 24);
    for (size_t i = 0; i < b.size(); ++i) b_scaled.c(i) = 2.5 * b.c(i);

    FrcCurve ab = frc(a, b);
    FrcCurve ab2 = frc(a, b_scaled);
    FrcCurve ba = frc(b, a);
    for (size_t r = 0; r < ab.frequencies.size(); ++r) {
        CHECK(ab2.correlations[r] == doctest::Approx(ab.correlations[r]).epsilon(1e-12));
        CHECK(ba.correlations[r] == doctest::Approx(ab.correlations[r]).epsilon(1e-12));
        CHECK(ba.imag_residue[r] == doctest::Approx(-ab.imag_residue[r]).epsilon(1e-10));
    }
}

TEST_CASE("frc of independent noise stays low") {
    Rng rng(21);
    ComplexField a(64, 64), b(64, 64);
    for (size_t i = 0; i < a.size(); ++i) {
        a.c(i) = {rng.normal(), rng.normal()};
        b.c(i) = {rng.normal(), rng.normal()};
    }
    FrcCurve c = frc(a, b);
    for (size_t r = 0; r < c.frequencies.size(); ++r) {
        if (c.ring_counts[r] >= 50) CHECK(std::fabs(c.correlations[r]) < 0.35);
    }
}

TEST_CASE("frc requires matching square fields") {
    ComplexField a(8, 8), b(8, 9);
    CHECK_THROWS_WITH(frc(a, b), "frc requires matching square fields");
    ComplexField c(8, 9), d(8, 9);
    CHECK_THROWS_WITH(frc(c, d), "frc requires matching square fields");
}

TEST_CASE("half-bit threshold") {
    CHECK(half_bit_threshold(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(half_bit_threshold(4) == doctest::Approx(1.1622 / 1.6622).epsilon(1e-12));
    for (size_t n : {2, 4, 16, 64, 256, 1024})
        CHECK(half_bit_threshold(n) > half_bit_threshold(4 * n));
    CHECK(half_bit_threshold(1000000000000ULL) ==
          doctest::Approx(0.2071 / 1.2071).epsilon(1e-3));
    CHECK_THROWS(half_bit_threshold(0));
}

TEST_CASE("half-bit resolution interpolates the crossing") {
    FrcCurve c;
    c.frequencies = {0.0, 0.25, 0.5, 0.75, 1.0};
    c.correlations = {1.0, 0.9, 0.5, 0.3, 0.05};
    c.ring_counts = {1, 1000, 1000, 1000, 1000};
    c.imag_residue.assign(5, 0.0);
    const double T = half_bit_threshold(1000);
    const double d3 = 0.3 - T;
    const double d4 = 0.05 - T;
    const double expect = 0.75 + 0.25 * d3 / (d3 - d4);
    CHECK(half_bit_resolution(c) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("half-bit resolution edge cases") {
    FrcCurve high;
    high.frequencies = {0.0, 0.5, 1.0};
    high.correlations = {1.0, 0.95, 0.9};
    high.ring_counts = {1, 100, 200};
    CHECK(half_bit_resolution(high) == 1.0);  // never crosses

    FrcCurve first;
    first.frequencies = {0.0, 0.5, 1.0};
    first.correlations = {0.5, 0.1, 0.05};  // below threshold from the start
    first.ring_counts = {1, 100, 200};
    CHECK(half_bit_resolution(first) == 0.0);

    FrcCurve dc_only;
    dc_only.frequencies = {0.0};
    dc_only.correlations = {0.97};  // the uninformative single-pixel ring
    dc_only.ring_counts = {1};
    CHECK(half_bit_resolution(dc_only) == 0.0);

    FrcCurve empty;
    CHECK_THROWS_WITH(half_bit_resolution(empty), "empty curve in half_bit_resolution");

    FrcCurve bad;
    bad.frequencies = {0.0, 1.0};
    bad.correlations = {1.0};
    bad.ring_counts = {1, 2};
    CHECK_THROWS(half_bit_resolution(bad));
}

TEST_CASE("evaluate on the exact truth is near-perfect") {
    Phantom truth = test_phantom(32, 16, 3);
    ReconResult recon;
    recon.object = truth.object;
    recon.probe = truth.probe;
    MetricReport rep = evaluate(recon, truth);
    CHECK(std::fabs(rep.theta_star_rad) < 1e-5);
    CHECK(rep.object_amplitude_psnr_db > 150.0);
    CHECK(rep.object_phase_psnr_db > 100.0);
    CHECK(rep.probe_amplitude_psnr_db > 150.0);
    CHECK(rep.probe_phase_psnr_db > 100.0);
    CHECK_FALSE(rep.has_frc);
}

TEST_CASE("evaluate is immune to the global phase gauge") {
    Phantom truth = test_phantom(32, 16, 7);
    for (double phi : {0.6, -1.9}) {
        ReconResult recon;
        recon.object = rotated(truth.object, phi);
        recon.probe = rotated(truth.probe, -phi);
        MetricReport rep = evaluate(recon, truth);
        CHECK(std::fabs(wrap_angle(rep.theta_star_rad + phi)) < 1e-5);
        CHECK(rep.object_phase_psnr_db > 100.0);
        CHECK(rep.probe_phase_psnr_db > 100.0);
        CHECK(rep.object_amplitude_psnr_db > 150.0);
    }
}

TEST_CASE("evaluate reports known amplitude damage") {
    Phantom truth = test_phantom(32, 16, 11);
    Rng rng(23);
    ReconResult recon;
    recon.object = truth.object;
    recon.probe = truth.probe;
    double mse = 0.0;
    for (size_t i = 0; i < recon.object.size(); ++i) {
        const double a = std::abs(truth.object.c(i));
        const double ph = std::arg(truth.object.c(i));
        const double na = a + rng.uniform(-0.01, 0.01);
        recon.object.c(i) = std::polar(na, ph);
        mse += (na - a) * (na - a);
    }
    mse /= static_cast<double>(recon.object.size());
    double amax = 0.0;
    for (double a : truth.object.amplitude()) amax = std::max(amax, a);
    const double expect = 10.0 * std::log10(amax * amax / mse);

    MetricReport rep = evaluate(recon, truth);
    CHECK(rep.object_amplitude_psnr_db == doctest::Approx(expect).epsilon(1e-3));
    CHECK(rep.object_phase_psnr_db > 100.0);
}

TEST_CASE("evaluate margin drops rim damage") {
    Phantom truth = test_phantom(32, 16, 13);
    ReconResult recon;
    recon.object = truth.object;
    recon.probe = truth.probe;
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c)
            if (r < 2 || r >= 30 || c < 2 || c >= 30)
                recon.object.at(r, c) = {0.01, 0.0};

    MetricReport noisy = evaluate(recon, truth, 0);
    MetricReport clean = evaluate(recon, truth, 2);
    CHECK(noisy.object_amplitude_psnr_db < 30.0);
    CHECK(clean.object_amplitude_psnr_db > 100.0);

    CHECK_THROWS_WITH(evaluate(recon, truth, -1), "margin must be nonnegative");
    CHECK_THROWS_WITH(evaluate(recon, truth, 16), "margin leaves no interior pixels");
}

TEST_CASE("evaluate rejects mismatched shapes") {
    Phantom truth = test_phantom(32, 16, 17);
    ReconResult recon;
    recon.object = ComplexField(16, 16);
    recon.probe = truth.probe;
    CHECK_THROWS_WITH(evaluate(recon, truth),
                      "shape mismatch between reconstructed and truth object");
    recon.object = truth.object;
    recon.probe = ComplexField(8, 8);
    CHECK_THROWS_WITH(evaluate(recon, truth),
                      "shape mismatch between reconstructed and truth probe");
}

TEST_CASE("evaluate runs the frc split when given a partner") {
    Phantom truth = test_phantom(32, 16, 19);
    Rng rng(29);
    ReconResult recon;
    recon.object = truth.object;
    recon.probe = truth.probe;
    ComplexField second = truth.object;
    for (size_t i = 0; i < second.size(); ++i) {
        recon.object.c(i) += 0.01 * std::complex<double>(rng.normal(), rng.normal());
        second.c(i) += 0.01 * std::complex<double>(rng.normal(), rng.normal());
    }
    MetricReport rep = evaluate(recon, truth, 0, &second);
    CHECK(rep.has_frc);
    CHECK(rep.frc_half_bit_frequency > 0.0);
    CHECK(rep.frc_half_bit_frequency <= 1.0);
    REQUIRE(rep.frc_curve.frequencies.size() == 17);

    const std::string text = rep.to_text();
    CHECK(text.find("theta_star_rad = ") != std::string::npos);
    CHECK(text.find("object_amplitude_psnr_db = ") != std::string::npos);
    CHECK(text.find("object_phase_psnr_db = ") != std::string::npos);
    CHECK(text.find("probe_amplitude_psnr_db = ") != std::string::npos);
    CHECK(text.find("probe_phase_psnr_db = ") != std::string::npos);
    CHECK(text.find("frc_half_bit_frequency = ") != std::string::npos);

    const std::string csv = rep.frc_csv();
    CHECK(csv.rfind("ring_frequency,correlation,threshold,n\n", 0) == 0);
    size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 18);
}
