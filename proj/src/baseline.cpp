#include "ptyinr/baseline.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ptyinr/fft.hpp"
#include "ptyinr/rng.hpp"

namespace ptyinr {

void EpieConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("epie iterations must be at least 1");
    if (!(alpha_obj > 0.0 && alpha_obj <= 2.0) || !(alpha_probe > 0.0 && alpha_probe <= 2.0))
        throw std::invalid_argument("epie step sizes must lie in (0, 2]");
    if (probe_mode != "learn" && probe_mode != "fixed")
        throw std::invalid_argument("probe_mode must be learn or fixed");
}

uint64_t EpieConfig::hash() const {
    std::ostringstream os;
    os.precision(17);
    os << "epie\niterations=" << iterations << "\nalpha_obj=" << alpha_obj
       << "\nalpha_probe=" << alpha_probe << "\nprobe_mode=" << probe_mode << "\nseed=" << seed
       << '\n';
    return fnv1a64(os.str());
}

ReconResult epie_reconstruct(const DiffractionSet& data, const ComplexField& init_object,
                             const ComplexField& init_probe, const EpieConfig& cfg) {
    cfg.validate();
    data.validate();
    const ScanGrid& grid = data.grid;
    if (init_object.rows() != grid.object_rows || init_object.cols() != grid.object_cols ||
        init_probe.rows() != grid.probe_rows || init_probe.cols() != grid.probe_cols)
        throw std::invalid_argument("shape mismatch");
    if (!init_object.finite() || !init_probe.finite())
        throw std::invalid_argument("non-finite field");

    ComplexField object = init_object;
    ComplexField probe = init_probe;
    const int h = grid.probe_rows, w = grid.probe_cols;
    const size_t npix = static_cast<size_t>(h) * w;
    const size_t frames = data.frame_count();
    const bool learn_probe = cfg.probe_mode == "learn";

    std::vector<std::vector<double>> sqrt_im(frames);
    for (size_t j = 0; j < frames; ++j) {
        auto f = data.frame(j);
        sqrt_im[j].resize(npix);
        for (size_t i = 0; i < npix; ++i) sqrt_im[j][i] = std::sqrt(f[i]);
    }

    const Rng shuffle_stream = Rng(cfg.seed).stream("shuffle");
    std::vector<size_t> perm(frames);
    ComplexField psi(h, w), psi_prime(h, w);
    std::vector<double> history;
    history.reserve(cfg.iterations);

    for (int64_t iter = 0; iter < cfg.iterations; ++iter) {
        std::iota(perm.begin(), perm.end(), size_t{0});
        Rng rs = shuffle_stream.substream(static_cast<uint64_t>(iter));
        rs.shuffle(perm);

        double fourier_err = 0.0;
        for (size_t j : perm) {
            const auto [py, px] = grid.positions[j];
            const ComplexField patch = crop(object, py, px, h, w);

            for (size_t i = 0; i < npix; ++i)
                psi.c(i) = probe.c(i) * patch.c(i);
            const ComplexField far = cfft2_centered(psi);

            const auto& sq = sqrt_im[j];
            for (size_t i = 0; i < npix; ++i) {
                const double mag = std::abs(far.c(i));
                const double d = mag - sq[i];
                fourier_err += d * d;
                psi_prime.c(i) = mag < 1e-12 ? std::complex<double>(sq[i], 0.0)
                                             : far.c(i) * (sq[i] / mag);
            }
            const ComplexField back = cifft2_centered(psi_prime);

            double max_p2 = 0.0, max_o2 = 0.0;
            for (size_t i = 0; i < npix; ++i) {
                max_p2 = std::max(max_p2, std::norm(probe.c(i)));
                max_o2 = std::max(max_o2, std::norm(patch.c(i)));
            }
            if (max_p2 <= 0.0) throw std::runtime_error("degenerate probe");

            for (size_t i = 0; i < npix; ++i) {
                const std::complex<double> diff = back.c(i) - psi.c(i);
                object.at(py + static_cast<int>(i) / w, px + static_cast<int>(i) % w) +=
                    cfg.alpha_obj * std::conj(probe.c(i)) / max_p2 * diff;
                if (learn_probe && max_o2 > 0.0)
                    probe.c(i) += cfg.alpha_probe * std::conj(patch.c(i)) / max_o2 * diff;
            }
        }
        if (!object.finite() || !probe.finite())
            throw std::runtime_error("non-finite field at iteration " + std::to_string(iter));
        history.push_back(fourier_err);
    }

    ReconResult res;
    res.object = std::move(object);
    res.probe = std::move(probe);
    res.loss_history = std::move(history);
    res.config_hash = cfg.hash();
    res.seed = cfg.seed;
    return res;
}

ComplexField epie_default_object(int rows, int cols) {
    return ComplexField::constant(rows, cols, {1.0, 0.0});
}

ComplexField epie_default_probe(int rows, int cols) {
    ComplexField p(rows, cols);
    const double cy = rows / 2, cx = cols / 2;
    const double radius = std::min(rows, cols) / 4.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (std::hypot(r - cy, c - cx) <= radius) p.at(r, c) = {1.0, 0.0};
    return p;
}

}  // namespace ptyinr
