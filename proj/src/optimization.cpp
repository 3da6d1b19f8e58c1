#include "ptyinr/optimization.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ptyinr {

void LossConfig::validate() const {
    if (beta <= 0.0) throw std::invalid_argument("loss beta must be positive");
    if (lambda < 0.0) throw std::invalid_argument("loss lambda must be nonnegative");
    if (k < 0) throw std::invalid_argument("loss k must be nonnegative");
}

double smooth_l1(std::span<const double> sqrt_im, std::span<const double> sqrt_ip, double beta) {
    if (sqrt_im.size() != sqrt_ip.size()) throw std::invalid_argument("shape mismatch");
    if (beta <= 0.0) throw std::invalid_argument("loss beta must be positive");
    if (sqrt_im.empty()) throw std::invalid_argument("empty loss input");
    double s = 0.0;
    for (size_t i = 0; i < sqrt_im.size(); ++i) {
        const double r = sqrt_im[i] - sqrt_ip[i];
        s += std::fabs(r) < beta ? r * r / (2.0 * beta) : std::fabs(r) - beta / 2.0;
    }
    return s / static_cast<double>(sqrt_im.size());
}

double ptyinr_loss(std::span<const double> im, std::span<const double> ip, const LossConfig& cfg,
                   int64_t t, std::span<const double> probe_amplitude) {
    cfg.validate();
    if (t < 0) throw std::invalid_argument("step counter must be nonnegative");
    if (im.size() != ip.size()) throw std::invalid_argument("shape mismatch");
    std::vector<double> sm(im.size()), sp(ip.size());
    for (size_t i = 0; i < im.size(); ++i) {
        if (im[i] < 0.0 || ip[i] < 0.0) throw std::invalid_argument("negative intensity");
        sm[i] = std::sqrt(im[i]);
        sp[i] = std::sqrt(ip[i]);
    }
    double total = smooth_l1(sm, sp, cfg.beta);
    if (t <= cfg.k && !probe_amplitude.empty()) {
        double mean = 0.0;
        for (double a : probe_amplitude) {
            if (a < 0.0) throw std::invalid_argument("negative probe amplitude");
            mean += a;
        }
        mean /= static_cast<double>(probe_amplitude.size());
        total += cfg.lambda * mean;
    }
    return total;
}

AdamState AdamState::make(const ParamStore& store, double lr) {
    AdamState s;
    s.m.assign(store.total(), 0.0);
    s.v.assign(store.total(), 0.0);
    s.lr = lr;
    return s;
}

void adam_step(ParamStore& store, AdamState& state) {
    const size_t n = store.total();
    if (state.m.size() != n || state.v.size() != n)
        throw std::invalid_argument("adam state size mismatch");
    if (!state.segment_lr.empty() && state.segment_lr.size() != store.segment_count())
        throw std::invalid_argument("adam segment learning-rate table size mismatch");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    auto values = store.values();
    auto grads = store.grads();
    for (size_t si = 0; si < store.segment_count(); ++si) {
        const auto& seg = store.segment(si);
        const double lr = state.segment_lr.empty() ? state.lr : state.segment_lr[si];
        for (size_t i = seg.offset; i < seg.offset + seg.length; ++i) {
            const double g = grads[i];
            if (!std::isfinite(g))
                throw std::runtime_error("non-finite gradient in segment " + seg.name);
            state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
            state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = state.m[i] / bc1;
            const double vhat = state.v[i] / bc2;
            values[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace ptyinr
