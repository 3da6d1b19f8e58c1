#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ptyinr/param_store.hpp"

namespace ptyinr {

/// Loss shape: SmoothL1 scale beta, probe-amplitude regularization weight
/// lambda, active while the step counter t <= k.
struct LossConfig {
    double beta = 1e-2;
    double lambda = 0.1;
    int64_t k = 0;

    void validate() const;
};

/// Elementwise piecewise residual on the given square roots, reduced by mean:
/// (1/2beta) r^2 where |r| < beta, |r| - beta/2 otherwise.
double smooth_l1(std::span<const double> sqrt_im, std::span<const double> sqrt_ip, double beta);

/// Full loss at step t: smooth_l1(sqrt(Im), sqrt(Ip), beta), plus
/// lambda * mean(probe_amplitude) iff t <= k and an amplitude is supplied.
/// Negative intensities are rejected.
double ptyinr_loss(std::span<const double> im, std::span<const double> ip, const LossConfig& cfg,
                   int64_t t, std::span<const double> probe_amplitude);

/// Bias-corrected Adam over the whole parameter vector, with an optional
/// per-segment learning-rate table.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 1e-4;
    std::vector<double> segment_lr;  // empty = use lr for every segment

    static AdamState make(const ParamStore& store, double lr = 1e-4);
};

/// One update from store.grads into store.values. The step counter is
/// incremented before bias correction. A non-finite gradient aborts with the
/// owning segment named.
void adam_step(ParamStore& store, AdamState& state);

}  // namespace ptyinr
