#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ptyinr/param_store.hpp"
#include "ptyinr/rng.hpp"

namespace ptyinr {

// Evaluates the scalar loss at the store's current parameter values.
// When with_grad is true the implementation must also write d(loss)/d(params)
// into the store's gradient buffer.
using LossFn = std::function<double(ParamStore&, bool with_grad)>;

struct GradCheckEntry {
    size_t index = 0;
    std::string segment;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
    bool suspected_kink = false;
    bool below_noise = false;  // gap within the secant's cancellation noise
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    double mean_rel_err = 0.0;
    size_t checked = 0;
    size_t kinks_flagged = 0;
    size_t below_noise_floor = 0;
    GradCheckEntry worst;
    std::vector<GradCheckEntry> entries;

    bool passes(double tol) const { return max_rel_err < tol; }
};

// Central-difference check of analytic gradients on a random parameter subset.
// Throws std::runtime_error if two evaluations at the same point disagree
// bitwise, since a nondeterministic loss makes the comparison meaningless.
GradCheckReport finite_diff_check(const LossFn& loss, ParamStore& store, size_t n_samples,
                                  double step, uint64_t seed);

}  // namespace ptyinr
