#pragma once

#include <cstdint>
#include <string>

#include "ptyinr/engine.hpp"
#include "ptyinr/field.hpp"
#include "ptyinr/physics.hpp"

namespace ptyinr {

struct EpieConfig {
    int64_t iterations = 200;
    double alpha_obj = 1.0;
    double alpha_probe = 1.0;
    std::string probe_mode = "learn";  // learn | fixed
    uint64_t seed = 0;

    void validate() const;
    uint64_t hash() const;
};

/// Classical ePIE sweep: per iteration, visit every position in a fresh
/// random permutation, replace the far-field modulus with the measurement,
/// and update object (and optionally probe) from the exit-wave difference.
/// loss_history records the Fourier-domain error sum (|Psi| - sqrt(Im))^2
/// per iteration.
ReconResult epie_reconstruct(const DiffractionSet& data, const ComplexField& init_object,
                             const ComplexField& init_probe, const EpieConfig& cfg);

/// Blind-start defaults: unit object, centered top-hat probe with diameter
/// half the window.
ComplexField epie_default_object(int rows, int cols);
ComplexField epie_default_probe(int rows, int cols);

}  // namespace ptyinr
