#pragma once

#include <string>

#include "ptyinr/field.hpp"
#include "ptyinr/physics.hpp"
#include "ptyinr/rng.hpp"

namespace ptyinr {

/// Measurement degradation request. alpha scales the photon budget of the
/// Poisson stage; sigma is the additive Gaussian std.
struct NoiseSpec {
    std::string kind = "none";  // none | poisson | gaussian | mixed
    double alpha = 10.0;
    double sigma = 100.0;
    uint64_t seed = 0;

    void validate() const;
};

/// Ground truth pair: |object| <= 1 everywhere, max|probe| = 1.
struct Phantom {
    ComplexField object;
    ComplexField probe;
    std::string description;
};

/// kind: siemens (radial spoke star), blobs (smooth Gaussian mixtures),
/// checker (piecewise constant). The probe is always a focused Airy-like
/// spot: centered FT of a circular aperture carrying a quadratic phase,
/// max-normalized.
Phantom make_phantom(const std::string& kind, int object_rows, int object_cols, int probe_rows,
                     int probe_cols, Rng& rng);

/// The phantom illumination on its own: focused Airy-like spot, max |P| = 1.
ComplexField make_focused_probe(int rows, int cols);

/// (max(I)/alpha) * Poisson(I * alpha / max(I)), with max taken over the
/// whole set. All-zero input is returned unchanged.
void add_poisson(DiffractionSet& set, double alpha, const Rng& rng);

/// Adds N(0, sigma^2) per pixel, then clamps negatives to zero.
void add_gaussian(DiffractionSet& set, double sigma, const Rng& rng);

/// Poisson stage, then Gaussian stage, then clip.
void add_mixed(DiffractionSet& set, double alpha, double sigma, const Rng& rng);

struct Dataset {
    DiffractionSet data;
    Phantom truth;
};

/// Scan + forward model + noise, keeping the ground truth alongside.
Dataset build_dataset(const Phantom& phantom, int step_y, int step_x, const NoiseSpec& noise);

}  // namespace ptyinr
