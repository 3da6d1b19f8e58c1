#pragma once

#include "ptyinr/field.hpp"

namespace ptyinr {

/// Orthonormal centered 2D DFT: index-shift so the zero frequency sits at
/// (rows/2, cols/2) on both sides, scaled by 1/sqrt(rows*cols). With this
/// scaling the transform is unitary, so the inverse is also the adjoint.
/// Throws on non-finite input.
ComplexField cfft2_centered(const ComplexField& f);

/// Inverse of cfft2_centered (same centering and scaling convention).
ComplexField cifft2_centered(const ComplexField& f);

}  // namespace ptyinr
