#pragma once

// Shared numeric kernels. The tape ops and the eager network evaluators both
// call these so the two paths stay bit-identical.

#include <Eigen/Dense>

#include <cmath>
#include <span>

namespace ptyinr::kernels {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// C = A[MxK] * B[KxN], row-major buffers.
inline void gemm(const double* a, const double* b, double* c, int m, int k, int n) {
    ConstMapMat A(a, m, k), B(b, k, n);
    MapMat C(c, m, n);
    C.noalias() = A * B;
}

// C += A[MxK] * B[KxN]
inline void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    ConstMapMat A(a, m, k), B(b, k, n);
    MapMat C(c, m, n);
    C.noalias() += A * B;
}

// C += A^T[KxM]^T... accumulate A^T * B where A is [MxK], B is [MxN] -> C [KxN]
inline void gemm_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    ConstMapMat A(a, m, k), B(b, m, n);
    MapMat C(c, k, n);
    C.noalias() += A.transpose() * B;
}

// C += A * B^T where A is [MxN], B is [KxN] -> C [MxK]
inline void gemm_a_bt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
    ConstMapMat A(a, m, n), B(b, k, n);
    MapMat C(c, m, k);
    C.noalias() += A * B.transpose();
}

inline void add_rowvec(const double* a, const double* row, double* y, int m, int n) {
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) y[r * n + c] = a[r * n + c] + row[c];
}

// The transcendental kernels are plain scalar loops on purpose: Eigen's
// vectorized expressions peel to a runtime-dependent alignment boundary, and
// its packet exp differs from std::exp in the last ulp, so results would vary
// with the heap address of the buffers. Training replays must be bit-exact.
inline void sin_scaled(std::span<const double> x, double omega, std::span<double> y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] = std::sin(omega * x[i]);
}

// y = scale * cos(omega * x), the sin_scaled adjoint factor
inline void cos_scaled(std::span<const double> x, double omega, double scale,
                       std::span<double> y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] = scale * std::cos(omega * x[i]);
}

inline void relu(std::span<const double> x, std::span<double> y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

inline void logistic(std::span<const double> x, std::span<double> y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

inline void abs_val(std::span<const double> x, std::span<double> y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] = std::fabs(x[i]);
}

inline double max_of(std::span<const double> x, size_t* argmax = nullptr) {
    double m = x[0];
    size_t arg = 0;
    for (size_t i = 1; i < x.size(); ++i)
        if (x[i] > m) {
            m = x[i];
            arg = i;
        }
    if (argmax) *argmax = arg;
    return m;
}

// Bilinear gather from a [T x F] table; 4 corners per pixel.
inline void gather(const double* table, const int32_t* idx, const double* w, int npix, int features,
                   double* out) {
    for (int p = 0; p < npix; ++p) {
        for (int f = 0; f < features; ++f) {
            double acc = 0.0;
            for (int c = 0; c < 4; ++c)
                acc += w[p * 4 + c] * table[static_cast<size_t>(idx[p * 4 + c]) * features + f];
            out[p * features + f] = acc;
        }
    }
}

}  // namespace ptyinr::kernels
