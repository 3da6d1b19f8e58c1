#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ptyinr {

/// Dense row-major 2D complex array. Storage is interleaved (re, im)
/// double pairs, so the raw buffer is directly usable as complex128.
class ComplexField {
public:
    ComplexField() = default;
    ComplexField(int rows, int cols)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(check_dims(rows, cols)) * 2, 0.0) {}

    static ComplexField constant(int rows, int cols, std::complex<double> v) {
        ComplexField f(rows, cols);
        for (size_t i = 0; i < f.size(); ++i) f.c(i) = v;
        return f;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return static_cast<size_t>(rows_) * cols_; }

    std::complex<double>& at(int r, int c) { return cdata()[static_cast<size_t>(r) * cols_ + c]; }
    std::complex<double> at(int r, int c) const { return cdata()[static_cast<size_t>(r) * cols_ + c]; }
    std::complex<double>& c(size_t i) { return cdata()[i]; }
    std::complex<double> c(size_t i) const { return cdata()[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::complex<double>* cdata() { return reinterpret_cast<std::complex<double>*>(data_.data()); }
    const std::complex<double>* cdata() const {
        return reinterpret_cast<const std::complex<double>*>(data_.data());
    }
    std::span<const double> raw() const { return data_; }
    std::span<double> raw() { return data_; }

    bool finite() const;
    /// Sum of |z|^2 over all pixels.
    double energy() const;
    double max_abs() const;

    std::vector<double> amplitude() const;
    std::vector<double> phase() const;

private:
    static int check_dims(int rows, int cols) {
        if (rows < 1 || cols < 1) throw std::invalid_argument("field dimensions must be positive");
        return rows * cols;
    }
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// Circular roll of both axes by +floor(n/2): moves index 0 to the center.
ComplexField fftshift(const ComplexField& f);
/// Inverse of fftshift (roll by -floor(n/2)).
ComplexField ifftshift(const ComplexField& f);

ComplexField crop(const ComplexField& f, int row0, int col0, int h, int w);
/// Adds patch into f at (row0, col0). Window must be in bounds.
void add_patch(ComplexField& f, const ComplexField& patch, int row0, int col0);

ComplexField from_parts(int rows, int cols, std::span<const double> amplitude,
                        std::span<const double> phase);

bool all_finite(std::span<const double> v);

}  // namespace ptyinr
