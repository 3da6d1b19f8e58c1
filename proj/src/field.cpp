#include "ptyinr/field.hpp"

#include <cmath>

namespace ptyinr {

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool ComplexField::finite() const { return all_finite(raw()); }

double ComplexField::energy() const {
    double s = 0.0;
    for (size_t i = 0; i < size(); ++i) s += std::norm(c(i));
    return s;
}

double ComplexField::max_abs() const {
    double m = 0.0;
    for (size_t i = 0; i < size(); ++i) m = std::max(m, std::abs(c(i)));
    return m;
}

std::vector<double> ComplexField::amplitude() const {
    std::vector<double> a(size());
    for (size_t i = 0; i < size(); ++i) a[i] = std::abs(c(i));
    return a;
}

std::vector<double> ComplexField::phase() const {
    std::vector<double> p(size());
    for (size_t i = 0; i < size(); ++i) p[i] = std::arg(c(i));
    return p;
}

namespace {

ComplexField roll(const ComplexField& f, int dr, int dc) {
    const int h = f.rows(), w = f.cols();
    ComplexField out(h, w);
    for (int r = 0; r < h; ++r) {
        const int rr = ((r + dr) % h + h) % h;
        for (int c = 0; c < w; ++c) {
            const int cc = ((c + dc) % w + w) % w;
            out.at(rr, cc) = f.at(r, c);
        }
    }
    return out;
}

}  // namespace

ComplexField fftshift(const ComplexField& f) { return roll(f, f.rows() / 2, f.cols() / 2); }
ComplexField ifftshift(const ComplexField& f) { return roll(f, -(f.rows() / 2), -(f.cols() / 2)); }

ComplexField crop(const ComplexField& f, int row0, int col0, int h, int w) {
    if (row0 < 0 || col0 < 0 || row0 + h > f.rows() || col0 + w > f.cols())
        throw std::invalid_argument("crop window out of bounds");
    ComplexField out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out.at(r, c) = f.at(row0 + r, col0 + c);
    return out;
}

void add_patch(ComplexField& f, const ComplexField& patch, int row0, int col0) {
    if (row0 < 0 || col0 < 0 || row0 + patch.rows() > f.rows() || col0 + patch.cols() > f.cols())
        throw std::invalid_argument("patch window out of bounds");
    for (int r = 0; r < patch.rows(); ++r)
        for (int c = 0; c < patch.cols(); ++c) f.at(row0 + r, col0 + c) += patch.at(r, c);
}

ComplexField from_parts(int rows, int cols, std::span<const double> amplitude,
                        std::span<const double> phase) {
    ComplexField f(rows, cols);
    if (amplitude.size() != f.size() || phase.size() != f.size())
        throw std::invalid_argument("shape mismatch in from_parts");
    for (size_t i = 0; i < f.size(); ++i)
        f.c(i) = std::polar(amplitude[i], phase[i]);
    return f;
}

}  // namespace ptyinr
