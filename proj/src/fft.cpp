#include "ptyinr/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace ptyinr {

namespace {

// FFTW's planner is not thread-safe; plans are cached per (rows, cols, sign)
// and created with FFTW_UNALIGNED so they can run on any caller buffer.
class PlanCache {
public:
    fftw_plan get(int rows, int cols, int sign) {
        std::lock_guard<std::mutex> lock(mu_);
        auto key = std::tuple{rows, cols, sign};
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<fftw_complex> scratch(static_cast<size_t>(rows) * cols);
        fftw_plan p = fftw_plan_dft_2d(rows, cols, scratch.data(), scratch.data(), sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!p) throw std::runtime_error("fftw plan creation failed");
        plans_.emplace(key, p);
        return p;
    }

private:
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

ComplexField transform(const ComplexField& f, int sign) {
    if (!f.finite()) throw std::invalid_argument("non-finite field");
    ComplexField shifted = ifftshift(f);
    ComplexField out(f.rows(), f.cols());
    fftw_plan p = plan_cache().get(f.rows(), f.cols(), sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(shifted.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    out = fftshift(out);
    const double scale = 1.0 / std::sqrt(static_cast<double>(f.size()));
    for (size_t i = 0; i < out.size(); ++i) out.c(i) *= scale;
    return out;
}

}  // namespace

ComplexField cfft2_centered(const ComplexField& f) { return transform(f, FFTW_FORWARD); }

ComplexField cifft2_centered(const ComplexField& f) { return transform(f, FFTW_BACKWARD); }

}  // namespace ptyinr
