#pragma once

#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

namespace ptyinr {

/// Counter-based generator: every draw is a pure function of (seed, counter),
/// so streams are reproducible across runs and thread counts and the full
/// state serializes as two 64-bit integers. Independent streams are derived
/// from a parent seed plus a purpose tag.
class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    /// Independent stream for a named consumer ("init", "noise", "shuffle", ...).
    Rng stream(std::string_view purpose) const;
    /// Independent stream keyed by index (e.g. one per frame).
    Rng substream(uint64_t index) const;

    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }
    void set_counter(uint64_t c) { counter_ = c; }

    uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller (consumes two counters per draw).
    double normal();
    /// Poisson draw; inversion for small means, PTRS rejection for large.
    uint64_t poisson(double mean);
    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t seed_;
    uint64_t counter_;
};

/// 64-bit FNV-1a, used for purpose tags and config hashing.
uint64_t fnv1a64(std::string_view s);

}  // namespace ptyinr
