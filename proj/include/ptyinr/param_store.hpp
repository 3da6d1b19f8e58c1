#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ptyinr {

/// Flat parameter vector with named, disjoint segments covering [0, total),
/// plus a same-shape gradient vector. Segments are registered before
/// finalize(); afterwards the layout is frozen.
class ParamStore {
public:
    struct Segment {
        std::string name;
        size_t offset = 0;
        size_t length = 0;
    };

    /// Registers a segment and returns its index. Must precede finalize().
    size_t add(std::string name, size_t length);
    void finalize();
    bool finalized() const { return finalized_; }

    size_t total() const { return total_; }
    size_t segment_count() const { return segments_.size(); }
    const Segment& segment(size_t idx) const { return segments_.at(idx); }
    const Segment& segment(std::string_view name) const;
    size_t segment_index(std::string_view name) const;

    std::span<double> values(size_t idx);
    std::span<const double> values(size_t idx) const;
    std::span<double> grads(size_t idx);
    std::span<const double> grads(size_t idx) const;
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::span<double> grads() { return grads_; }
    std::span<const double> grads() const { return grads_; }

    void zero_grads();
    /// Name of the segment containing flat index i.
    const std::string& segment_name_of(size_t i) const;

private:
    void require_finalized() const;
    std::vector<Segment> segments_;
    std::unordered_map<std::string, size_t> by_name_;
    std::vector<double> values_;
    std::vector<double> grads_;
    size_t total_ = 0;
    bool finalized_ = false;
};

}  // namespace ptyinr
