#include "ptyinr/param_store.hpp"

#include <stdexcept>

namespace ptyinr {

size_t ParamStore::add(std::string name, size_t length) {
    if (finalized_) throw std::logic_error("ParamStore already finalized");
    if (by_name_.contains(name)) throw std::invalid_argument("duplicate segment: " + name);
    if (length == 0) throw std::invalid_argument("empty segment: " + name);
    Segment s{std::move(name), total_, length};
    by_name_.emplace(s.name, segments_.size());
    total_ += length;
    segments_.push_back(std::move(s));
    return segments_.size() - 1;
}

void ParamStore::finalize() {
    if (finalized_) throw std::logic_error("ParamStore already finalized");
    values_.assign(total_, 0.0);
    grads_.assign(total_, 0.0);
    finalized_ = true;
}

void ParamStore::require_finalized() const {
    if (!finalized_) throw std::logic_error("ParamStore not finalized");
}

const ParamStore::Segment& ParamStore::segment(std::string_view name) const {
    return segments_.at(segment_index(name));
}

size_t ParamStore::segment_index(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) throw std::invalid_argument("unknown segment: " + std::string(name));
    return it->second;
}

std::span<double> ParamStore::values(size_t idx) {
    require_finalized();
    const Segment& s = segments_.at(idx);
    return {values_.data() + s.offset, s.length};
}

std::span<const double> ParamStore::values(size_t idx) const {
    require_finalized();
    const Segment& s = segments_.at(idx);
    return {values_.data() + s.offset, s.length};
}

std::span<double> ParamStore::grads(size_t idx) {
    require_finalized();
    const Segment& s = segments_.at(idx);
    return {grads_.data() + s.offset, s.length};
}

std::span<const double> ParamStore::grads(size_t idx) const {
    require_finalized();
    const Segment& s = segments_.at(idx);
    return {grads_.data() + s.offset, s.length};
}

void ParamStore::zero_grads() {
    require_finalized();
    grads_.assign(grads_.size(), 0.0);
}

const std::string& ParamStore::segment_name_of(size_t i) const {
    for (const auto& s : segments_)
        if (i >= s.offset && i < s.offset + s.length) return s.name;
    throw std::out_of_range("index outside all segments");
}

}  // namespace ptyinr
