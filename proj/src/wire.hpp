#pragma once

// Little-endian (de)serialization helpers shared by checkpoint and container
// code.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>

namespace ptyinr::wire {

inline void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_i64(std::string& buf, int64_t v) { put_u64(buf, static_cast<uint64_t>(v)); }

inline void put_f64(std::string& buf, double d) { put_u64(buf, std::bit_cast<uint64_t>(d)); }

inline void put_f64_span(std::string& buf, std::span<const double> v) {
    if constexpr (std::endian::native == std::endian::little) {
        const size_t at = buf.size();
        buf.resize(at + v.size() * 8);
        std::memcpy(buf.data() + at, v.data(), v.size() * 8);
    } else {
        for (double d : v) put_f64(buf, d);
    }
}

/// Bounds-checked sequential reader over a byte buffer.
class Reader {
public:
    Reader(const std::string& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(buf_[at_ + i])) << (8 * i);
        at_ += 8;
        return v;
    }

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(buf_[at_ + i])) << (8 * i);
        at_ += 4;
        return v;
    }

    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }

    void f64_span(std::span<double> out) {
        need(out.size() * 8);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(out.data(), buf_.data() + at_, out.size() * 8);
            at_ += out.size() * 8;
        } else {
            for (double& d : out) d = f64();
        }
    }

    void bytes(char* out, size_t n) {
        need(n);
        std::memcpy(out, buf_.data() + at_, n);
        at_ += n;
    }

    size_t remaining() const { return buf_.size() - at_; }

private:
    void need(size_t n) const {
        if (at_ + n > buf_.size()) throw std::runtime_error("truncated " + what_);
    }
    const std::string& buf_;
    std::string what_;
    size_t at_ = 0;
};

}  // namespace ptyinr::wire
