#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "rave/errors.hpp"

namespace rave::detail {

/// Little-endian append-only writer.
class ByteWriter {
public:
    template <typename T>
        requires std::is_integral_v<T>
    void put(T value) {
        using U = std::make_unsigned_t<T>;
        const auto u = static_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
        }
    }
    void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void put_bytes(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }

    std::vector<std::uint8_t>& bytes() { return bytes_; }
    std::size_t size() const { return bytes_.size(); }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Little-endian bounds-checked reader; throws TruncatedPayload on overrun.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes, std::string what = "buffer")
        : bytes_(bytes), what_(std::move(what)) {}

    template <typename T>
        requires std::is_integral_v<T>
    T get() {
        need(sizeof(T));
        std::make_unsigned_t<T> u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            u |= static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(u);
    }
    float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
    double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::span<const std::uint8_t> get_bytes(std::size_t n) {
        need(n);
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw TruncatedPayload(what_ + " truncated");
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

}  // namespace rave::detail
