#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <utility>

#include "rave/entropy.hpp"
#include "rave/splat.hpp"

namespace rave {

/// Uniform scalar quantizer for one attribute plane. bits == 0 marks a
/// constant plane whose every value decodes to `min`.
struct QuantPlane {
    std::uint8_t bits = 8;
    float min = 0.0f;
    float max = 1.0f;

    std::uint32_t max_code() const { return bits == 0 ? 0u : (1u << bits) - 1u; }
    /// Grid spacing (max - min) / (2^bits - 1); 0 for constant planes.
    double step() const;

    friend bool operator==(const QuantPlane&, const QuantPlane&) = default;
};

struct QuantSpec {
    std::array<QuantPlane, kNumPlanes> planes{};
    /// When false, encode_subset replaces min/max with the subset's own range.
    bool pinned_ranges = false;

    /// pos 16, log_scale 12, rotation 12, opacity 8, colour 8, depth 16 bits.
    static QuantSpec defaults();

    QuantPlane& operator[](Plane p) { return planes[static_cast<std::size_t>(p)]; }
    const QuantPlane& operator[](Plane p) const { return planes[static_cast<std::size_t>(p)]; }

    /// Throws InvalidSpec on bits > 16, min > max, or min == max with bits != 0.
    void validate() const;

    friend bool operator==(const QuantSpec&, const QuantSpec&) = default;
};

/// round_half_up(clamp((v - min) / (max - min), 0, 1) * (2^bits - 1)).
std::uint32_t quantize(double value, const QuantPlane& plane);

/// min + code / (2^bits - 1) * (max - min). Throws InvalidInput for codes
/// above 2^bits - 1.
double dequantize(std::uint32_t code, const QuantPlane& plane);

inline double quantize_dequantize(double value, const QuantPlane& plane) {
    return dequantize(quantize(value, plane), plane);
}

/// Per-plane ranges of `indices`, rounded outward to float. Bit widths come
/// from `bits`; planes with a single value get the bits = 0 sentinel.
QuantSpec fit_ranges(const GaussianSet& set, std::span<const std::uint32_t> indices,
                     const QuantSpec& bits = QuantSpec::defaults());

/// Copy of `set` with every plane of the Gaussians in `indices` replaced by
/// its value on the quantization grid. Others are left untouched.
GaussianSet quantized_copy(const GaussianSet& set, std::span<const std::uint32_t> indices,
                           const QuantSpec& spec);

inline constexpr std::array<std::uint8_t, 4> kMagic{'R', 'A', 'V', 'S'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::uint16_t kFlagCompressed = 1u << 0;
inline constexpr std::uint16_t kFlagModel = 1u << 1;
inline constexpr std::uint8_t kLevelInterpolated = 255;
/// Plane bits value used by model checkpoints for raw float32 planes.
inline constexpr std::uint8_t kRawFloatBits = 32;
inline constexpr std::size_t kHeaderSize = 4 + 2 + 2 + 4 + 4 + 4 + 1 + 1 + kNumPlanes * 9 + 8 + 8 + 4;

struct StreamHeader {
    std::uint16_t version = kFormatVersion;
    std::uint16_t flags = 0;
    std::uint32_t canvas_width = 0;
    std::uint32_t canvas_height = 0;
    std::uint32_t gaussian_count = 0;
    std::uint8_t anchor_level = kLevelInterpolated;
    std::array<QuantPlane, kNumPlanes> planes{};
    std::uint64_t payload_raw_len = 0;
    std::uint64_t payload_compressed_len = 0;

    bool compressed() const { return (flags & kFlagCompressed) != 0; }
    bool is_model() const { return (flags & kFlagModel) != 0; }
};

/// Serializes header + CRC, then the coded payload. Fills in the payload
/// lengths and the compressed flag from `backend`.
Bytes write_container(StreamHeader header, std::span<const std::uint8_t> raw_payload,
                      const EntropyBackend& backend);

/// Validates magic, version and CRC, expands the payload. Errors: BadMagic,
/// UnsupportedVersion, CrcMismatch, TruncatedPayload.
std::pair<StreamHeader, Bytes> read_container(std::span<const std::uint8_t> bytes);

struct EncodeMetadata {
    /// 1-based anchor level, or kLevelInterpolated.
    std::uint8_t anchor_level = kLevelInterpolated;
};

/// Quantizes the Gaussians in `indices` (ascending order) plane by plane,
/// bit-packs each plane to a byte boundary and entropy-codes the result.
Bytes encode_subset(const GaussianSet& set, std::span<const std::uint32_t> indices,
                    const QuantSpec& spec, EncodeMetadata metadata = {},
                    const EntropyBackend& backend = default_backend());

struct DecodedStream {
    StreamHeader header;
    GaussianSet set;
};

/// Rebuilds the encoded subset as a GaussianSet numbered 0..n-1.
DecodedStream decode(std::span<const std::uint8_t> bytes);

/// Size in bytes of encode_subset's output.
std::uint64_t measure_rate(const GaussianSet& set, std::span<const std::uint32_t> indices,
                           const QuantSpec& spec);

/// measure_rate with a memo keyed by (index-set hash, spec).
class RateMeter {
public:
    std::uint64_t measure(const GaussianSet& set, std::span<const std::uint32_t> indices,
                          const QuantSpec& spec);
    std::size_t encodes_performed() const;

private:
    mutable std::shared_mutex mutex_;
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> memo_;
    std::size_t encodes_ = 0;
};

}  // namespace rave
