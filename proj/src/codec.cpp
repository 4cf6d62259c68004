#include "rave/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "byte_io.hpp"
#include "rave/errors.hpp"

namespace rave {

namespace {

float round_down_to_float(double v) {
    float f = static_cast<float>(v);
    if (static_cast<double>(f) > v) {
        f = std::nextafter(f, -std::numeric_limits<float>::infinity());
    }
    return f;
}

float round_up_to_float(double v) {
    float f = static_cast<float>(v);
    if (static_cast<double>(f) < v) {
        f = std::nextafter(f, std::numeric_limits<float>::infinity());
    }
    return f;
}

void check_indices(const GaussianSet& set, std::span<const std::uint32_t> indices) {
    if (indices.empty()) {
        throw InvalidInput("empty index set: nothing to encode");
    }
    if (!is_strictly_ascending(indices) || indices.back() >= set.size()) {
        throw InvalidInput("index set must be strictly ascending and within the set");
    }
}

/// MSB-first bit packer.
class BitWriter {
public:
    explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void put(std::uint32_t code, unsigned bits) {
        for (unsigned b = bits; b-- > 0;) {
            acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((code >> b) & 1u));
            if (++filled_ == 8) {
                out_.push_back(acc_);
                acc_ = 0;
                filled_ = 0;
            }
        }
    }
    void flush() {
        if (filled_ > 0) {
            out_.push_back(static_cast<std::uint8_t>(acc_ << (8 - filled_)));
            acc_ = 0;
            filled_ = 0;
        }
    }

private:
    std::vector<std::uint8_t>& out_;
    std::uint8_t acc_ = 0;
    unsigned filled_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint32_t get(unsigned bits) {
        std::uint32_t code = 0;
        for (unsigned b = 0; b < bits; ++b) {
            const std::size_t byte = pos_ >> 3;
            const unsigned shift = 7 - static_cast<unsigned>(pos_ & 7);
            code = (code << 1) | ((in_[byte] >> shift) & 1u);
            ++pos_;
        }
        return code;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::uint64_t packed_plane_bytes(std::uint64_t count, unsigned bits) {
    return (count * bits + 7) / 8;
}

std::uint64_t spec_hash(const QuantSpec& spec) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v, int n) {
        for (int b = 0; b < n; ++b) {
            h ^= (v >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    };
    for (const QuantPlane& p : spec.planes) {
        mix(p.bits, 1);
        mix(std::bit_cast<std::uint32_t>(p.min), 4);
        mix(std::bit_cast<std::uint32_t>(p.max), 4);
    }
    mix(spec.pinned_ranges ? 1 : 0, 1);
    return h;
}

}  // namespace

double QuantPlane::step() const {
    if (bits == 0) {
        return 0.0;
    }
    return (static_cast<double>(max) - static_cast<double>(min)) / static_cast<double>(max_code());
}

QuantSpec QuantSpec::defaults() {
    QuantSpec spec;
    auto set_bits = [&spec](Plane p, std::uint8_t bits) { spec[p].bits = bits; };
    set_bits(Plane::PosX, 16);
    set_bits(Plane::PosY, 16);
    set_bits(Plane::LogScaleX, 12);
    set_bits(Plane::LogScaleY, 12);
    set_bits(Plane::Rotation, 12);
    set_bits(Plane::OpacityLogit, 8);
    set_bits(Plane::ColorR, 8);
    set_bits(Plane::ColorG, 8);
    set_bits(Plane::ColorB, 8);
    set_bits(Plane::DepthKey, 16);
    return spec;
}

void QuantSpec::validate() const {
    for (std::size_t k = 0; k < kNumPlanes; ++k) {
        const QuantPlane& p = planes[k];
        const std::string name = plane_name(static_cast<Plane>(k));
        if (p.bits > 16) {
            throw InvalidSpec(name + ": bits must be in [0,16]");
        }
        if (!std::isfinite(p.min) || !std::isfinite(p.max) || p.min > p.max) {
            throw InvalidSpec(name + ": range must be finite with min <= max");
        }
        if (p.min == p.max && p.bits != 0) {
            throw InvalidSpec(name + ": constant plane must use bits = 0");
        }
    }
}

std::uint32_t quantize(double value, const QuantPlane& plane) {
    if (plane.bits == 0) {
        return 0;
    }
    const double lo = plane.min;
    const double hi = plane.max;
    double t = (value - lo) / (hi - lo);
    if (std::isnan(t)) {
        t = 0.0;
    }
    t = std::clamp(t, 0.0, 1.0);
    return static_cast<std::uint32_t>(std::floor(t * static_cast<double>(plane.max_code()) + 0.5));
}

double dequantize(std::uint32_t code, const QuantPlane& plane) {
    if (plane.bits == 0) {
        if (code != 0) {
            throw InvalidInput("code out of range for a constant plane");
        }
        return plane.min;
    }
    if (code > plane.max_code()) {
        throw InvalidInput("code " + std::to_string(code) + " exceeds 2^bits - 1");
    }
    const double lo = plane.min;
    const double hi = plane.max;
    return lo + static_cast<double>(code) / static_cast<double>(plane.max_code()) * (hi - lo);
}

QuantSpec fit_ranges(const GaussianSet& set, std::span<const std::uint32_t> indices,
                     const QuantSpec& bits) {
    check_indices(set, indices);
    QuantSpec spec = bits;
    spec.pinned_ranges = true;
    for (std::size_t k = 0; k < kNumPlanes; ++k) {
        const auto values = set.plane(static_cast<Plane>(k));
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::uint32_t i : indices) {
            lo = std::min(lo, values[i]);
            hi = std::max(hi, values[i]);
        }
        if (!std::isfinite(lo) || !std::isfinite(hi)) {
            throw InvalidParameter(std::string("non-finite values in plane ") +
                                   plane_name(static_cast<Plane>(k)));
        }
        QuantPlane& p = spec.planes[k];
        if (lo == hi) {
            p.min = p.max = static_cast<float>(lo);
            p.bits = 0;
        } else {
            p.min = round_down_to_float(lo);
            p.max = round_up_to_float(hi);
            if (p.min == p.max) {
                p.bits = 0;
            }
        }
    }
    return spec;
}

GaussianSet quantized_copy(const GaussianSet& set, std::span<const std::uint32_t> indices,
                           const QuantSpec& spec) {
    GaussianSet out = set;
    for (std::size_t k = 0; k < kNumPlanes; ++k) {
        const Plane p = static_cast<Plane>(k);
        auto values = out.plane(p);
        for (std::uint32_t i : indices) {
            values[i] = quantize_dequantize(values[i], spec.planes[k]);
        }
    }
    return out;
}

Bytes write_container(StreamHeader header, std::span<const std::uint8_t> raw_payload,
                      const EntropyBackend& backend) {
    Bytes coded = backend.compress(raw_payload);
    header.flags = static_cast<std::uint16_t>(
        (header.flags & ~kFlagCompressed) | (backend.compresses() ? kFlagCompressed : 0));
    header.payload_raw_len = raw_payload.size();
    header.payload_compressed_len = coded.size();

    detail::ByteWriter w;
    w.put_bytes(kMagic);
    w.put(header.version);
    w.put(header.flags);
    w.put(header.canvas_width);
    w.put(header.canvas_height);
    w.put(header.gaussian_count);
    w.put(header.anchor_level);
    w.put(static_cast<std::uint8_t>(kNumPlanes));
    for (const QuantPlane& p : header.planes) {
        w.put(p.bits);
        w.put_f32(p.min);
        w.put_f32(p.max);
    }
    w.put(header.payload_raw_len);
    w.put(header.payload_compressed_len);
    w.put(crc32(w.bytes()));
    w.put_bytes(coded);
    return std::move(w.bytes());
}

std::pair<StreamHeader, Bytes> read_container(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMagic.size()) {
        throw TruncatedPayload("stream shorter than its magic number");
    }
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw BadMagic("not a RAVS stream (bad magic)");
    }
    if (bytes.size() < kHeaderSize) {
        throw TruncatedPayload("stream header truncated");
    }
    detail::ByteReader r(bytes, "header");
    r.get_bytes(kMagic.size());
    StreamHeader h;
    h.version = r.get<std::uint16_t>();
    h.flags = r.get<std::uint16_t>();
    h.canvas_width = r.get<std::uint32_t>();
    h.canvas_height = r.get<std::uint32_t>();
    h.gaussian_count = r.get<std::uint32_t>();
    h.anchor_level = r.get<std::uint8_t>();
    const auto plane_count = r.get<std::uint8_t>();
    for (QuantPlane& p : h.planes) {
        p.bits = r.get<std::uint8_t>();
        p.min = r.get_f32();
        p.max = r.get_f32();
    }
    h.payload_raw_len = r.get<std::uint64_t>();
    h.payload_compressed_len = r.get<std::uint64_t>();
    const std::size_t crc_offset = r.position();
    const auto stored_crc = r.get<std::uint32_t>();
    if (crc32(bytes.first(crc_offset)) != stored_crc) {
        throw CrcMismatch("header CRC-32 mismatch");
    }
    if (h.version != kFormatVersion) {
        throw UnsupportedVersion("unsupported stream version " + std::to_string(h.version));
    }
    if (plane_count != kNumPlanes) {
        throw FormatError("unexpected plane count " + std::to_string(plane_count));
    }
    if (h.canvas_width == 0 || h.canvas_height == 0) {
        throw FormatError("zero canvas dimension");
    }
    const std::size_t available = bytes.size() - kHeaderSize;
    if (available < h.payload_compressed_len) {
        throw TruncatedPayload("payload truncated: " + std::to_string(available) + " of " +
                               std::to_string(h.payload_compressed_len) + " bytes");
    }
    if (available > h.payload_compressed_len) {
        throw FormatError("trailing bytes after payload");
    }
    Bytes raw = backend_for_flag(h.compressed())
                    .decompress(bytes.subspan(kHeaderSize), h.payload_raw_len);
    return {h, std::move(raw)};
}

Bytes encode_subset(const GaussianSet& set, std::span<const std::uint32_t> indices,
                    const QuantSpec& spec, EncodeMetadata metadata,
                    const EntropyBackend& backend) {
    check_indices(set, indices);
    const QuantSpec resolved = spec.pinned_ranges ? spec : fit_ranges(set, indices, spec);
    resolved.validate();

    std::vector<std::uint8_t> payload;
    for (std::size_t k = 0; k < kNumPlanes; ++k) {
        const QuantPlane& q = resolved.planes[k];
        const auto values = set.plane(static_cast<Plane>(k));
        BitWriter bw(payload);
        for (std::uint32_t i : indices) {
            bw.put(quantize(values[i], q), q.bits);
        }
        bw.flush();
    }

    StreamHeader header;
    header.canvas_width = set.canvas_width();
    header.canvas_height = set.canvas_height();
    header.gaussian_count = static_cast<std::uint32_t>(indices.size());
    header.anchor_level = metadata.anchor_level;
    header.planes = resolved.planes;
    return write_container(header, payload, backend);
}

DecodedStream decode(std::span<const std::uint8_t> bytes) {
    auto [header, raw] = read_container(bytes);
    const std::uint64_t n = header.gaussian_count;
    GaussianSet set(header.canvas_width, header.canvas_height);
    set.resize(n);
    detail::ByteReader r(raw, "payload");
    for (std::size_t k = 0; k < kNumPlanes; ++k) {
        const QuantPlane& q = header.planes[k];
        auto values = set.plane(static_cast<Plane>(k));
        if (header.is_model()) {
            if (q.bits != kRawFloatBits) {
                throw FormatError("model planes must be raw float32");
            }
            for (std::uint64_t i = 0; i < n; ++i) {
                values[i] = r.get_f32();
            }
            continue;
        }
        if (q.bits > 16 || q.min > q.max) {
            throw FormatError(std::string("invalid quantizer for plane ") +
                              plane_name(static_cast<Plane>(k)));
        }
        BitReader br(r.get_bytes(packed_plane_bytes(n, q.bits)));
        for (std::uint64_t i = 0; i < n; ++i) {
            values[i] = dequantize(br.get(q.bits), q);
        }
    }
    if (!header.is_model() && r.remaining() != 0) {
        throw FormatError("payload longer than the planes it declares");
    }
    return {header, std::move(set)};
}

std::uint64_t measure_rate(const GaussianSet& set, std::span<const std::uint32_t> indices,
                           const QuantSpec& spec) {
    return encode_subset(set, indices, spec).size();
}

std::uint64_t RateMeter::measure(const GaussianSet& set, std::span<const std::uint32_t> indices,
                                 const QuantSpec& spec) {
    const auto key = std::make_pair(hash_indices(indices), spec_hash(spec));
    {
        std::shared_lock lock(mutex_);
        if (auto it = memo_.find(key); it != memo_.end()) {
            return it->second;
        }
    }
    const std::uint64_t rate = measure_rate(set, indices, spec);
    std::unique_lock lock(mutex_);
    ++encodes_;
    memo_.emplace(key, rate);
    return rate;
}

std::size_t RateMeter::encodes_performed() const {
    std::shared_lock lock(mutex_);
    return encodes_;
}

}  // namespace rave
