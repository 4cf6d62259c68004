#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace rave {

using Bytes = std::vector<std::uint8_t>;

/// Lossless byte-level coder behind the bitstream payload. Swapping the
/// backend changes payload bytes and measured rates, never decoded values.
class EntropyBackend {
public:
    virtual ~EntropyBackend() = default;

    /// Value of the "payload compressed" header flag for this backend.
    virtual bool compresses() const = 0;
    virtual Bytes compress(std::span<const std::uint8_t> raw) const = 0;
    /// Throws TruncatedPayload / FormatError when `coded` does not expand to
    /// exactly `raw_len` bytes.
    virtual Bytes decompress(std::span<const std::uint8_t> coded, std::uint64_t raw_len) const = 0;
};

/// LZMA (.lzma "alone" stream), preset 9 extreme with an 8 MiB dictionary.
class LzmaBackend final : public EntropyBackend {
public:
    bool compresses() const override { return true; }
    Bytes compress(std::span<const std::uint8_t> raw) const override;
    Bytes decompress(std::span<const std::uint8_t> coded, std::uint64_t raw_len) const override;
};

/// Stores the payload verbatim.
class StoreBackend final : public EntropyBackend {
public:
    bool compresses() const override { return false; }
    Bytes compress(std::span<const std::uint8_t> raw) const override;
    Bytes decompress(std::span<const std::uint8_t> coded, std::uint64_t raw_len) const override;
};

const EntropyBackend& default_backend();

/// Backend matching the header's "payload compressed" flag.
const EntropyBackend& backend_for_flag(bool compressed);

/// IEEE CRC-32.
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace rave
