#include "rave/entropy.hpp"

#include <lzma.h>

#include <memory>
#include <string>

#include "rave/errors.hpp"

namespace rave {

namespace {

constexpr std::uint32_t kPreset = 9 | LZMA_PRESET_EXTREME;

struct StreamGuard {
    lzma_stream strm = LZMA_STREAM_INIT;
    ~StreamGuard() { lzma_end(&strm); }
};

}  // namespace

Bytes LzmaBackend::compress(std::span<const std::uint8_t> raw) const {
    lzma_options_lzma opts;
    if (lzma_lzma_preset(&opts, kPreset)) {
        throw Error("lzma: preset unsupported");
    }
    opts.dict_size = LZMA_DICT_SIZE_DEFAULT;

    StreamGuard guard;
    if (lzma_alone_encoder(&guard.strm, &opts) != LZMA_OK) {
        throw Error("lzma: encoder init failed");
    }
    Bytes out(raw.size() + raw.size() / 3 + 128);
    guard.strm.next_in = raw.data();
    guard.strm.avail_in = raw.size();
    guard.strm.next_out = out.data();
    guard.strm.avail_out = out.size();
    for (;;) {
        const lzma_ret ret = lzma_code(&guard.strm, LZMA_FINISH);
        if (ret == LZMA_STREAM_END) {
            break;
        }
        if (ret != LZMA_OK) {
            throw Error("lzma: encode failed (" + std::to_string(static_cast<int>(ret)) + ")");
        }
        if (guard.strm.avail_out == 0) {
            const std::size_t used = out.size();
            out.resize(out.size() * 2);
            guard.strm.next_out = out.data() + used;
            guard.strm.avail_out = out.size() - used;
        }
    }
    out.resize(guard.strm.total_out);
    return out;
}

Bytes LzmaBackend::decompress(std::span<const std::uint8_t> coded, std::uint64_t raw_len) const {
    StreamGuard guard;
    if (lzma_alone_decoder(&guard.strm, UINT64_MAX) != LZMA_OK) {
        throw Error("lzma: decoder init failed");
    }
    Bytes out(static_cast<std::size_t>(raw_len));
    std::uint8_t spare = 0;
    guard.strm.next_in = coded.data();
    guard.strm.avail_in = coded.size();
    guard.strm.next_out = out.empty() ? &spare : out.data();
    guard.strm.avail_out = out.empty() ? 1 : out.size();
    bool in_spare = out.empty();
    for (;;) {
        const lzma_ret ret = lzma_code(&guard.strm, LZMA_FINISH);
        if (ret == LZMA_STREAM_END) {
            break;
        }
        if (ret == LZMA_BUF_ERROR) {
            throw TruncatedPayload("lzma: compressed payload ends early");
        }
        if (ret != LZMA_OK) {
            throw FormatError("lzma: corrupt payload (" + std::to_string(static_cast<int>(ret)) +
                              ")");
        }
        if (guard.strm.avail_out == 0) {
            if (in_spare) {
                throw FormatError("lzma: payload longer than declared");
            }
            in_spare = true;
            guard.strm.next_out = &spare;
            guard.strm.avail_out = 1;
        }
    }
    if (guard.strm.total_out != raw_len) {
        throw FormatError("lzma: payload length does not match header");
    }
    return out;
}

Bytes StoreBackend::compress(std::span<const std::uint8_t> raw) const {
    return Bytes(raw.begin(), raw.end());
}

Bytes StoreBackend::decompress(std::span<const std::uint8_t> coded, std::uint64_t raw_len) const {
    if (coded.size() < raw_len) {
        throw TruncatedPayload("stored payload shorter than declared");
    }
    if (coded.size() > raw_len) {
        throw FormatError("stored payload longer than declared");
    }
    return Bytes(coded.begin(), coded.end());
}

const EntropyBackend& default_backend() {
    static const LzmaBackend backend;
    return backend;
}

const EntropyBackend& backend_for_flag(bool compressed) {
    static const StoreBackend store;
    if (compressed) {
        return default_backend();
    }
    return store;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    return lzma_crc32(bytes.data(), bytes.size(), 0);
}

}  // namespace rave
