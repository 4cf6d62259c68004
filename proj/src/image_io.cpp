#include "rave/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "rave/file_io.hpp"
#include "rave/errors.hpp"

namespace rave {

namespace {

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw FormatError(name + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgba.data(), 0, nullptr)) {
        png_image_free(&img);
        throw FormatError(name + ": " + img.message);
    }
    ImageBuffer out(img.width, img.height);
    for (std::uint32_t y = 0; y < img.height; ++y) {
        for (std::uint32_t x = 0; x < img.width; ++x) {
            const std::uint8_t* p = &rgba[(static_cast<std::size_t>(y) * img.width + x) * 4];
            const double a = p[3] / 255.0;
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = a * (p[c] / 255.0) + (1.0 - a);
            }
        }
    }
    return out;
}

ImageBuffer decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    std::size_t pos = 2;
    auto next_token = [&]() -> long {
        for (;;) {
            while (pos < bytes.size() && std::isspace(bytes[pos])) {
                ++pos;
            }
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
                continue;
            }
            break;
        }
        long v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            any = true;
            ++pos;
            if (v > (1L << 24)) {
                throw FormatError(name + ": PPM header value too large");
            }
        }
        if (!any) {
            throw FormatError(name + ": malformed PPM header");
        }
        return v;
    };
    const long w = next_token();
    const long h = next_token();
    const long maxval = next_token();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
        throw FormatError(name + ": invalid PPM dimensions or maxval");
    }
    ++pos;  // single whitespace before the raster
    const std::size_t sample = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * h * 3 * sample;
    if (bytes.size() < pos || bytes.size() - pos < need) {
        throw TruncatedPayload(name + ": PPM raster truncated");
    }
    ImageBuffer out(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h));
    auto data = out.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        unsigned v = bytes[pos + i * sample];
        if (sample == 2) {
            v = (v << 8) | bytes[pos + i * 2 + 1];
        }
        data[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
    return out;
}

}  // namespace

ImageBuffer read_image(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    const std::string name = path.string();
    static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::equal(kPngSig, kPngSig + 8, bytes.begin())) {
        return decode_png(bytes, name);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
        return decode_ppm(bytes, name);
    }
    throw FormatError(name + ": unsupported image format (expected PNG or binary PPM)");
}

void write_png(const std::filesystem::path& path, const ImageBuffer& image) {
    std::vector<std::uint8_t> rgb(image.size());
    const auto data = image.data();
    std::transform(data.begin(), data.end(), rgb.begin(), to_byte);

    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = image.width();
    img.height = image.height();
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
        throw IoError("png encode failed: " + std::string(img.message));
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
        throw IoError("png encode failed: " + std::string(img.message));
    }
    out.resize(size);
    write_file_atomic(path, out);
}

ImageBuffer quantize_to_8bit(const ImageBuffer& image) {
    ImageBuffer out = image;
    for (double& v : out.data()) {
        v = to_byte(v) / 255.0;
    }
    return out;
}

}  // namespace rave
