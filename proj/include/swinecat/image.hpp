#pragma once

#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#ifdef SWINECAT_HAS_PNG
#include <zlib.h>
#endif

#include "swinecat/common.hpp"

namespace swinecat {

// ---------------------------------------------------------------------------
// 8-bit interleaved RGB raster plus the resize/crop steps of the input
// pipeline. PPM (P6) is the native format; PNG decode/encode is available
// when built with zlib (SWINECAT_HAS_PNG).
// ---------------------------------------------------------------------------

struct Image {
    size_t width = 0;
    size_t height = 0;
    std::vector<uint8_t> rgb; // height * width * 3, row-major

    uint8_t* pixel(size_t y, size_t x) { return rgb.data() + (y * width + x) * 3; }
    const uint8_t* pixel(size_t y, size_t x) const { return rgb.data() + (y * width + x) * 3; }
};

/// Float raster in source pixel units (0..255), used between resize and crop.
struct FloatImage {
    size_t width = 0;
    size_t height = 0;
    std::vector<float> rgb;

    float* pixel(size_t y, size_t x) { return rgb.data() + (y * width + x) * 3; }
    const float* pixel(size_t y, size_t x) const { return rgb.data() + (y * width + x) * 3; }
};

// --- PPM (P6), 8-bit ---------------------------------------------------------

namespace detail {

inline int ppm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    for (;;) {
        while (c == '#') { // comment to end of line
            while (c != '\n' && c != EOF) c = in.get();
            c = in.get();
        }
        if (c == EOF) return 0;
        if (!std::isspace(c)) break;
        c = in.get();
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (c == '#') in.unget();
    return 1;
}

} // namespace detail

inline Image read_ppm(std::istream& in, const std::string& name = "<stream>") {
    std::string tok;
    if (!detail::ppm_next_token(in, tok) || tok != "P6") {
        throw FormatError("ppm: " + name + ": missing P6 magic");
    }
    auto read_uint = [&](const char* what) -> size_t {
        if (!detail::ppm_next_token(in, tok)) {
            throw FormatError("ppm: " + name + ": truncated header (" + what + ")");
        }
        char* end = nullptr;
        long v = std::strtol(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0' || v <= 0) {
            throw FormatError("ppm: " + name + ": bad " + std::string(what) + " '" + tok + "'");
        }
        return static_cast<size_t>(v);
    };
    Image img;
    img.width = read_uint("width");
    img.height = read_uint("height");
    size_t maxval = read_uint("maxval");
    if (maxval != 255) {
        throw FormatError("ppm: " + name + ": only maxval 255 supported, got " +
                          std::to_string(maxval));
    }
    // exactly one whitespace byte separates header and raster
    img.rgb.resize(img.width * img.height * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
    if (static_cast<size_t>(in.gcount()) != img.rgb.size()) {
        throw FormatError("ppm: " + name + ": truncated raster");
    }
    return img;
}

inline Image read_ppm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_ppm(in, path);
}

inline void write_ppm(std::ostream& out, const Image& img) {
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()),
              static_cast<std::streamsize>(img.rgb.size()));
}

inline void write_ppm_file(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    write_ppm(out, img);
    if (!out) throw IoError("short write to " + path);
}

// --- PNG (8-bit gray / RGB / RGBA, non-interlaced) ---------------------------

#ifdef SWINECAT_HAS_PNG

namespace detail {

inline uint32_t be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

inline void put_be32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x >> 24));
    v.push_back(uint8_t(x >> 16));
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x));
}

inline uint8_t paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return uint8_t(a);
    if (pb <= pc) return uint8_t(b);
    return uint8_t(c);
}

} // namespace detail

inline Image decode_png(const std::vector<uint8_t>& bytes, const std::string& name = "<buffer>") {
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0) {
        throw FormatError("png: " + name + ": bad signature");
    }
    size_t pos = 8;
    size_t width = 0, height = 0;
    int color_type = -1, bit_depth = 0;
    std::vector<uint8_t> idat;
    bool saw_end = false;
    while (pos + 8 <= bytes.size()) {
        uint32_t len = detail::be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw FormatError("png: " + name + ": truncated chunk");
        std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        const uint8_t* payload = &bytes[pos + 8];
        if (type == "IHDR") {
            if (len != 13) throw FormatError("png: " + name + ": bad IHDR");
            width = detail::be32(payload);
            height = detail::be32(payload + 4);
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw FormatError("png: " + name + ": interlaced images unsupported");
            if (bit_depth != 8 || (color_type != 0 && color_type != 2 && color_type != 6)) {
                throw FormatError("png: " + name + ": only 8-bit gray/RGB/RGBA supported");
            }
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            saw_end = true;
            break;
        }
        pos += 12 + len;
    }
    if (width == 0 || height == 0 || color_type < 0) throw FormatError("png: " + name + ": missing IHDR");
    if (!saw_end) throw FormatError("png: " + name + ": missing IEND");

    size_t chans = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
    size_t stride = width * chans;
    std::vector<uint8_t> raw((stride + 1) * height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (rc != Z_OK || raw_len != raw.size()) {
        throw FormatError("png: " + name + ": corrupt image data");
    }

    // undo per-scanline filters in place
    std::vector<uint8_t> prev(stride, 0);
    Image img;
    img.width = width;
    img.height = height;
    img.rgb.resize(width * height * 3);
    for (size_t y = 0; y < height; ++y) {
        uint8_t filter = raw[y * (stride + 1)];
        uint8_t* line = &raw[y * (stride + 1) + 1];
        switch (filter) {
        case 0:
            break;
        case 1:
            for (size_t i = chans; i < stride; ++i) line[i] = uint8_t(line[i] + line[i - chans]);
            break;
        case 2:
            for (size_t i = 0; i < stride; ++i) line[i] = uint8_t(line[i] + prev[i]);
            break;
        case 3:
            for (size_t i = 0; i < stride; ++i) {
                int left = i >= chans ? line[i - chans] : 0;
                line[i] = uint8_t(line[i] + ((left + prev[i]) >> 1));
            }
            break;
        case 4:
            for (size_t i = 0; i < stride; ++i) {
                int left = i >= chans ? line[i - chans] : 0;
                int up_left = i >= chans ? prev[i - chans] : 0;
                line[i] = uint8_t(line[i] + detail::paeth(left, prev[i], up_left));
            }
            break;
        default:
            throw FormatError("png: " + name + ": unknown filter " + std::to_string(filter));
        }
        std::memcpy(prev.data(), line, stride);
        uint8_t* dst = img.pixel(y, 0);
        if (chans == 1) {
            for (size_t x = 0; x < width; ++x) {
                dst[x * 3] = dst[x * 3 + 1] = dst[x * 3 + 2] = line[x];
            }
        } else if (chans == 3) {
            std::memcpy(dst, line, stride);
        } else {
            for (size_t x = 0; x < width; ++x) { // drop alpha
                dst[x * 3] = line[x * 4];
                dst[x * 3 + 1] = line[x * 4 + 1];
                dst[x * 3 + 2] = line[x * 4 + 2];
            }
        }
    }
    return img;
}

inline Image read_png_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return decode_png(bytes, path);
}

inline std::vector<uint8_t> encode_png(const Image& img) {
    std::vector<uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
    auto chunk = [&out](const char* type, const std::vector<uint8_t>& payload) {
        detail::put_be32(out, static_cast<uint32_t>(payload.size()));
        size_t start = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), payload.begin(), payload.end());
        uint32_t crc = static_cast<uint32_t>(
            crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
        detail::put_be32(out, crc);
    };
    std::vector<uint8_t> ihdr;
    detail::put_be32(ihdr, static_cast<uint32_t>(img.width));
    detail::put_be32(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    chunk("IHDR", ihdr);

    size_t stride = img.width * 3;
    std::vector<uint8_t> raw((stride + 1) * img.height);
    for (size_t y = 0; y < img.height; ++y) {
        raw[y * (stride + 1)] = 0; // filter: none
        std::memcpy(&raw[y * (stride + 1) + 1], img.pixel(y, 0), stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size())) != Z_OK) {
        throw IoError("png: compression failed");
    }
    compressed.resize(bound);
    chunk("IDAT", compressed);
    chunk("IEND", {});
    return out;
}

inline void write_png_file(const std::string& path, const Image& img) {
    auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

#endif // SWINECAT_HAS_PNG

/// Reads PPM always; PNG when compiled in (dispatch on extension).
inline Image read_image_file(const std::string& path) {
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == "ppm") return read_ppm_file(path);
#ifdef SWINECAT_HAS_PNG
    if (ext == "png") return read_png_file(path);
#endif
    throw IoError("unsupported image format: " + path);
}

// --- resize / crop -----------------------------------------------------------

/// Bilinear resize with half-pixel centers. Identity when the size is
/// unchanged (bit-exact pass-through).
inline FloatImage resize_bilinear(const Image& src, size_t out_w, size_t out_h) {
    if (src.width == 0 || src.height == 0) throw IoError("resize: degenerate source image");
    if (out_w == 0 || out_h == 0) throw ContractError("resize: degenerate target size");
    FloatImage dst;
    dst.width = out_w;
    dst.height = out_h;
    dst.rgb.resize(out_w * out_h * 3);
    if (out_w == src.width && out_h == src.height) {
        for (size_t i = 0; i < dst.rgb.size(); ++i) dst.rgb[i] = static_cast<float>(src.rgb[i]);
        return dst;
    }
    double sx = static_cast<double>(src.width) / out_w;
    double sy = static_cast<double>(src.height) / out_h;
    for (size_t y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        double y0f = std::floor(fy);
        double wy = fy - y0f;
        long y0 = std::clamp<long>(static_cast<long>(y0f), 0, static_cast<long>(src.height) - 1);
        long y1 = std::clamp<long>(y0 + 1, 0, static_cast<long>(src.height) - 1);
        for (size_t x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            double x0f = std::floor(fx);
            double wx = fx - x0f;
            long x0 = std::clamp<long>(static_cast<long>(x0f), 0, static_cast<long>(src.width) - 1);
            long x1 = std::clamp<long>(x0 + 1, 0, static_cast<long>(src.width) - 1);
            const uint8_t* p00 = src.pixel(static_cast<size_t>(y0), static_cast<size_t>(x0));
            const uint8_t* p01 = src.pixel(static_cast<size_t>(y0), static_cast<size_t>(x1));
            const uint8_t* p10 = src.pixel(static_cast<size_t>(y1), static_cast<size_t>(x0));
            const uint8_t* p11 = src.pixel(static_cast<size_t>(y1), static_cast<size_t>(x1));
            float* d = dst.pixel(y, x);
            for (int c = 0; c < 3; ++c) {
                double top = p00[c] + (p01[c] - p00[c]) * wx;
                double bot = p10[c] + (p11[c] - p10[c]) * wx;
                d[c] = static_cast<float>(top + (bot - top) * wy);
            }
        }
    }
    return dst;
}

/// Scales so the short side equals `short_target`, keeping aspect ratio;
/// the long side is floor(short_target * long / short).
inline FloatImage resize_short_side(const Image& src, size_t short_target) {
    if (src.width == 0 || src.height == 0) throw IoError("resize: degenerate source image");
    size_t out_w, out_h;
    if (src.width <= src.height) {
        out_w = short_target;
        out_h = (src.height * short_target) / src.width;
    } else {
        out_h = short_target;
        out_w = (src.width * short_target) / src.height;
    }
    return resize_bilinear(src, out_w, out_h);
}

/// Center crop; offsets are floor((size - crop) / 2).
inline FloatImage center_crop(const FloatImage& src, size_t crop) {
    if (src.width < crop || src.height < crop) {
        throw ContractError("center_crop: image " + std::to_string(src.width) + "x" +
                            std::to_string(src.height) + " smaller than crop " +
                            std::to_string(crop));
    }
    size_t x0 = (src.width - crop) / 2;
    size_t y0 = (src.height - crop) / 2;
    FloatImage dst;
    dst.width = crop;
    dst.height = crop;
    dst.rgb.resize(crop * crop * 3);
    for (size_t y = 0; y < crop; ++y) {
        std::memcpy(dst.pixel(y, 0), src.pixel(y0 + y, x0), crop * 3 * sizeof(float));
    }
    return dst;
}

} // namespace swinecat
