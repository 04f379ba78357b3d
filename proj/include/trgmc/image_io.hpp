#pragma once

#include <trgmc/image.hpp>

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace trgmc {

struct ImageIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 8-bit raster as stored on disk; channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<uint8_t> data;  // row-major, interleaved

    ImageU8() = default;
    ImageU8(int w, int h, int c)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, 0) {}
};

inline Image to_gray(const ImageU8& in) {
    Image out(in.width, in.height);
    const size_t n = static_cast<size_t>(in.width) * in.height;
    if (in.channels == 1) {
        for (size_t i = 0; i < n; ++i) out.px[i] = in.data[i] / 255.0f;
    } else {
        for (size_t i = 0; i < n; ++i) {
            const uint8_t* p = &in.data[i * 3];
            // Standard luminance weighting.
            out.px[i] = (0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2]) / 255.0f;
        }
    }
    return out;
}

inline ImageU8 from_gray(const Image& in) {
    ImageU8 out(in.width, in.height, 1);
    const size_t n = static_cast<size_t>(in.width) * in.height;
    for (size_t i = 0; i < n; ++i) {
        float v = std::clamp(in.px[i], 0.0f, 1.0f);
        out.data[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

// ---------------------------------------------------------------------------
// PGM / PPM (binary P5 / P6, maxval 255)
// ---------------------------------------------------------------------------

namespace detail {

inline int read_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, reads one nonnegative integer.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw ImageIoError("pnm: unexpected end of header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

}  // namespace detail

inline ImageU8 read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError("cannot open " + path);
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
        throw ImageIoError("not a binary PGM/PPM file: " + path);
    }
    const int channels = magic[1] == '5' ? 1 : 3;
    const int w = detail::read_pnm_token(in);
    const int h = detail::read_pnm_token(in);
    const int maxval = detail::read_pnm_token(in);
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw ImageIoError("unsupported PNM geometry in " + path);
    }
    ImageU8 out(w, h, channels);
    in.read(reinterpret_cast<char*>(out.data.data()),
            static_cast<std::streamsize>(out.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(out.data.size())) {
        throw ImageIoError("truncated PNM data in " + path);
    }
    return out;
}

inline void write_pnm(const std::string& path, const ImageU8& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError("cannot write " + path);
    out << (img.channels == 1 ? "P5" : "P6") << "\n"
        << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw ImageIoError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// PNG via libpng
// ---------------------------------------------------------------------------

inline ImageU8 read_png(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!fp) throw ImageIoError("cannot open " + path);
    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8)) {
        throw ImageIoError("not a PNG file: " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("libpng init failed");
    }
    ImageU8 out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("libpng read error in " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("unsupported PNG channel count in " + path);
    }
    out = ImageU8(static_cast<int>(w), static_cast<int>(h), channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) {
        rows[y] = out.data.data() + static_cast<size_t>(y) * w * channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

inline void write_png(const std::string& path, const ImageU8& img) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw ImageIoError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("libpng write error for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] = const_cast<png_bytep>(img.data.data() +
                                        static_cast<size_t>(y) * img.width * img.channels);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------------------
// Extension dispatch
// ---------------------------------------------------------------------------

inline bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline ImageU8 load_image(const std::string& path) {
    if (has_suffix(path, ".png") || has_suffix(path, ".PNG")) return read_png(path);
    if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm") ||
        has_suffix(path, ".PGM") || has_suffix(path, ".PPM")) {
        return read_pnm(path);
    }
    throw ImageIoError("unsupported image format: " + path);
}

inline void save_image(const std::string& path, const ImageU8& img) {
    if (has_suffix(path, ".png") || has_suffix(path, ".PNG")) {
        write_png(path, img);
        return;
    }
    if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm") ||
        has_suffix(path, ".PGM") || has_suffix(path, ".PPM")) {
        write_pnm(path, img);
        return;
    }
    throw ImageIoError("unsupported image format: " + path);
}

inline Image load_gray(const std::string& path) { return to_gray(load_image(path)); }

inline void save_gray(const std::string& path, const Image& img) {
    save_image(path, from_gray(img));
}

}  // namespace trgmc
