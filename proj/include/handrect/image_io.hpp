// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "handrect/grid.hpp"

namespace handrect {

// Pixel values live in [-1, 1] in grid space; PNG files are 8-bit (images,
// masks) or 16-bit grayscale (depth maps).

inline uint8_t float_to_u8(float v) {
    float scaled = (v + 1.0f) * 127.5f;
    int i = static_cast<int>(std::lround(scaled));
    return static_cast<uint8_t>(std::clamp(i, 0, 255));
}

inline float u8_to_float(uint8_t b) { return static_cast<float>(b) / 127.5f - 1.0f; }

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::string temp_sibling(const std::string& path) {
    return path + ".tmp";
}

}  // namespace detail

// All writers go through a temp file + rename so outputs appear atomically.

inline void write_png_impl(const std::string& path, int width, int height, int channels,
                           int bit_depth, const unsigned char* data, size_t row_bytes) {
    const std::string tmp = detail::temp_sibling(path);
    {
        detail::FilePtr fp(std::fopen(tmp.c_str(), "wb"));
        if (!fp) throw std::runtime_error("png: cannot open for write: " + tmp);
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) throw std::runtime_error("png: create_write_struct failed");
        png_infop info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw std::runtime_error("png: create_info_struct failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw std::runtime_error("png: write failed: " + path);
        }
        png_init_io(png, fp.get());
        int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                     bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        if (bit_depth == 16) png_set_swap(png);  // buffers are little-endian uint16
        std::vector<png_bytep> rows(static_cast<size_t>(height));
        for (int y = 0; y < height; ++y) {
            rows[static_cast<size_t>(y)] =
                const_cast<png_bytep>(data + static_cast<size_t>(y) * row_bytes);
        }
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    std::filesystem::rename(tmp, path);
}

// Grid (1 or 3 channels, values in [-1,1]) -> 8-bit PNG.
inline void write_png(const std::string& path, const Grid& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw std::invalid_argument("write_png: grid must have 1 or 3 channels");
    }
    const int w = img.width, h = img.height, c = img.channels;
    std::vector<unsigned char> bytes(static_cast<size_t>(w) * h * c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                bytes[(static_cast<size_t>(y) * w + x) * c + ch] = float_to_u8(img.at(ch, y, x));
            }
        }
    }
    write_png_impl(path, w, h, c, 8, bytes.data(), static_cast<size_t>(w) * c);
}

// 16-bit grayscale writer used for depth maps (value = round(65535 * d)).
inline void write_png16_gray(const std::string& path, const std::vector<uint16_t>& values,
                             int width, int height) {
    if (values.size() != static_cast<size_t>(width) * height) {
        throw std::invalid_argument("write_png16_gray: size mismatch");
    }
    write_png_impl(path, width, height, 1, 16,
                   reinterpret_cast<const unsigned char*>(values.data()),
                   static_cast<size_t>(width) * 2);
}

struct PngData {
    int width = 0;
    int height = 0;
    int channels = 0;   // 1 or 3
    int bit_depth = 0;  // 8 or 16
    std::vector<uint8_t> bytes8;    // filled when bit_depth == 8
    std::vector<uint16_t> values16; // filled when bit_depth == 16 (grayscale only)
};

inline PngData read_png_data(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("png: cannot open for read: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png: create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: read failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);

    PngData out;
    out.width = static_cast<int>(w);
    out.height = static_cast<int>(h);

    bool wide_gray = depth == 16 && (color == PNG_COLOR_TYPE_GRAY);
    if (wide_gray) {
        png_set_swap(png);
        png_read_update_info(png, info);
        out.bit_depth = 16;
        out.channels = 1;
        out.values16.resize(static_cast<size_t>(w) * h);
        std::vector<png_bytep> rows(h);
        for (png_uint_32 y = 0; y < h; ++y) {
            rows[y] = reinterpret_cast<png_bytep>(out.values16.data() + static_cast<size_t>(y) * w);
        }
        png_read_image(png, rows.data());
    } else {
        if (depth == 16) png_set_strip_16(png);
        png_read_update_info(png, info);
        int ch = static_cast<int>(png_get_channels(png, info));
        if (ch != 1 && ch != 3) {
            png_destroy_read_struct(&png, &info, nullptr);
            throw std::runtime_error("png: unsupported channel count in " + path);
        }
        out.bit_depth = 8;
        out.channels = ch;
        out.bytes8.resize(static_cast<size_t>(w) * h * ch);
        std::vector<png_bytep> rows(h);
        for (png_uint_32 y = 0; y < h; ++y) {
            rows[y] = out.bytes8.data() + static_cast<size_t>(y) * w * ch;
        }
        png_read_image(png, rows.data());
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

// 8-bit PNG -> Grid in [-1,1] (1 or 3 channels).
inline Grid read_png(const std::string& path) {
    PngData d = read_png_data(path);
    if (d.bit_depth != 8) throw std::runtime_error("read_png: expected 8-bit image: " + path);
    Grid g(d.channels, d.height, d.width);
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            for (int c = 0; c < d.channels; ++c) {
                g.at(c, y, x) =
                    u8_to_float(d.bytes8[(static_cast<size_t>(y) * d.width + x) * d.channels + c]);
            }
        }
    }
    return g;
}

// Any PNG -> binary mask grid; nonzero pixels (any channel) are hand pixels.
inline Grid read_mask_png(const std::string& path) {
    PngData d = read_png_data(path);
    Grid m(1, d.height, d.width, 0.0f);
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            bool set = false;
            if (d.bit_depth == 16) {
                set = d.values16[static_cast<size_t>(y) * d.width + x] != 0;
            } else {
                for (int c = 0; c < d.channels; ++c) {
                    set |= d.bytes8[(static_cast<size_t>(y) * d.width + x) * d.channels + c] != 0;
                }
            }
            if (set) m.at(0, y, x) = 1.0f;
        }
    }
    return m;
}

// Grayscale view of any 8-bit PNG, for feature extraction. RGB uses the
// BT.601 luma weights.
inline Grid read_png_gray(const std::string& path) {
    Grid g = read_png(path);
    if (g.channels == 1) return g;
    Grid out(1, g.height, g.width);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            out.at(0, y, x) =
                0.299f * g.at(0, y, x) + 0.587f * g.at(1, y, x) + 0.114f * g.at(2, y, x);
        }
    }
    return out;
}

inline void atomic_write_text(const std::string& path, const std::string& text) {
    const std::string tmp = detail::temp_sibling(path);
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace handrect
