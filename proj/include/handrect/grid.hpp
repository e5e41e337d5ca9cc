// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace handrect {

// Dense (channels, height, width) float array. Used for pixel-space images
// and latents alike; all sampling math is defined on this one type.
struct Grid {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Grid() = default;
    Grid(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, fill) {
        if (c <= 0 || h <= 0 || w <= 0) {
            throw std::invalid_argument("Grid: dimensions must be positive");
        }
    }

    size_t size() const { return data.size(); }
    bool same_shape(const Grid& other) const {
        return channels == other.channels && height == other.height && width == other.width;
    }
    std::string shape_str() const {
        return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
               std::to_string(width) + ")";
    }

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    float* channel(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
    const float* channel(int c) const {
        return data.data() + static_cast<size_t>(c) * height * width;
    }

    bool all_finite() const {
        for (float v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

inline void require_same_shape(const Grid& a, const Grid& b, const char* where) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(where) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    }
}

inline Grid operator+(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "Grid::operator+");
    Grid out = a;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

inline Grid operator-(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "Grid::operator-");
    Grid out = a;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

inline Grid operator*(const Grid& a, float s) {
    Grid out = a;
    for (float& v : out.data) v *= s;
    return out;
}

inline Grid operator*(float s, const Grid& a) { return a * s; }

inline double grid_rms(const Grid& a) {
    double acc = 0.0;
    for (float v : a.data) acc += static_cast<double>(v) * v;
    return std::sqrt(acc / static_cast<double>(a.size()));
}

inline double grid_rms_diff(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "grid_rms_diff");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - b.data[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

inline double grid_max_abs_diff(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "grid_max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
    }
    return m;
}

inline Grid resize_bilinear(const Grid& in, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_bilinear: bad shape");
    Grid out(in.channels, out_h, out_w);
    const double sy = static_cast<double>(in.height) / out_h;
    const double sx = static_cast<double>(in.width) / out_w;
    for (int c = 0; c < in.channels; ++c) {
        for (int y = 0; y < out_h; ++y) {
            double fy = (y + 0.5) * sy - 0.5;
            int y0 = static_cast<int>(std::floor(fy));
            double wy = fy - y0;
            int y0c = std::min(std::max(y0, 0), in.height - 1);
            int y1c = std::min(std::max(y0 + 1, 0), in.height - 1);
            for (int x = 0; x < out_w; ++x) {
                double fx = (x + 0.5) * sx - 0.5;
                int x0 = static_cast<int>(std::floor(fx));
                double wx = fx - x0;
                int x0c = std::min(std::max(x0, 0), in.width - 1);
                int x1c = std::min(std::max(x0 + 1, 0), in.width - 1);
                double v = (1 - wy) * ((1 - wx) * in.at(c, y0c, x0c) + wx * in.at(c, y0c, x1c)) +
                           wy * ((1 - wx) * in.at(c, y1c, x0c) + wx * in.at(c, y1c, x1c));
                out.at(c, y, x) = static_cast<float>(v);
            }
        }
    }
    return out;
}

// Nearest-neighbor resize; preserves the exact value set, which matters for
// masks and normalized depth maps.
inline Grid resize_nearest(const Grid& in, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_nearest: bad shape");
    Grid out(in.channels, out_h, out_w);
    for (int c = 0; c < in.channels; ++c) {
        for (int y = 0; y < out_h; ++y) {
            int sy = std::min(static_cast<int>((y + 0.5) * in.height / out_h), in.height - 1);
            for (int x = 0; x < out_w; ++x) {
                int sx = std::min(static_cast<int>((x + 0.5) * in.width / out_w), in.width - 1);
                out.at(c, y, x) = in.at(c, sy, sx);
            }
        }
    }
    return out;
}

// FNV-1a over raw bytes; used for content hashes of grids, parameters and files.
inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t grid_hash(const Grid& g) {
    uint64_t h = fnv1a64(&g.channels, sizeof(g.channels));
    h = fnv1a64(&g.height, sizeof(g.height), h);
    h = fnv1a64(&g.width, sizeof(g.width), h);
    return fnv1a64(g.data.data(), g.data.size() * sizeof(float), h);
}

}  // namespace handrect
