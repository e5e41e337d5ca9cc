// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "handrect/grid.hpp"
#include "handrect/image_io.hpp"
#include "handrect/mesh.hpp"

namespace handrect {

// Rendered hand depth prior. Background is 0; hand surfaces are remapped
// per hand to [0.2, 1.0] with the nearest surface at 1.0.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    DepthMap() = default;
    DepthMap(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, 0.0f) {}

    float at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    float& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }

    Grid to_grid() const {
        Grid g(1, height, width);
        std::copy(values.begin(), values.end(), g.data.begin());
        return g;
    }

    static DepthMap from_grid(const Grid& g) {
        if (g.channels != 1) throw std::invalid_argument("DepthMap: expected 1-channel grid");
        DepthMap d(g.width, g.height);
        std::copy(g.data.begin(), g.data.end(), d.values.begin());
        return d;
    }

    // Persisted as 16-bit grayscale PNG, value = round(65535 * d).
    void save_png(const std::string& path) const {
        std::vector<uint16_t> q(values.size());
        for (size_t i = 0; i < values.size(); ++i) {
            q[i] = static_cast<uint16_t>(
                std::clamp<long>(std::lround(65535.0 * values[i]), 0, 65535));
        }
        write_png16_gray(path, q, width, height);
    }

    static DepthMap load_png(const std::string& path) {
        PngData d = read_png_data(path);
        DepthMap out(d.width, d.height);
        if (d.bit_depth == 16) {
            for (size_t i = 0; i < out.values.size(); ++i) {
                out.values[i] = static_cast<float>(d.values16[i]) / 65535.0f;
            }
        } else if (d.channels == 1) {
            for (size_t i = 0; i < out.values.size(); ++i) {
                out.values[i] = static_cast<float>(d.bytes8[i]) / 255.0f;
            }
        } else {
            throw std::runtime_error("DepthMap: expected grayscale PNG: " + path);
        }
        return out;
    }
};

namespace raster {

inline double orient2d(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Top-left fill rule for positively-oriented (clockwise on a y-down screen)
// triangles: an edge owns pixel centers that land exactly on it iff it is a
// horizontal top edge or a left edge.
inline bool edge_is_top_left(double dx, double dy) {
    return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

struct ProjectedVertex {
    double x, y;   // pixel coordinates
    double inv_z;  // 1/z, interpolated linearly in screen space
};

}  // namespace raster

// Z-buffer rasterization of hand meshes under one pinhole camera, then a
// per-hand linear remap of surface depth: nearest referenced vertex -> 1.0,
// furthest -> 0.2. Constant-depth hands map to 1.0. Depth across a triangle
// is perspective-correct (inverse depth interpolated in screen space), so a
// per-pixel ray/triangle oracle sees identical values.
inline DepthMap render_depth(const std::vector<TriangleMesh>& meshes, const PinholeCamera& cam) {
    cam.validate();
    const int W = cam.width, H = cam.height;
    DepthMap out(W, H);
    if (meshes.empty()) return out;

    std::vector<double> zbuf(static_cast<size_t>(W) * H, std::numeric_limits<double>::infinity());
    std::vector<int> owner(static_cast<size_t>(W) * H, -1);
    std::vector<double> z_near(meshes.size()), z_far(meshes.size());

    for (size_t h = 0; h < meshes.size(); ++h) {
        const TriangleMesh& mesh = meshes[h];
        mesh.validate();
        if (!mesh.renderable()) {
            throw std::invalid_argument("render_depth: mesh " + std::to_string(h) +
                                        " is not renderable (needs faces and positive depths)");
        }
        // depth range over vertices referenced by faces
        double zn = std::numeric_limits<double>::infinity(), zf = 0.0;
        for (const auto& f : mesh.faces) {
            for (int idx : f) {
                double z = mesh.vertices[static_cast<size_t>(idx)].z;
                zn = std::min(zn, z);
                zf = std::max(zf, z);
            }
        }
        z_near[h] = zn;
        z_far[h] = zf;

        std::vector<raster::ProjectedVertex> proj(mesh.vertices.size());
        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            const Vec3& v = mesh.vertices[i];
            Vec2 p = project_point(v, cam);
            proj[i] = {p.x, p.y, 1.0 / v.z};
        }

        for (const auto& f : mesh.faces) {
            raster::ProjectedVertex v0 = proj[static_cast<size_t>(f[0])];
            raster::ProjectedVertex v1 = proj[static_cast<size_t>(f[1])];
            raster::ProjectedVertex v2 = proj[static_cast<size_t>(f[2])];
            double area = raster::orient2d(v0.x, v0.y, v1.x, v1.y, v2.x, v2.y);
            if (area == 0.0) continue;  // degenerate
            if (area < 0.0) {
                std::swap(v1, v2);
                area = -area;
            }
            int min_x = std::max(0, static_cast<int>(std::floor(std::min({v0.x, v1.x, v2.x}) - 0.5)));
            int max_x = std::min(W - 1, static_cast<int>(std::ceil(std::max({v0.x, v1.x, v2.x}))));
            int min_y = std::max(0, static_cast<int>(std::floor(std::min({v0.y, v1.y, v2.y}) - 0.5)));
            int max_y = std::min(H - 1, static_cast<int>(std::ceil(std::max({v0.y, v1.y, v2.y}))));

            bool tl0 = raster::edge_is_top_left(v2.x - v1.x, v2.y - v1.y);  // edge v1->v2, opp v0
            bool tl1 = raster::edge_is_top_left(v0.x - v2.x, v0.y - v2.y);  // edge v2->v0, opp v1
            bool tl2 = raster::edge_is_top_left(v1.x - v0.x, v1.y - v0.y);  // edge v0->v1, opp v2

            for (int y = min_y; y <= max_y; ++y) {
                double py = y + 0.5;
                for (int x = min_x; x <= max_x; ++x) {
                    double px = x + 0.5;
                    double w0 = raster::orient2d(v1.x, v1.y, v2.x, v2.y, px, py);
                    double w1 = raster::orient2d(v2.x, v2.y, v0.x, v0.y, px, py);
                    double w2 = raster::orient2d(v0.x, v0.y, v1.x, v1.y, px, py);
                    bool inside = (w0 > 0.0 || (w0 == 0.0 && tl0)) &&
                                  (w1 > 0.0 || (w1 == 0.0 && tl1)) &&
                                  (w2 > 0.0 || (w2 == 0.0 && tl2));
                    if (!inside) continue;
                    double inv_z = (w0 * v0.inv_z + w1 * v1.inv_z + w2 * v2.inv_z) / area;
                    double z = 1.0 / inv_z;
                    size_t pix = static_cast<size_t>(y) * W + x;
                    if (z < zbuf[pix]) {
                        zbuf[pix] = z;
                        owner[pix] = static_cast<int>(h);
                    }
                }
            }
        }
    }

    for (size_t pix = 0; pix < zbuf.size(); ++pix) {
        int h = owner[pix];
        if (h < 0) continue;
        double zn = z_near[static_cast<size_t>(h)], zf = z_far[static_cast<size_t>(h)];
        double v;
        if (zf - zn < 1e-12) {
            v = 1.0;  // constant-depth hand: maximal signal
        } else {
            v = 1.0 + (zbuf[pix] - zn) * (0.2 - 1.0) / (zf - zn);
            v = std::clamp(v, 0.2, 1.0);
        }
        out.values[pix] = static_cast<float>(v);
    }
    return out;
}

}  // namespace handrect
