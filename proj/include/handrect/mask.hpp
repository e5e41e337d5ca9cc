// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "handrect/grid.hpp"

namespace handrect {

// Binary mask as a 1-channel grid with values in {0, 1}; 1 marks the hand
// region to regenerate.
inline Grid make_mask(int height, int width, float fill = 0.0f) {
    return Grid(1, height, width, fill);
}

inline bool is_binary_mask(const Grid& m) {
    if (m.channels != 1) return false;
    for (float v : m.data) {
        if (v != 0.0f && v != 1.0f) return false;
    }
    return true;
}

inline size_t mask_count(const Grid& m) {
    size_t n = 0;
    for (float v : m.data) {
        if (v != 0.0f) ++n;
    }
    return n;
}

inline bool mask_empty(const Grid& m) { return mask_count(m) == 0; }

// Chebyshev (square structuring element) dilation by `radius` pixels,
// separable row/column sliding max.
inline Grid dilate_mask(const Grid& m, int radius) {
    if (m.channels != 1) throw std::invalid_argument("dilate_mask: expected 1-channel mask");
    if (radius <= 0) return m;
    const int h = m.height, w = m.width;
    Grid tmp = m, out = m;
    // rows
    for (int y = 0; y < h; ++y) {
        const float* src = m.channel(0) + static_cast<size_t>(y) * w;
        float* dst = tmp.channel(0) + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            float v = 0.0f;
            int lo = std::max(0, x - radius), hi = std::min(w - 1, x + radius);
            for (int k = lo; k <= hi; ++k) v = std::max(v, src[k]);
            dst[x] = v;
        }
    }
    // columns
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            float v = 0.0f;
            int lo = std::max(0, y - radius), hi = std::min(h - 1, y + radius);
            for (int k = lo; k <= hi; ++k) v = std::max(v, tmp.at(0, k, x));
            out.at(0, y, x) = v;
        }
    }
    return out;
}

// Covering downsample: pixel (x, y) maps to cell (x*w/W, y*h/H); a cell is 1
// iff any covered pixel maps into it. Guarantees the latent mask covers the
// pixel mask for every resolution pair.
inline Grid downsample_mask(const Grid& pixel_mask, int latent_height, int latent_width) {
    if (pixel_mask.channels != 1) {
        throw std::invalid_argument("downsample_mask: expected 1-channel mask");
    }
    if (latent_height <= 0 || latent_width <= 0) {
        throw std::invalid_argument("downsample_mask: latent shape must be positive");
    }
    Grid out = make_mask(latent_height, latent_width);
    const int H = pixel_mask.height, W = pixel_mask.width;
    for (int y = 0; y < H; ++y) {
        int cy = static_cast<int>(static_cast<long long>(y) * latent_height / H);
        for (int x = 0; x < W; ++x) {
            if (pixel_mask.at(0, y, x) != 0.0f) {
                int cx = static_cast<int>(static_cast<long long>(x) * latent_width / W);
                out.at(0, cy, cx) = 1.0f;
            }
        }
    }
    return out;
}

// m (.) a + (1 - m) (.) b; a 1-channel mask broadcasts across channels.
inline Grid masked_compose(const Grid& a, const Grid& b, const Grid& m) {
    require_same_shape(a, b, "masked_compose");
    if (m.height != a.height || m.width != a.width ||
        (m.channels != 1 && m.channels != a.channels)) {
        throw std::invalid_argument("masked_compose: mask shape incompatible with inputs");
    }
    Grid out(a.channels, a.height, a.width);
    const size_t plane = static_cast<size_t>(a.height) * a.width;
    for (int c = 0; c < a.channels; ++c) {
        const float* ap = a.channel(c);
        const float* bp = b.channel(c);
        const float* mp = m.channel(m.channels == 1 ? 0 : c);
        float* op = out.channel(c);
        for (size_t i = 0; i < plane; ++i) {
            op[i] = mp[i] * ap[i] + (1.0f - mp[i]) * bp[i];
        }
    }
    return out;
}

inline Grid union_masks(const std::vector<Grid>& masks) {
    if (masks.empty()) throw std::invalid_argument("union_masks: empty list");
    Grid out = masks.front();
    for (size_t i = 1; i < masks.size(); ++i) {
        require_same_shape(out, masks[i], "union_masks");
        for (size_t k = 0; k < out.size(); ++k) {
            out.data[k] = std::max(out.data[k], masks[i].data[k]);
        }
    }
    return out;
}

}  // namespace handrect
