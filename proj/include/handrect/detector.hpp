// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "handrect/grid.hpp"
#include "handrect/mesh.hpp"

namespace handrect {

struct DetectedHand {
    Keypoints2D keypoints{};
    double confidence = 0.0;  // in [0, 1]
};

// Keypoint detector contract (re-measurement for adaptive strength, and the
// confidence metric). Implementations: fixture detectors reading stored
// keypoints, the toy glyph detector, or mocks in tests.
class HandDetector {
public:
    virtual ~HandDetector() = default;
    virtual std::vector<DetectedHand> detect(const Grid& image) const = 0;
};

}  // namespace handrect
