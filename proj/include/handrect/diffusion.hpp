// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include "handrect/conditioning.hpp"
#include "handrect/grid.hpp"
#include "handrect/rng.hpp"
#include "handrect/schedule.hpp"

namespace handrect {

// Draws a standard-normal grid of the given shape from an explicit seed.
inline Grid gaussian_grid(int channels, int height, int width, uint64_t seed) {
    Grid g(channels, height, width);
    Rng rng(seed);
    for (float& v : g.data) v = rng.normal_f();
    return g;
}

// Forward noising with the noise supplied explicitly:
//   x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * noise
inline Grid forward_noise_with(const Grid& x0, int t, const NoiseSchedule& schedule,
                               const Grid& noise) {
    require_same_shape(x0, noise, "forward_noise_with");
    double ab = schedule.alpha_bar(t);
    float signal = static_cast<float>(std::sqrt(ab));
    float sigma = static_cast<float>(std::sqrt(1.0 - ab));
    Grid out = x0;
    for (size_t i = 0; i < out.size(); ++i) {
        out.data[i] = signal * out.data[i] + sigma * noise.data[i];
    }
    return out;
}

// Samples from N(sqrt(alpha_bar_t) * x0, (1 - alpha_bar_t) * I), reproducible
// under the given seed. t = 0 returns x0 exactly (zero variance).
inline Grid forward_noise(const Grid& x0, int t, const NoiseSchedule& schedule, uint64_t seed) {
    Grid noise = gaussian_grid(x0.channels, x0.height, x0.width, seed);
    return forward_noise_with(x0, t, schedule, noise);
}

// Deterministic update:
//   x0_hat = (x_t - sqrt(1 - ab_from) * eps) / sqrt(ab_from)
//   x_to   = sqrt(ab_to) * x0_hat + sqrt(1 - ab_to) * eps
inline Grid ddim_step(const Grid& x_t, const Grid& eps_pred, int t_from, int t_to,
                      const NoiseSchedule& schedule) {
    require_same_shape(x_t, eps_pred, "ddim_step");
    if (t_to >= t_from) {
        throw std::invalid_argument("ddim_step: t_to must be < t_from");
    }
    double ab_from = schedule.alpha_bar(t_from);
    double ab_to = schedule.alpha_bar(t_to);
    if (!(ab_from > 0.0)) {
        throw std::domain_error("ddim_step: alpha_bar at source timestep is zero");
    }
    double sqrt_ab_from = std::sqrt(ab_from);
    double sqrt_one_minus_from = std::sqrt(1.0 - ab_from);
    double sqrt_ab_to = std::sqrt(ab_to);
    double sqrt_one_minus_to = std::sqrt(1.0 - ab_to);

    // fold the two formulas into per-element coefficients: out = a*x_t + b*eps
    float a = static_cast<float>(sqrt_ab_to / sqrt_ab_from);
    float b = static_cast<float>(sqrt_one_minus_to - sqrt_ab_to * sqrt_one_minus_from / sqrt_ab_from);

    Grid out(x_t.channels, x_t.height, x_t.width);
    for (size_t i = 0; i < out.size(); ++i) {
        out.data[i] = a * x_t.data[i] + b * eps_pred.data[i];
    }
    return out;
}

// Classifier-free guidance composition: eps_neg + w * (eps_pos - eps_neg).
// w == 1 returns the positive branch bit-for-bit.
inline Grid guidance_compose(const Grid& eps_pos, const Grid& eps_neg, double w) {
    require_same_shape(eps_pos, eps_neg, "guidance_compose");
    if (w < 0.0) throw std::invalid_argument("guidance_compose: w must be >= 0");
    if (w == 1.0) return eps_pos;
    Grid out(eps_pos.channels, eps_pos.height, eps_pos.width);
    float wf = static_cast<float>(w);
    for (size_t i = 0; i < out.size(); ++i) {
        out.data[i] = eps_neg.data[i] + wf * (eps_pos.data[i] - eps_neg.data[i]);
    }
    return out;
}

// Guidance strength plus the three prompt branches that feed Eq-style
// composition: positive, standard negative, extra negative.
struct GuidanceConfig {
    double w = 7.5;
    Conditioning cond_positive;
    Conditioning cond_negative_standard;
    Conditioning cond_negative_extra;
};

// Everything a denoiser may condition on for one prediction.
struct DenoiseInputs {
    const Grid* x_t = nullptr;  // required
    int timestep = 0;
    const Conditioning* cond = nullptr;        // optional prompt conditioning
    const Grid* mask = nullptr;                // optional: latent-resolution mask (1 channel)
    const Grid* masked_image = nullptr;        // optional: masked known content, latent space
    std::span<const Grid> control_features{};  // optional: pre-scaled per-block features
};

// Noise-prediction contract: output shape equals input shape, deterministic
// given identical inputs.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Grid predict(const DenoiseInputs& in) const = 0;
};

}  // namespace handrect
