// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "handrect/control.hpp"
#include "handrect/diffusion.hpp"
#include "handrect/grid.hpp"
#include "handrect/rng.hpp"
#include "handrect/schedule.hpp"

namespace handrect {

struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        data.assign(n, 0.0f);
    }
    size_t size() const { return data.size(); }
};

// std::map keeps iteration order stable, which checksums and serialized
// checkpoints rely on.
using ParamStore = std::map<std::string, Tensor>;
using GradStore = std::map<std::string, std::vector<float>>;

inline uint64_t param_checksum(const ParamStore& params, const std::set<std::string>& names) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const std::string& name : names) {
        auto it = params.find(name);
        if (it == params.end()) throw std::invalid_argument("param_checksum: unknown " + name);
        h = fnv1a64(name.data(), name.size(), h);
        h = fnv1a64(it->second.data.data(), it->second.data.size() * sizeof(float), h);
    }
    return h;
}

namespace nn {

// 3x3 convolution, stride 1, zero padding = dilation (spatial size preserved).
// Channel planes are (h, w) contiguous; inner loops run along x so the
// compiler can vectorize them.

inline std::vector<float> pad_plane(const float* src, int h, int w, int p) {
    const int ph = h + 2 * p, pw = w + 2 * p;
    std::vector<float> out(static_cast<size_t>(ph) * pw, 0.0f);
    for (int y = 0; y < h; ++y) {
        std::memcpy(out.data() + static_cast<size_t>(y + p) * pw + p,
                    src + static_cast<size_t>(y) * w, sizeof(float) * static_cast<size_t>(w));
    }
    return out;
}

inline void conv3x3_forward(const Grid& in, const Tensor& weight, const Tensor& bias,
                            int dilation, Grid& out) {
    const int cin = in.channels, h = in.height, w = in.width;
    const int cout = weight.shape[0];
    if (weight.shape[1] != cin) throw std::invalid_argument("conv3x3: channel mismatch");
    if (!out.same_shape(Grid(cout, h, w))) out = Grid(cout, h, w);
    const int p = dilation, pw = w + 2 * p;

    std::vector<std::vector<float>> padded(static_cast<size_t>(cin));
    for (int ic = 0; ic < cin; ++ic) padded[static_cast<size_t>(ic)] = pad_plane(in.channel(ic), h, w, p);

    for (int oc = 0; oc < cout; ++oc) {
        float* op = out.channel(oc);
        const float b = bias.data[static_cast<size_t>(oc)];
        for (int i = 0; i < h * w; ++i) op[i] = b;
        for (int ic = 0; ic < cin; ++ic) {
            const float* pin = padded[static_cast<size_t>(ic)].data();
            const float* wk = weight.data.data() + (static_cast<size_t>(oc) * cin + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const float wv = wk[ky * 3 + kx];
                    if (wv == 0.0f) continue;
                    for (int y = 0; y < h; ++y) {
                        const float* row = pin + static_cast<size_t>(y + ky * dilation) * pw +
                                           kx * dilation;
                        float* orow = op + static_cast<size_t>(y) * w;
                        for (int x = 0; x < w; ++x) orow[x] += wv * row[x];
                    }
                }
            }
        }
    }
}

// Gradients for conv3x3. grad_in may be null when the input needs no
// gradient (first layer).
inline void conv3x3_backward(const Grid& in, const Tensor& weight, int dilation,
                             const Grid& grad_out, Grid* grad_in, std::vector<float>& grad_w,
                             std::vector<float>& grad_b) {
    const int cin = in.channels, h = in.height, w = in.width;
    const int cout = weight.shape[0];
    const int p = dilation, pw = w + 2 * p, ph = h + 2 * p;

    std::vector<std::vector<float>> padded(static_cast<size_t>(cin));
    for (int ic = 0; ic < cin; ++ic) padded[static_cast<size_t>(ic)] = pad_plane(in.channel(ic), h, w, p);

    for (int oc = 0; oc < cout; ++oc) {
        const float* gout = grad_out.channel(oc);
        double gb = 0.0;
        for (int i = 0; i < h * w; ++i) gb += gout[i];
        grad_b[static_cast<size_t>(oc)] += static_cast<float>(gb);
        for (int ic = 0; ic < cin; ++ic) {
            const float* pin = padded[static_cast<size_t>(ic)].data();
            float* gw = grad_w.data() + (static_cast<size_t>(oc) * cin + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    double acc = 0.0;
                    for (int y = 0; y < h; ++y) {
                        const float* row = pin + static_cast<size_t>(y + ky * dilation) * pw +
                                           kx * dilation;
                        const float* grow = gout + static_cast<size_t>(y) * w;
                        float local = 0.0f;
                        for (int x = 0; x < w; ++x) local += row[x] * grow[x];
                        acc += local;
                    }
                    gw[ky * 3 + kx] += static_cast<float>(acc);
                }
            }
        }
    }

    if (grad_in != nullptr) {
        if (!grad_in->same_shape(in)) *grad_in = Grid(cin, h, w);
        std::vector<float> gpad(static_cast<size_t>(ph) * pw);
        for (int ic = 0; ic < cin; ++ic) {
            std::fill(gpad.begin(), gpad.end(), 0.0f);
            for (int oc = 0; oc < cout; ++oc) {
                const float* gout = grad_out.channel(oc);
                const float* wk = weight.data.data() + (static_cast<size_t>(oc) * cin + ic) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const float wv = wk[ky * 3 + kx];
                        if (wv == 0.0f) continue;
                        for (int y = 0; y < h; ++y) {
                            float* grow = gpad.data() + static_cast<size_t>(y + ky * dilation) * pw +
                                          kx * dilation;
                            const float* gorow = gout + static_cast<size_t>(y) * w;
                            for (int x = 0; x < w; ++x) grow[x] += wv * gorow[x];
                        }
                    }
                }
            }
            float* gi = grad_in->channel(ic);
            for (int y = 0; y < h; ++y) {
                std::memcpy(gi + static_cast<size_t>(y) * w,
                            gpad.data() + static_cast<size_t>(y + p) * pw + p,
                            sizeof(float) * static_cast<size_t>(w));
            }
        }
    }
}

// 1x1 convolution (the zero-initialized control projections).
inline void conv1x1_forward(const Grid& in, const Tensor& weight, const Tensor& bias, Grid& out) {
    const int cin = in.channels, h = in.height, w = in.width;
    const int cout = weight.shape[0];
    if (!out.same_shape(Grid(cout, h, w))) out = Grid(cout, h, w);
    const int n = h * w;
    for (int oc = 0; oc < cout; ++oc) {
        float* op = out.channel(oc);
        const float b = bias.data[static_cast<size_t>(oc)];
        for (int i = 0; i < n; ++i) op[i] = b;
        for (int ic = 0; ic < cin; ++ic) {
            const float wv = weight.data[static_cast<size_t>(oc) * cin + ic];
            if (wv == 0.0f) continue;
            const float* ip = in.channel(ic);
            for (int i = 0; i < n; ++i) op[i] += wv * ip[i];
        }
    }
}

inline void conv1x1_backward(const Grid& in, const Tensor& weight, const Grid& grad_out,
                             Grid* grad_in, std::vector<float>& grad_w,
                             std::vector<float>& grad_b) {
    const int cin = in.channels, h = in.height, w = in.width;
    const int cout = weight.shape[0];
    const int n = h * w;
    for (int oc = 0; oc < cout; ++oc) {
        const float* gout = grad_out.channel(oc);
        double gb = 0.0;
        for (int i = 0; i < n; ++i) gb += gout[i];
        grad_b[static_cast<size_t>(oc)] += static_cast<float>(gb);
        for (int ic = 0; ic < cin; ++ic) {
            const float* ip = in.channel(ic);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += static_cast<double>(ip[i]) * gout[i];
            grad_w[static_cast<size_t>(oc) * cin + ic] += static_cast<float>(acc);
        }
    }
    if (grad_in != nullptr) {
        if (!grad_in->same_shape(in)) *grad_in = Grid(cin, h, w);
        std::fill(grad_in->data.begin(), grad_in->data.end(), 0.0f);
        for (int ic = 0; ic < cin; ++ic) {
            float* gi = grad_in->channel(ic);
            for (int oc = 0; oc < cout; ++oc) {
                const float wv = weight.data[static_cast<size_t>(oc) * cin + ic];
                if (wv == 0.0f) continue;
                const float* gout = grad_out.channel(oc);
                for (int i = 0; i < n; ++i) gi[i] += wv * gout[i];
            }
        }
    }
}

inline void relu_forward(Grid& g) {
    for (float& v : g.data) v = v > 0.0f ? v : 0.0f;
}

// grad masked by the pre-activation sign
inline void relu_backward(const Grid& pre, Grid& grad) {
    for (size_t i = 0; i < grad.size(); ++i) {
        if (pre.data[i] <= 0.0f) grad.data[i] = 0.0f;
    }
}

}  // namespace nn

// Small convolutional noise predictor. Input channels: noisy grid, mask,
// masked image, and two timestep-embedding planes (sqrt(ab), sqrt(1-ab)).
// Three dilated hidden blocks accept additive control features; the control
// branch mirrors them from the depth map through zero-initialized 1x1
// projections, ControlNet style.
struct ToyModelConfig {
    int image_size = 64;
    int features = 16;
    int total_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;

    static constexpr int kBlocks = 3;
    static constexpr int kDilations[kBlocks] = {1, 2, 4};
    static constexpr int kBaseInputChannels = 5;  // x_t, mask, masked, temb0, temb1
    static constexpr int kCtrlInputChannels = 4;  // depth, x_t, temb0, temb1

    nlohmann::json to_json() const {
        return {{"image_size", image_size},
                {"features", features},
                {"total_steps", total_steps},
                {"beta_start", beta_start},
                {"beta_end", beta_end}};
    }

    static ToyModelConfig from_json(const nlohmann::json& j) {
        ToyModelConfig c;
        c.image_size = j.at("image_size").get<int>();
        c.features = j.at("features").get<int>();
        c.total_steps = j.at("total_steps").get<int>();
        c.beta_start = j.at("beta_start").get<double>();
        c.beta_end = j.at("beta_end").get<double>();
        return c;
    }

    uint64_t hash() const {
        std::string s = to_json().dump();
        return fnv1a64(s.data(), s.size());
    }
};

class ToyModel {
public:
    explicit ToyModel(const ToyModelConfig& config = {})
        : config_(config),
          schedule_(NoiseSchedule::linear_beta(config.total_steps, config.beta_start,
                                               config.beta_end)) {}

    const ToyModelConfig& config() const { return config_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    bool has_control() const { return params_.count("ctrl.conv1.w") > 0; }

    static std::string base_prefix() { return "base."; }
    static std::string ctrl_prefix() { return "ctrl."; }

    std::set<std::string> param_names(const std::string& prefix) const {
        std::set<std::string> names;
        for (const auto& [name, t] : params_) {
            if (name.rfind(prefix, 0) == 0) names.insert(name);
        }
        return names;
    }

    void init_base(uint64_t seed) {
        const int f = config_.features;
        Rng rng(derive_seed(seed, "toy-base-init"));
        add_conv("base.conv1", ToyModelConfig::kBaseInputChannels, f, rng);
        add_conv("base.conv2", f, f, rng);
        add_conv("base.conv3", f, f, rng);
        add_conv("base.out", f, 1, rng);
    }

    void init_control(uint64_t seed) {
        const int f = config_.features;
        Rng rng(derive_seed(seed, "toy-ctrl-init"));
        add_conv("ctrl.conv1", ToyModelConfig::kCtrlInputChannels, f, rng);
        add_conv("ctrl.conv2", f, f, rng);
        add_conv("ctrl.conv3", f, f, rng);
        // zero-initialized projections: fine-tuning starts at base behavior
        add_zero_1x1("ctrl.zero1", f, f);
        add_zero_1x1("ctrl.zero2", f, f);
        add_zero_1x1("ctrl.zero3", f, f);
    }

    // ---- inference -------------------------------------------------------

    Grid assemble_base_input(const Grid& x_t, const Grid* mask, const Grid* masked_image,
                             int timestep) const {
        const int h = x_t.height, w = x_t.width;
        if (x_t.channels != 1) throw std::invalid_argument("toy model: expects 1-channel grids");
        Grid in(ToyModelConfig::kBaseInputChannels, h, w);
        std::copy(x_t.data.begin(), x_t.data.end(), in.channel(0));
        if (mask != nullptr) std::copy(mask->data.begin(), mask->data.end(), in.channel(1));
        if (masked_image != nullptr) {
            std::copy(masked_image->data.begin(), masked_image->data.end(), in.channel(2));
        }
        double ab = schedule_.alpha_bar(timestep);
        float t0 = static_cast<float>(std::sqrt(ab));
        float t1 = static_cast<float>(std::sqrt(1.0 - ab));
        float* p3 = in.channel(3);
        float* p4 = in.channel(4);
        for (int i = 0; i < h * w; ++i) {
            p3[i] = t0;
            p4[i] = t1;
        }
        return in;
    }

    // Noise prediction with optional pre-scaled per-block control features.
    Grid predict(const DenoiseInputs& in) const {
        if (in.x_t == nullptr) throw std::invalid_argument("toy model: x_t required");
        if (!in.control_features.empty() &&
            static_cast<int>(in.control_features.size()) != ToyModelConfig::kBlocks) {
            throw std::invalid_argument("toy model: expected 3 control blocks");
        }
        Grid x = assemble_base_input(*in.x_t, in.mask, in.masked_image, in.timestep);
        Grid h1, h2, h3, out;
        nn::conv3x3_forward(x, at("base.conv1.w"), at("base.conv1.b"),
                            ToyModelConfig::kDilations[0], h1);
        if (!in.control_features.empty()) add_inplace(h1, in.control_features[0]);
        nn::relu_forward(h1);
        nn::conv3x3_forward(h1, at("base.conv2.w"), at("base.conv2.b"),
                            ToyModelConfig::kDilations[1], h2);
        if (!in.control_features.empty()) add_inplace(h2, in.control_features[1]);
        nn::relu_forward(h2);
        nn::conv3x3_forward(h2, at("base.conv3.w"), at("base.conv3.b"),
                            ToyModelConfig::kDilations[2], h3);
        if (!in.control_features.empty()) add_inplace(h3, in.control_features[2]);
        nn::relu_forward(h3);
        nn::conv3x3_forward(h3, at("base.out.w"), at("base.out.b"), 1, out);
        return out;
    }

    // Unscaled control-branch block outputs for the given control image.
    std::vector<Grid> control_features(const Grid& control_image, const Grid& x_t,
                                       int timestep) const {
        if (!has_control()) throw std::runtime_error("toy model: control branch not initialized");
        Grid xc = assemble_control_input(control_image, x_t, timestep);
        Grid b1, b2, b3, c1, c2, c3;
        nn::conv3x3_forward(xc, at("ctrl.conv1.w"), at("ctrl.conv1.b"),
                            ToyModelConfig::kDilations[0], b1);
        nn::relu_forward(b1);
        nn::conv3x3_forward(b1, at("ctrl.conv2.w"), at("ctrl.conv2.b"),
                            ToyModelConfig::kDilations[1], b2);
        nn::relu_forward(b2);
        nn::conv3x3_forward(b2, at("ctrl.conv3.w"), at("ctrl.conv3.b"),
                            ToyModelConfig::kDilations[2], b3);
        nn::relu_forward(b3);
        nn::conv1x1_forward(b1, at("ctrl.zero1.w"), at("ctrl.zero1.b"), c1);
        nn::conv1x1_forward(b2, at("ctrl.zero2.w"), at("ctrl.zero2.b"), c2);
        nn::conv1x1_forward(b3, at("ctrl.zero3.w"), at("ctrl.zero3.b"), c3);
        return {std::move(c1), std::move(c2), std::move(c3)};
    }

    // ---- training --------------------------------------------------------

    enum class TrainMode { kBase, kControl };

    // Forward with caches, then backward from d(loss)/d(eps_pred).
    // kBase accumulates base gradients (control branch absent); kControl
    // accumulates control gradients only (base frozen), control strength 1.
    Grid train_forward(const Grid& x_t, const Grid* mask, const Grid* masked_image,
                       const Grid* control_image, int timestep, TrainMode mode) {
        cache_ = {};
        cache_.mode = mode;
        cache_.x = assemble_base_input(x_t, mask, masked_image, timestep);

        bool with_control = mode == TrainMode::kControl;
        if (with_control) {
            if (control_image == nullptr) {
                throw std::invalid_argument("toy model: control training needs a control image");
            }
            cache_.xc = assemble_control_input(*control_image, x_t, timestep);
            nn::conv3x3_forward(cache_.xc, at("ctrl.conv1.w"), at("ctrl.conv1.b"),
                                ToyModelConfig::kDilations[0], cache_.b1_pre);
            cache_.b1 = cache_.b1_pre;
            nn::relu_forward(cache_.b1);
            nn::conv3x3_forward(cache_.b1, at("ctrl.conv2.w"), at("ctrl.conv2.b"),
                                ToyModelConfig::kDilations[1], cache_.b2_pre);
            cache_.b2 = cache_.b2_pre;
            nn::relu_forward(cache_.b2);
            nn::conv3x3_forward(cache_.b2, at("ctrl.conv3.w"), at("ctrl.conv3.b"),
                                ToyModelConfig::kDilations[2], cache_.b3_pre);
            cache_.b3 = cache_.b3_pre;
            nn::relu_forward(cache_.b3);
            nn::conv1x1_forward(cache_.b1, at("ctrl.zero1.w"), at("ctrl.zero1.b"), cache_.c1);
            nn::conv1x1_forward(cache_.b2, at("ctrl.zero2.w"), at("ctrl.zero2.b"), cache_.c2);
            nn::conv1x1_forward(cache_.b3, at("ctrl.zero3.w"), at("ctrl.zero3.b"), cache_.c3);
        }

        nn::conv3x3_forward(cache_.x, at("base.conv1.w"), at("base.conv1.b"),
                            ToyModelConfig::kDilations[0], cache_.h1_pre);
        if (with_control) add_inplace(cache_.h1_pre, cache_.c1);
        cache_.h1 = cache_.h1_pre;
        nn::relu_forward(cache_.h1);
        nn::conv3x3_forward(cache_.h1, at("base.conv2.w"), at("base.conv2.b"),
                            ToyModelConfig::kDilations[1], cache_.h2_pre);
        if (with_control) add_inplace(cache_.h2_pre, cache_.c2);
        cache_.h2 = cache_.h2_pre;
        nn::relu_forward(cache_.h2);
        nn::conv3x3_forward(cache_.h2, at("base.conv3.w"), at("base.conv3.b"),
                            ToyModelConfig::kDilations[2], cache_.h3_pre);
        if (with_control) add_inplace(cache_.h3_pre, cache_.c3);
        cache_.h3 = cache_.h3_pre;
        nn::relu_forward(cache_.h3);
        Grid out;
        nn::conv3x3_forward(cache_.h3, at("base.out.w"), at("base.out.b"), 1, out);
        return out;
    }

    void train_backward(const Grid& grad_eps, GradStore& grads) {
        const bool train_base = cache_.mode == TrainMode::kBase;
        Grid gh3;
        nn::conv3x3_backward(cache_.h3, at("base.out.w"), 1, grad_eps, &gh3,
                             grad_buf(grads, "base.out.w", train_base),
                             grad_buf(grads, "base.out.b", train_base));
        nn::relu_backward(cache_.h3_pre, gh3);

        Grid gh2;
        nn::conv3x3_backward(cache_.h2, at("base.conv3.w"), ToyModelConfig::kDilations[2], gh3,
                             &gh2, grad_buf(grads, "base.conv3.w", train_base),
                             grad_buf(grads, "base.conv3.b", train_base));
        nn::relu_backward(cache_.h2_pre, gh2);

        Grid gh1;
        nn::conv3x3_backward(cache_.h1, at("base.conv2.w"), ToyModelConfig::kDilations[1], gh2,
                             &gh1, grad_buf(grads, "base.conv2.w", train_base),
                             grad_buf(grads, "base.conv2.b", train_base));
        nn::relu_backward(cache_.h1_pre, gh1);

        if (train_base) {
            nn::conv3x3_backward(cache_.x, at("base.conv1.w"), ToyModelConfig::kDilations[0], gh1,
                                 nullptr, grad_buf(grads, "base.conv1.w", true),
                                 grad_buf(grads, "base.conv1.b", true));
            return;
        }

        // control gradients: dL/dc_i equals the pre-activation gradient of
        // block i (additive injection at strength 1)
        Grid gb3, gb2, gb1, tmp;
        nn::conv1x1_backward(cache_.b3, at("ctrl.zero3.w"), gh3, &gb3,
                             grad_buf(grads, "ctrl.zero3.w", true),
                             grad_buf(grads, "ctrl.zero3.b", true));
        nn::relu_backward(cache_.b3_pre, gb3);
        nn::conv3x3_backward(cache_.b2, at("ctrl.conv3.w"), ToyModelConfig::kDilations[2], gb3,
                             &gb2, grad_buf(grads, "ctrl.conv3.w", true),
                             grad_buf(grads, "ctrl.conv3.b", true));
        nn::conv1x1_backward(cache_.b2, at("ctrl.zero2.w"), gh2, &tmp,
                             grad_buf(grads, "ctrl.zero2.w", true),
                             grad_buf(grads, "ctrl.zero2.b", true));
        add_inplace(gb2, tmp);
        nn::relu_backward(cache_.b2_pre, gb2);
        nn::conv3x3_backward(cache_.b1, at("ctrl.conv2.w"), ToyModelConfig::kDilations[1], gb2,
                             &gb1, grad_buf(grads, "ctrl.conv2.w", true),
                             grad_buf(grads, "ctrl.conv2.b", true));
        nn::conv1x1_backward(cache_.b1, at("ctrl.zero1.w"), gh1, &tmp,
                             grad_buf(grads, "ctrl.zero1.w", true),
                             grad_buf(grads, "ctrl.zero1.b", true));
        add_inplace(gb1, tmp);
        nn::relu_backward(cache_.b1_pre, gb1);
        nn::conv3x3_backward(cache_.xc, at("ctrl.conv1.w"), ToyModelConfig::kDilations[0], gb1,
                             nullptr, grad_buf(grads, "ctrl.conv1.w", true),
                             grad_buf(grads, "ctrl.conv1.b", true));
    }

    // ---- checkpoints -----------------------------------------------------

    nlohmann::json to_checkpoint(const std::string& kind) const {
        nlohmann::json j;
        j["schema"] = "toy-model/1";
        j["kind"] = kind;
        j["config"] = config_.to_json();
        j["config_hash"] = config_.hash();
        nlohmann::json tensors;
        for (const auto& [name, t] : params_) {
            tensors[name] = {{"shape", t.shape}, {"data", t.data}};
        }
        j["tensors"] = tensors;
        return j;
    }

    static ToyModel from_checkpoint(const nlohmann::json& j) {
        if (j.at("schema").get<std::string>() != "toy-model/1") {
            throw std::runtime_error("toy model: unsupported checkpoint schema");
        }
        ToyModel model(ToyModelConfig::from_json(j.at("config")));
        for (const auto& [name, tj] : j.at("tensors").items()) {
            Tensor t(tj.at("shape").get<std::vector<int>>());
            t.data = tj.at("data").get<std::vector<float>>();
            size_t n = 1;
            for (int d : t.shape) n *= static_cast<size_t>(d);
            if (t.data.size() != n) throw std::runtime_error("toy model: bad tensor " + name);
            model.params_[name] = std::move(t);
        }
        return model;
    }

    void save(const std::string& path, const std::string& kind) const {
        std::ofstream out(path + ".tmp");
        if (!out) throw std::runtime_error("toy model: cannot write " + path);
        out << to_checkpoint(kind).dump();
        out.close();
        std::filesystem::rename(path + ".tmp", path);
    }

    static ToyModel load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("toy model: cannot read " + path);
        nlohmann::json j;
        in >> j;
        return from_checkpoint(j);
    }

private:
    struct Cache {
        TrainMode mode = TrainMode::kBase;
        Grid x, xc;
        Grid h1_pre, h1, h2_pre, h2, h3_pre, h3;
        Grid b1_pre, b1, b2_pre, b2, b3_pre, b3;
        Grid c1, c2, c3;
    };

    const Tensor& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::runtime_error("toy model: missing param " + name);
        return it->second;
    }

    static void add_inplace(Grid& a, const Grid& b) {
        require_same_shape(a, b, "toy model: block add");
        for (size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
    }

    Grid assemble_control_input(const Grid& control_image, const Grid& x_t, int timestep) const {
        if (control_image.channels != 1 || control_image.height != x_t.height ||
            control_image.width != x_t.width) {
            throw std::invalid_argument("toy model: control image must match x_t spatially");
        }
        Grid in(ToyModelConfig::kCtrlInputChannels, x_t.height, x_t.width);
        std::copy(control_image.data.begin(), control_image.data.end(), in.channel(0));
        std::copy(x_t.data.begin(), x_t.data.end(), in.channel(1));
        double ab = schedule_.alpha_bar(timestep);
        float t0 = static_cast<float>(std::sqrt(ab));
        float t1 = static_cast<float>(std::sqrt(1.0 - ab));
        float* p2 = in.channel(2);
        float* p3 = in.channel(3);
        for (int i = 0; i < x_t.height * x_t.width; ++i) {
            p2[i] = t0;
            p3[i] = t1;
        }
        return in;
    }

    // He-style init for 3x3 convs; zero-init for the 1x1 projections.
    void add_conv(const std::string& name, int cin, int cout, Rng& rng) {
        Tensor w({cout, cin, 3, 3});
        float scale = std::sqrt(2.0f / (static_cast<float>(cin) * 9.0f));
        for (float& v : w.data) v = rng.normal_f() * scale;
        params_[name + ".w"] = std::move(w);
        params_[name + ".b"] = Tensor({cout});
    }

    void add_zero_1x1(const std::string& name, int cin, int cout) {
        params_[name + ".w"] = Tensor({cout, cin});
        params_[name + ".b"] = Tensor({cout});
    }

    static std::vector<float>& grad_buf(GradStore& grads, const std::string& name, bool wanted) {
        static thread_local std::vector<float> discard;
        if (!wanted) {
            discard.clear();
            discard.resize(1 << 12, 0.0f);
            return discard;
        }
        return grads[name];
    }

    ToyModelConfig config_;
    NoiseSchedule schedule_;
    ParamStore params_;
    Cache cache_;
};

// Adapter: the sampling loop sees the toy model through the generic
// denoiser/control interfaces.
class ToyDenoiser : public Denoiser {
public:
    explicit ToyDenoiser(const ToyModel& model) : model_(&model) {}
    Grid predict(const DenoiseInputs& in) const override { return model_->predict(in); }

private:
    const ToyModel* model_;
};

class ToyControlBranch : public ControlBranch {
public:
    explicit ToyControlBranch(const ToyModel& model) : model_(&model) {}

    std::vector<Grid> features(const Grid& control_image, const Grid& x_t, int timestep,
                               const Conditioning* /*cond*/) const override {
        return model_->control_features(control_image, x_t, nullptr, nullptr, timestep);
    }

    int block_count() const override { return ToyModelConfig::kBlocks; }

private:
    const ToyModel* model_;
};

}  // namespace handrect
