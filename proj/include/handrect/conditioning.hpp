// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "handrect/grid.hpp"
#include "handrect/rng.hpp"

namespace handrect {

// Prompt conditioning: the source text plus the embedding produced by a
// TextEncoder. Keeping the text around lets negative prompts be combined at
// the string level and re-encoded, which is how the concatenation is defined.
struct Conditioning {
    std::string text;
    std::vector<float> embedding;
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual Conditioning encode(const std::string& text) const = 0;
    virtual int dim() const = 0;
};

// Deterministic stand-in encoder: each whitespace token contributes a
// Gaussian vector seeded by its hash; the sum is scaled by 1/sqrt(count).
// No pretrained weights involved, which keeps CI hermetic.
class HashTextEncoder : public TextEncoder {
public:
    explicit HashTextEncoder(int dim = 64) : dim_(dim) {}

    Conditioning encode(const std::string& text) const override {
        Conditioning c;
        c.text = text;
        c.embedding.assign(static_cast<size_t>(dim_), 0.0f);
        std::vector<std::string> tokens = tokenize(text);
        for (const std::string& tok : tokens) {
            Rng rng(derive_seed(fnv1a64(tok.data(), tok.size()), "tok-embed"));
            for (int i = 0; i < dim_; ++i) {
                c.embedding[static_cast<size_t>(i)] += rng.normal_f();
            }
        }
        if (!tokens.empty()) {
            float s = 1.0f / std::sqrt(static_cast<float>(tokens.size()));
            for (float& v : c.embedding) v *= s;
        }
        return c;
    }

    int dim() const override { return dim_; }

private:
    static std::vector<std::string> tokenize(const std::string& text) {
        std::vector<std::string> out;
        std::string cur;
        for (char ch : text) {
            if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    }

    int dim_;
};

// Joins the extra negative prompt with the standard negative prompt and
// encodes the result. An empty side contributes nothing.
inline std::string join_prompts(const std::string& extra, const std::string& standard) {
    if (extra.empty()) return standard;
    if (standard.empty()) return extra;
    return extra + ", " + standard;
}

inline Conditioning combine_negative_conditioning(const TextEncoder& encoder,
                                                  const Conditioning& extra,
                                                  const Conditioning& standard) {
    return encoder.encode(join_prompts(extra.text, standard.text));
}

}  // namespace handrect
