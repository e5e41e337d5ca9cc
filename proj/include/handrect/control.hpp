// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "handrect/conditioning.hpp"
#include "handrect/grid.hpp"

namespace handrect {

// Auxiliary encoder contract: maps the control image (here a rendered depth
// map) plus the current noisy grid to an ordered list of per-block feature
// grids that get added into the denoiser.
class ControlBranch {
public:
    virtual ~ControlBranch() = default;
    virtual std::vector<Grid> features(const Grid& control_image, const Grid& x_t, int timestep,
                                       const Conditioning* cond) const = 0;
    virtual int block_count() const = 0;
};

struct ControlStrength {
    double s = 0.55;

    explicit ControlStrength(double value) : s(value) {
        if (s < 0.0 || s > 1.0) {
            throw std::invalid_argument("ControlStrength: s must be in [0, 1]");
        }
    }
};

// Linear scaling of every encoder-block output by the strength scalar.
inline std::vector<Grid> scale_control(std::vector<Grid> features, double s) {
    if (features.empty()) throw std::invalid_argument("scale_control: empty feature list");
    float sf = static_cast<float>(s);
    for (Grid& g : features) {
        for (float& v : g.data) v *= sf;
    }
    return features;
}

// Fixed strength, or the adaptive scan over candidate strengths.
struct StrengthStrategy {
    enum class Kind { kFixed, kAdaptive };

    Kind kind = Kind::kFixed;
    double fixed_strength = 0.55;

    std::vector<double> candidates = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    double factor = 1.15;
    double reference_strength = 1.0;

    static StrengthStrategy fixed(double s) {
        StrengthStrategy st;
        st.kind = Kind::kFixed;
        st.fixed_strength = ControlStrength(s).s;
        return st;
    }

    static StrengthStrategy adaptive(std::vector<double> candidates = {0.4, 0.5, 0.6, 0.7, 0.8,
                                                                       0.9},
                                     double factor = 1.15, double reference_strength = 1.0) {
        StrengthStrategy st;
        st.kind = Kind::kAdaptive;
        st.candidates = std::move(candidates);
        st.factor = factor;
        st.reference_strength = reference_strength;
        st.validate();
        return st;
    }

    void validate() const {
        if (kind != Kind::kAdaptive) return;
        if (candidates.empty()) throw std::invalid_argument("adaptive: need candidates");
        double prev = 0.0;
        for (double c : candidates) {
            if (!(c > prev) || c > 1.0) {
                throw std::invalid_argument(
                    "adaptive: candidates must be strictly increasing within (0, 1]");
            }
            prev = c;
        }
        if (!(factor > 1.0)) throw std::invalid_argument("adaptive: factor must be > 1");
    }
};

struct AdaptiveTraceRow {
    double strength = 0.0;
    std::optional<double> error;
    bool is_reference = false;
};

// Raised when the error measurement fails on the reference sample or on
// every sample; carries the partial trace.
class DetectionFailureError : public std::runtime_error {
public:
    explicit DetectionFailureError(std::string msg, std::vector<AdaptiveTraceRow> trace)
        : std::runtime_error(std::move(msg)), trace_(std::move(trace)) {}
    const std::vector<AdaptiveTraceRow>& trace() const { return trace_; }

private:
    std::vector<AdaptiveTraceRow> trace_;
};

template <typename Sample>
struct AdaptiveOutcome {
    double chosen_strength = 1.0;
    Sample sample;
    std::vector<AdaptiveTraceRow> trace;
    int sampler_calls = 0;
};

// The adaptive scan: sample at the reference strength to establish
// ref_error, then walk the candidates in increasing order and return the
// first whose error drops below factor * ref_error; otherwise keep the
// reference sample. At most |candidates| + 1 sampler invocations.
//
// `sample(strength)` produces a sample; `measure(sample)` returns the error
// or nullopt on detection failure. A failed measurement on a candidate
// counts as above-threshold; a failed reference measurement aborts.
template <typename SampleFn, typename MeasureFn>
auto adaptive_strength_scan(const StrengthStrategy& strategy, SampleFn&& sample,
                            MeasureFn&& measure)
    -> AdaptiveOutcome<std::decay_t<decltype(sample(1.0))>> {
    strategy.validate();
    using Sample = std::decay_t<decltype(sample(1.0))>;
    AdaptiveOutcome<Sample> out;

    Sample reference = sample(strategy.reference_strength);
    ++out.sampler_calls;
    std::optional<double> ref_error = measure(reference);
    out.trace.push_back({strategy.reference_strength, ref_error, true});
    if (!ref_error.has_value()) {
        throw DetectionFailureError("adaptive strength: detection failed on reference sample",
                                    out.trace);
    }

    const double threshold = strategy.factor * (*ref_error);
    bool any_detected = true;  // reference succeeded
    for (double strength : strategy.candidates) {
        Sample candidate = sample(strength);
        ++out.sampler_calls;
        std::optional<double> error = measure(candidate);
        out.trace.push_back({strength, error, false});
        any_detected = any_detected || error.has_value();
        if (error.has_value() && *error < threshold) {
            out.chosen_strength = strength;
            out.sample = std::move(candidate);
            return out;
        }
    }
    out.chosen_strength = strategy.reference_strength;
    out.sample = std::move(reference);
    return out;
}

struct SweepRow {
    double strength = 0.0;
    std::optional<double> error;  // MPJPE or its toy analog
    std::map<std::string, double> aux;
    std::string image_ref;
    std::string failure;  // nonempty when this strength failed
};

struct PhaseSweepReport {
    std::vector<SweepRow> rows;

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : rows) {
            nlohmann::json row;
            row["strength"] = r.strength;
            if (r.error.has_value()) {
                row["error"] = *r.error;
            } else {
                row["error"] = nullptr;
            }
            row["aux"] = r.aux;
            row["image"] = r.image_ref;
            if (!r.failure.empty()) row["failure"] = r.failure;
            j.push_back(row);
        }
        return j;
    }

    std::string to_csv() const {
        std::ostringstream out;
        out << "strength,error,image,failure\n";
        out.precision(12);
        for (const auto& r : rows) {
            out << r.strength << ",";
            if (r.error.has_value()) out << *r.error;
            out << "," << r.image_ref << "," << r.failure << "\n";
        }
        return out.str();
    }
};

// One full run per strength; strengths must be unique. Per-strength failures
// are recorded in-row and the sweep continues.
template <typename RunFn>
PhaseSweepReport phase_sweep(const std::vector<double>& strengths, RunFn&& run) {
    if (strengths.empty()) throw std::invalid_argument("phase_sweep: empty strength list");
    for (size_t i = 0; i < strengths.size(); ++i) {
        for (size_t k = i + 1; k < strengths.size(); ++k) {
            if (strengths[i] == strengths[k]) {
                throw std::invalid_argument("phase_sweep: strengths must be unique");
            }
        }
    }
    PhaseSweepReport report;
    for (double s : strengths) {
        SweepRow row;
        row.strength = s;
        try {
            run(s, row);
        } catch (const std::exception& e) {
            row.failure = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace handrect
