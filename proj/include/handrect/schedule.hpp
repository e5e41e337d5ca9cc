// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace handrect {

// Cumulative signal-retention sequence alpha_bar[0..T].
// alpha_bar[0] == 1 exactly, nonincreasing, alpha_bar[T] > 0.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    explicit NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
        validate();
    }

    // Linear-in-beta builder. beta_t = linspace(beta_start, beta_end, T),
    // alpha_bar[t] = prod_{s<=t} (1 - beta_s), alpha_bar[0] = 1.
    static NoiseSchedule linear_beta(int total_steps = 1000, double beta_start = 1e-4,
                                     double beta_end = 2e-2) {
        if (total_steps < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
        std::vector<double> ab(static_cast<size_t>(total_steps) + 1);
        ab[0] = 1.0;
        double acc = 1.0;
        for (int t = 1; t <= total_steps; ++t) {
            double beta =
                total_steps == 1
                    ? beta_start
                    : beta_start + (beta_end - beta_start) * (t - 1) / double(total_steps - 1);
            acc *= (1.0 - beta);
            ab[static_cast<size_t>(t)] = acc;
        }
        return NoiseSchedule(std::move(ab));
    }

    int total_steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }

    double alpha_bar(int t) const {
        if (t < 0 || t > total_steps()) {
            throw std::out_of_range("NoiseSchedule: timestep " + std::to_string(t) +
                                    " outside [0, " + std::to_string(total_steps()) + "]");
        }
        return alpha_bar_[static_cast<size_t>(t)];
    }

    const std::vector<double>& values() const { return alpha_bar_; }

    // Serialized as a bare JSON array of alpha_bar values.
    nlohmann::json to_json() const { return nlohmann::json(alpha_bar_); }

    static NoiseSchedule from_json(const nlohmann::json& j) {
        if (!j.is_array()) throw std::invalid_argument("NoiseSchedule: expected JSON array");
        return NoiseSchedule(j.get<std::vector<double>>());
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("NoiseSchedule: cannot write " + path);
        out << to_json().dump() << "\n";
    }

    static NoiseSchedule load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("NoiseSchedule: cannot read " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

private:
    void validate() const {
        if (alpha_bar_.size() < 2) {
            throw std::invalid_argument("NoiseSchedule: need alpha_bar for t in {0..T}, T >= 1");
        }
        if (alpha_bar_[0] != 1.0) {
            throw std::invalid_argument("NoiseSchedule: alpha_bar[0] must be exactly 1");
        }
        for (size_t t = 1; t < alpha_bar_.size(); ++t) {
            if (!(alpha_bar_[t] > 0.0) || alpha_bar_[t] > 1.0) {
                throw std::invalid_argument("NoiseSchedule: alpha_bar values must be in (0, 1]");
            }
            if (alpha_bar_[t] > alpha_bar_[t - 1]) {
                throw std::invalid_argument("NoiseSchedule: alpha_bar must be nonincreasing");
            }
        }
    }

    std::vector<double> alpha_bar_;
};

// Strictly increasing sampling subsequence tau_1 < ... < tau_S from {1..T}.
class TimestepPlan {
public:
    TimestepPlan() = default;

    TimestepPlan(std::vector<int> taus, int total_steps) : taus_(std::move(taus)) {
        if (taus_.empty()) throw std::invalid_argument("TimestepPlan: need S >= 1");
        int prev = 0;
        for (int t : taus_) {
            if (t <= prev || t > total_steps) {
                throw std::invalid_argument(
                    "TimestepPlan: taus must be strictly increasing within {1..T}");
            }
            prev = t;
        }
    }

    // Uniform spacing: tau_i = i*T/S for i = 1..S (so tau_S == T).
    static TimestepPlan uniform(int total_steps, int sample_steps = 50) {
        if (sample_steps < 1) throw std::invalid_argument("TimestepPlan: S must be >= 1");
        if (sample_steps > total_steps) sample_steps = total_steps;
        std::vector<int> taus(static_cast<size_t>(sample_steps));
        for (int i = 1; i <= sample_steps; ++i) {
            taus[static_cast<size_t>(i - 1)] =
                static_cast<int>((static_cast<long long>(i) * total_steps) / sample_steps);
        }
        // uniqueness is guaranteed when S <= T, but guard against rounding collisions
        for (size_t i = 1; i < taus.size(); ++i) {
            if (taus[i] <= taus[i - 1]) taus[i] = taus[i - 1] + 1;
        }
        return TimestepPlan(std::move(taus), total_steps);
    }

    int steps() const { return static_cast<int>(taus_.size()); }
    int tau(int i) const { return taus_.at(static_cast<size_t>(i - 1)); }  // 1-based, tau_1..tau_S
    const std::vector<int>& taus() const { return taus_; }

private:
    std::vector<int> taus_;
};

}  // namespace handrect
