// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "handrect/detector.hpp"
#include "handrect/grid.hpp"
#include "handrect/rng.hpp"

namespace handrect {

// Gaussian fit of a feature stream.
struct FeatureStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    long count = 0;
};

// Streaming mean/covariance (Welford update with outer-product M2); merges
// associatively so partial accumulations can be combined.
class FeatureAccumulator {
public:
    explicit FeatureAccumulator(int dim) : dim_(dim) {
        if (dim <= 0) throw std::invalid_argument("FeatureAccumulator: dim must be positive");
        mean_ = Eigen::VectorXd::Zero(dim);
        m2_ = Eigen::MatrixXd::Zero(dim, dim);
    }

    void add(const Eigen::VectorXd& x) {
        if (x.size() != dim_) throw std::invalid_argument("FeatureAccumulator: dim mismatch");
        ++count_;
        Eigen::VectorXd delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        Eigen::VectorXd delta2 = x - mean_;
        m2_ += delta * delta2.transpose();
    }

    void add(const std::vector<double>& x) {
        add(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
    }

    void merge(const FeatureAccumulator& other) {
        if (other.dim_ != dim_) throw std::invalid_argument("FeatureAccumulator: dim mismatch");
        if (other.count_ == 0) return;
        if (count_ == 0) {
            mean_ = other.mean_;
            m2_ = other.m2_;
            count_ = other.count_;
            return;
        }
        const double na = static_cast<double>(count_), nb = static_cast<double>(other.count_);
        Eigen::VectorXd delta = other.mean_ - mean_;
        mean_ = (na * mean_ + nb * other.mean_) / (na + nb);
        m2_ += other.m2_ + (na * nb / (na + nb)) * (delta * delta.transpose());
        count_ += other.count_;
    }

    long count() const { return count_; }

    FeatureStats finalize() const {
        if (count_ < 2) {
            throw std::runtime_error("FeatureAccumulator: need at least 2 samples for covariance");
        }
        FeatureStats s;
        s.mean = mean_;
        Eigen::MatrixXd cov = m2_ / static_cast<double>(count_ - 1);
        s.covariance = 0.5 * (cov + cov.transpose());
        s.count = count_;
        return s;
    }

private:
    int dim_;
    long count_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd m2_;
};

namespace detail {

// Symmetric PSD square root via eigendecomposition, eigenvalues clamped at 0.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("sqrtm: eigendecomposition failed");
    }
    Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

// Trace of sqrt(sa * sb) computed on the symmetrized product
// sqrt(sa) * sb * sqrt(sa). Returns nullopt when the product is too
// indefinite to trust.
inline std::optional<double> trace_sqrt_product(const Eigen::MatrixXd& sa,
                                                const Eigen::MatrixXd& sb) {
    Eigen::MatrixXd root_a = sqrtm_psd(sa);
    Eigen::MatrixXd prod = root_a * sb * root_a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (prod + prod.transpose()));
    if (eig.info() != Eigen::Success) return std::nullopt;
    Eigen::VectorXd ev = eig.eigenvalues();
    double scale = std::max(1.0, std::abs(ev.maxCoeff()));
    if (ev.minCoeff() < -1e-6 * scale) return std::nullopt;
    return ev.cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace detail

// Frechet distance between Gaussian fits:
//   |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 sqrt(Sa Sb))
inline double fid(const FeatureStats& a, const FeatureStats& b) {
    if (a.mean.size() != b.mean.size()) throw std::invalid_argument("fid: dim mismatch");
    double mean_term = (a.mean - b.mean).squaredNorm();
    std::optional<double> trace_sqrt = detail::trace_sqrt_product(a.covariance, b.covariance);
    if (!trace_sqrt.has_value()) {
        // epsilon regularization, then give up
        const double eps = 1e-6;
        Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(a.mean.size(), a.mean.size());
        trace_sqrt = detail::trace_sqrt_product(a.covariance + eps * ident,
                                                b.covariance + eps * ident);
        if (!trace_sqrt.has_value()) {
            throw std::runtime_error("fid: covariance product not PSD after regularization");
        }
    }
    return mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * (*trace_sqrt);
}

struct KidConfig {
    int subset_size = 100;
    int subsets = 100;
    uint64_t seed = 0x6b6964u;  // subset-sampling stream
};

namespace detail {

// polynomial kernel (x.y/d + 1)^3
inline double kid_kernel(const std::vector<double>& x, const std::vector<double>& y) {
    double dot = 0.0;
    for (size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    double base = dot / static_cast<double>(x.size()) + 1.0;
    return base * base * base;
}

inline double mmd2_unbiased(const std::vector<const std::vector<double>*>& xs,
                            const std::vector<const std::vector<double>*>& ys) {
    const size_t m = xs.size(), n = ys.size();
    double sum_xx = 0.0, sum_yy = 0.0, sum_xy = 0.0;
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < m; ++j) {
            if (i != j) sum_xx += kid_kernel(*xs[i], *xs[j]);
        }
    }
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if (i != j) sum_yy += kid_kernel(*ys[i], *ys[j]);
        }
    }
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < n; ++j) sum_xy += kid_kernel(*xs[i], *ys[j]);
    }
    return sum_xx / (static_cast<double>(m) * (m - 1)) +
           sum_yy / (static_cast<double>(n) * (n - 1)) -
           2.0 * sum_xy / (static_cast<double>(m) * n);
}

inline std::vector<size_t> sample_without_replacement(size_t population, size_t k, Rng& rng) {
    std::vector<size_t> idx(population);
    for (size_t i = 0; i < population; ++i) idx[i] = i;
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(rng.below(population - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace detail

// Unbiased squared-MMD estimate with the cubic polynomial kernel, averaged
// over random equal-size subsets of both feature lists.
inline double kid(const std::vector<std::vector<double>>& features_a,
                  const std::vector<std::vector<double>>& features_b,
                  const KidConfig& config = {}) {
    if (features_a.empty() || features_b.empty()) {
        throw std::invalid_argument("kid: empty feature list");
    }
    const size_t m = static_cast<size_t>(config.subset_size);
    if (m < 2) throw std::invalid_argument("kid: subset size must be >= 2");
    if (features_a.size() < m || features_b.size() < m) {
        throw std::invalid_argument("kid: feature list shorter than subset size");
    }
    if (config.subsets < 1) throw std::invalid_argument("kid: need at least one subset");

    Rng rng(derive_seed(config.seed, "kid-subsets"));
    double acc = 0.0;
    for (int s = 0; s < config.subsets; ++s) {
        std::vector<size_t> ia = detail::sample_without_replacement(features_a.size(), m, rng);
        std::vector<size_t> ib = detail::sample_without_replacement(features_b.size(), m, rng);
        std::vector<const std::vector<double>*> xs(m), ys(m);
        for (size_t i = 0; i < m; ++i) {
            xs[i] = &features_a[ia[i]];
            ys[i] = &features_b[ib[i]];
        }
        acc += detail::mmd2_unbiased(xs, ys);
    }
    return acc / config.subsets;
}

struct ConfidenceReport {
    std::optional<double> mean;  // empty when no hands were detected
    size_t hands = 0;
    size_t images = 0;
    size_t images_with_detections = 0;
};

// Mean confidence over all detected hands; images with no detections are
// excluded from the mean and reported in the counts.
inline ConfidenceReport detection_confidence(const std::vector<std::vector<double>>& per_image) {
    ConfidenceReport r;
    r.images = per_image.size();
    double acc = 0.0;
    for (const auto& confs : per_image) {
        if (!confs.empty()) ++r.images_with_detections;
        for (double c : confs) {
            if (c < 0.0 || c > 1.0) {
                throw std::invalid_argument("detection_confidence: confidence outside [0, 1]");
            }
            acc += c;
            ++r.hands;
        }
    }
    if (r.hands > 0) r.mean = acc / static_cast<double>(r.hands);
    return r;
}

inline ConfidenceReport detection_confidence(const std::vector<Grid>& images,
                                             const HandDetector& detector) {
    std::vector<std::vector<double>> per_image;
    per_image.reserve(images.size());
    for (const Grid& img : images) {
        std::vector<double> confs;
        for (const DetectedHand& h : detector.detect(img)) confs.push_back(h.confidence);
        per_image.push_back(std::move(confs));
    }
    return detection_confidence(per_image);
}

// Deterministic image -> feature map contract.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<double> extract(const Grid& image) const = 0;
    virtual int dim() const = 0;
    virtual std::string name() const = 0;
};

// CI extractor: fixed seeded Gaussian projection of the grayscale image
// resized to a small patch. No pretrained weights; paper-comparable numbers
// need a learned extractor plugged in behind this interface instead.
class RandomProjectionExtractor : public FeatureExtractor {
public:
    explicit RandomProjectionExtractor(int dim = 64, int patch = 32, uint64_t seed = 17)
        : dim_(dim), patch_(patch) {
        const int n = patch_ * patch_;
        projection_.resize(static_cast<size_t>(dim_) * n);
        Rng rng(derive_seed(seed, "random-projection"));
        const double scale = 1.0 / std::sqrt(static_cast<double>(n));
        for (double& w : projection_) w = rng.normal() * scale;
    }

    std::vector<double> extract(const Grid& image) const override {
        Grid gray = image;
        if (gray.channels != 1) {
            Grid g(1, image.height, image.width);
            for (int y = 0; y < image.height; ++y) {
                for (int x = 0; x < image.width; ++x) {
                    g.at(0, y, x) = 0.299f * image.at(0, y, x) + 0.587f * image.at(1, y, x) +
                                    0.114f * image.at(2, y, x);
                }
            }
            gray = std::move(g);
        }
        Grid patch = resize_bilinear(gray, patch_, patch_);
        const int n = patch_ * patch_;
        std::vector<double> out(static_cast<size_t>(dim_), 0.0);
        for (int i = 0; i < dim_; ++i) {
            const double* row = projection_.data() + static_cast<size_t>(i) * n;
            double acc = 0.0;
            for (int k = 0; k < n; ++k) acc += row[k] * patch.data[static_cast<size_t>(k)];
            out[static_cast<size_t>(i)] = acc;
        }
        return out;
    }

    int dim() const override { return dim_; }
    std::string name() const override {
        return "random-proj-" + std::to_string(dim_) + "x" + std::to_string(patch_);
    }

private:
    int dim_;
    int patch_;
    std::vector<double> projection_;
};

struct MetricReport {
    double fid = 0.0;
    double kid = 0.0;
    std::optional<double> det_conf;
    std::optional<double> mpjpe;
    size_t ref_count = 0;
    size_t gen_count = 0;
    std::string extractor;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["fid"] = fid;
        j["kid"] = kid;
        j["det_conf"] = det_conf.has_value() ? nlohmann::json(*det_conf) : nlohmann::json();
        j["mpjpe"] = mpjpe.has_value() ? nlohmann::json(*mpjpe) : nlohmann::json();
        j["ref_count"] = ref_count;
        j["gen_count"] = gen_count;
        j["extractor"] = extractor;
        return j;
    }
};

}  // namespace handrect
