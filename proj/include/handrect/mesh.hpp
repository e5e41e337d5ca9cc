// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace handrect {

inline constexpr int kHandVertexCount = 778;
inline constexpr int kHandKeypointCount = 21;

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

struct Vec2 {
    double x = 0, y = 0;
};

// Generic triangle mesh in camera-frame coordinates; +z points away from the
// camera along the view axis.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    void validate() const {
        for (const auto& f : faces) {
            for (int idx : f) {
                if (idx < 0 || idx >= static_cast<int>(vertices.size())) {
                    throw std::invalid_argument("TriangleMesh: face index out of range");
                }
            }
        }
    }

    bool renderable() const {
        for (const auto& v : vertices) {
            if (!(v.z > 0.0)) return false;
        }
        return !faces.empty();
    }
};

// A hand mesh is a triangle mesh with the standard vertex count expected by
// the keypoint regressor.
inline void require_hand_mesh(const TriangleMesh& mesh) {
    if (static_cast<int>(mesh.vertices.size()) != kHandVertexCount) {
        throw std::invalid_argument("hand mesh must have exactly " +
                                    std::to_string(kHandVertexCount) + " vertices, got " +
                                    std::to_string(mesh.vertices.size()));
    }
}

// v/f text format (1-based face indices) or JSON {"vertices", "faces"}
// (0-based). Dispatch on the first non-space character.
inline TriangleMesh parse_mesh_text(std::istream& in) {
    TriangleMesh mesh;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x >> v.y >> v.z)) throw std::invalid_argument("mesh: bad v line");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> f{};
            if (!(ls >> f[0] >> f[1] >> f[2])) throw std::invalid_argument("mesh: bad f line");
            for (int& idx : f) idx -= 1;
            mesh.faces.push_back(f);
        }
        // other tags ignored
    }
    mesh.validate();
    return mesh;
}

inline TriangleMesh mesh_from_json(const nlohmann::json& j) {
    TriangleMesh mesh;
    for (const auto& v : j.at("vertices")) {
        mesh.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()});
    }
    for (const auto& f : j.at("faces")) {
        mesh.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
    }
    mesh.validate();
    return mesh;
}

inline nlohmann::json mesh_to_json(const TriangleMesh& mesh) {
    nlohmann::json j;
    j["vertices"] = nlohmann::json::array();
    for (const auto& v : mesh.vertices) j["vertices"].push_back({v.x, v.y, v.z});
    j["faces"] = nlohmann::json::array();
    for (const auto& f : mesh.faces) j["faces"].push_back({f[0], f[1], f[2]});
    return j;
}

inline TriangleMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mesh: cannot read " + path);
    char first = 0;
    in >> std::ws;
    first = static_cast<char>(in.peek());
    if (first == '{') {
        nlohmann::json j;
        in >> j;
        return mesh_from_json(j);
    }
    return parse_mesh_text(in);
}

inline void save_mesh_text(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mesh_text: cannot write " + path);
    out.precision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
}

// Sparse 21x778 regressor; each row is a convex combination of vertices.
class KeypointRegressor {
public:
    struct Triplet {
        int row;
        int col;
        double weight;
    };

    KeypointRegressor(int rows, int cols, std::vector<Triplet> triplets)
        : rows_(rows), cols_(cols), triplets_(std::move(triplets)) {
        std::vector<double> row_sums(static_cast<size_t>(rows), 0.0);
        for (const auto& t : triplets_) {
            if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
                throw std::invalid_argument("KeypointRegressor: triplet out of range");
            }
            row_sums[static_cast<size_t>(t.row)] += t.weight;
        }
        for (double s : row_sums) {
            if (std::abs(s - 1.0) > 1e-9) {
                throw std::invalid_argument("KeypointRegressor: rows must sum to 1");
            }
        }
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const std::vector<Triplet>& triplets() const { return triplets_; }

    // J * V
    std::vector<Vec3> apply(const std::vector<Vec3>& vertices) const {
        if (static_cast<int>(vertices.size()) != cols_) {
            throw std::invalid_argument("KeypointRegressor: vertex count mismatch, expected " +
                                        std::to_string(cols_));
        }
        std::vector<Vec3> out(static_cast<size_t>(rows_));
        for (const auto& t : triplets_) {
            const Vec3& v = vertices[static_cast<size_t>(t.col)];
            Vec3& k = out[static_cast<size_t>(t.row)];
            k.x += t.weight * v.x;
            k.y += t.weight * v.y;
            k.z += t.weight * v.z;
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["rows"] = rows_;
        j["cols"] = cols_;
        j["triplets"] = nlohmann::json::array();
        for (const auto& t : triplets_) j["triplets"].push_back({t.row, t.col, t.weight});
        return j;
    }

    static KeypointRegressor from_json(const nlohmann::json& j) {
        std::vector<Triplet> trips;
        for (const auto& t : j.at("triplets")) {
            trips.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>()});
        }
        return KeypointRegressor(j.at("rows").get<int>(), j.at("cols").get<int>(),
                                 std::move(trips));
    }

    static KeypointRegressor load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("KeypointRegressor: cannot read " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

private:
    int rows_;
    int cols_;
    std::vector<Triplet> triplets_;
};

inline std::vector<Vec3> regress_keypoints(const TriangleMesh& mesh,
                                           const KeypointRegressor& regressor) {
    return regressor.apply(mesh.vertices);
}

struct PinholeCamera {
    double focal = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const {
        if (!(focal > 0)) throw std::invalid_argument("PinholeCamera: focal must be > 0");
        if (cx < 0 || cx > width || cy < 0 || cy > height) {
            throw std::invalid_argument("PinholeCamera: principal point outside image");
        }
    }

    // Intrinsics are unspecified upstream; this default keeps keypoints and
    // depth rendering on the same camera and is recorded in output metadata.
    static PinholeCamera default_for(int width, int height) {
        PinholeCamera cam;
        cam.focal = static_cast<double>(std::max(width, height));
        cam.cx = width / 2.0;
        cam.cy = height / 2.0;
        cam.width = width;
        cam.height = height;
        return cam;
    }

    nlohmann::json to_json() const {
        return {{"focal", focal}, {"cx", cx}, {"cy", cy}, {"width", width}, {"height", height}};
    }

    static PinholeCamera from_json(const nlohmann::json& j) {
        PinholeCamera cam;
        cam.focal = j.at("focal").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.validate();
        return cam;
    }
};

using Keypoints2D = std::array<Vec2, kHandKeypointCount>;

// (x, y) = (f*X/Z + cx, f*Y/Z + cy); requires positive depth.
inline Vec2 project_point(const Vec3& p, const PinholeCamera& cam) {
    if (!(p.z > 0.0)) throw std::domain_error("project: nonpositive depth");
    return {cam.focal * p.x / p.z + cam.cx, cam.focal * p.y / p.z + cam.cy};
}

inline Keypoints2D project(const std::vector<Vec3>& points, const PinholeCamera& cam) {
    if (points.size() != static_cast<size_t>(kHandKeypointCount)) {
        throw std::invalid_argument("project: expected 21 keypoints");
    }
    Keypoints2D out;
    for (size_t i = 0; i < points.size(); ++i) out[i] = project_point(points[i], cam);
    return out;
}

// Mean Euclidean distance over the 21 joints, in pixels.
inline double mpjpe(const Keypoints2D& a, const Keypoints2D& b) {
    double acc = 0.0;
    for (int i = 0; i < kHandKeypointCount; ++i) {
        double dx = a[static_cast<size_t>(i)].x - b[static_cast<size_t>(i)].x;
        double dy = a[static_cast<size_t>(i)].y - b[static_cast<size_t>(i)].y;
        acc += std::sqrt(dx * dx + dy * dy);
    }
    return acc / kHandKeypointCount;
}

// Per-image value: average over all hands present.
inline double mpjpe_image(const std::vector<double>& per_hand_errors) {
    if (per_hand_errors.empty()) {
        throw std::invalid_argument("mpjpe_image: no hands");
    }
    double acc = 0.0;
    for (double e : per_hand_errors) acc += e;
    return acc / static_cast<double>(per_hand_errors.size());
}

inline nlohmann::json keypoints_to_json(const Keypoints2D& k) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : k) j.push_back({p.x, p.y});
    return j;
}

inline Keypoints2D keypoints_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != static_cast<size_t>(kHandKeypointCount)) {
        throw std::invalid_argument("keypoints: expected an array of 21 [x, y] pairs");
    }
    Keypoints2D out;
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = {j[i].at(0).get<double>(), j[i].at(1).get<double>()};
    }
    return out;
}

}  // namespace handrect
