#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "petsplat/geometry.hpp"
#include "petsplat/model.hpp"

namespace testing {

using petsplat::Face;
using petsplat::Mat3;
using petsplat::Quat;
using petsplat::Vec3;

struct Rng {
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    std::mt19937_64 gen;

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
    Vec3 vec(double lo = -1.0, double hi = 1.0) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
    Quat quat() {
        Eigen::Vector4d v;
        do {
            v = Eigen::Vector4d(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
        } while (v.norm() < 0.1 || v.norm() > 1.0);
        v.normalize();
        return Quat(v[0], v[1], v[2], v[3]);
    }
    Mat3 rotation() { return quat().toRotationMatrix(); }
};

// |a - b| / max(|a|, |b|, 1e-6)
inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double d = std::max({a.norm(), b.norm(), 1e-6});
    return (a - b).norm() / d;
}

inline Eigen::VectorXd stack(const std::vector<Vec3>& v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(3 * v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out.segment<3>(static_cast<Eigen::Index>(3 * i)) = v[i];
    return out;
}

inline Eigen::VectorXd stack(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Triangulated n x n grid in the z = 0 plane spanning [0, n]^2.
inline petsplat::Mesh grid_mesh(int n, double spacing = 1.0) {
    petsplat::Mesh m;
    for (int y = 0; y <= n; ++y) {
        for (int x = 0; x <= n; ++x) m.vertices.emplace_back(spacing * x, spacing * y, 0.0);
    }
    auto id = [n](int x, int y) { return static_cast<std::uint32_t>(y * (n + 1) + x); };
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            m.faces.push_back({id(x, y), id(x + 1, y), id(x + 1, y + 1)});
            m.faces.push_back({id(x, y), id(x + 1, y + 1), id(x, y + 1)});
        }
    }
    return m;
}

// Grid with every vertex jittered in all three axes.
inline petsplat::Mesh bumpy_grid(int n, Rng& rng, double jitter = 0.2) {
    petsplat::Mesh m = grid_mesh(n);
    for (Vec3& v : m.vertices) v += rng.vec(-jitter, jitter);
    return m;
}

// Small articulated model over a bumpy grid: random tree, random positive
// skin weights and regressor rows, random shape basis.
inline petsplat::ArticulatedModel random_model(Rng& rng, int grid = 3, int joints = 4, int shapes = 2) {
    petsplat::ArticulatedModel m;
    const petsplat::Mesh mesh = bumpy_grid(grid, rng);
    m.template_vertices = mesh.vertices;
    m.faces = mesh.faces;
    const auto nv = static_cast<Eigen::Index>(mesh.vertices.size());
    m.parents.assign(static_cast<std::size_t>(joints), -1);
    for (int j = 1; j < joints; ++j) m.parents[static_cast<std::size_t>(j)] = rng.integer(0, j - 1);
    m.skin_weights.resize(nv, joints);
    for (Eigen::Index i = 0; i < nv; ++i) {
        for (int j = 0; j < joints; ++j) m.skin_weights(i, j) = rng.uniform(0.05, 1.0);
        m.skin_weights.row(i) /= m.skin_weights.row(i).sum();
    }
    m.joint_regressor.resize(joints, nv);
    for (int j = 0; j < joints; ++j) {
        for (Eigen::Index i = 0; i < nv; ++i) m.joint_regressor(j, i) = rng.uniform(0.0, 1.0);
        m.joint_regressor.row(j) /= m.joint_regressor.row(j).sum();
    }
    m.shape_basis.resize(3 * nv, shapes);
    for (Eigen::Index r = 0; r < 3 * nv; ++r) {
        for (int k = 0; k < shapes; ++k) m.shape_basis(r, k) = rng.uniform(-0.2, 0.2);
    }
    return m;
}

inline petsplat::AvatarParams random_params(const petsplat::ArticulatedModel& model, Rng& rng, double pose = 0.5,
                                            double offsets = 0.05) {
    auto p = petsplat::AvatarParams::canonical(model);
    for (Eigen::Index i = 0; i < p.beta.size(); ++i) p.beta[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta[i] = rng.uniform(-pose, pose);
    p.trans = rng.vec(-1, 1);
    for (Vec3& d : p.offsets) d = rng.vec(-offsets, offsets);
    return p;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("petsplat_" + name + "_" + std::to_string(static_cast<long>(::getpid())));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

}  // namespace testing
