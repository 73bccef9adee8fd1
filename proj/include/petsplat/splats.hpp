#pragma once

#include <cmath>
#include <vector>

#include "petsplat/geometry.hpp"

namespace petsplat {

// Zeroth-order real spherical harmonic constant.
inline constexpr double kShC0 = 0.28209479177387814;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// One Gaussian primitive g = (p, R, S, o, c). Scale and opacity are kept in
// their pre-activation form (log and logit) like the on-disk layout, so file
// round trips are exact.
struct Splat {
    Vec3 position = Vec3::Zero();
    Quat rotation = Quat::Identity();
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    // DC spherical-harmonic coefficient per channel
    Vec3 sh_dc = Vec3::Zero();
    // Higher-order coefficients, channel-major (all R, then G, then B);
    // size 3 * ((degree + 1)^2 - 1).
    std::vector<double> sh_rest;

    Vec3 scale() const { return log_scale.array().exp(); }
    double opacity() const { return sigmoid(opacity_logit); }
    Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

    void set_scale(const Vec3& s) { log_scale = s.array().log(); }
    void set_opacity(double o) { opacity_logit = logit(o); }
    // Sets the DC term so that a degree-0 evaluation yields `rgb`.
    void set_base_color(const Vec3& rgb) { sh_dc = (rgb.array() - 0.5) / kShC0; }
};

struct SplatSet {
    // 0..3; every splat carries 3 * ((sh_degree + 1)^2 - 1) rest coefficients.
    int sh_degree = 0;
    std::vector<Splat> splats;

    std::size_t size() const { return splats.size(); }
    bool empty() const { return splats.empty(); }
};

inline std::size_t sh_rest_count(int degree) {
    const auto d = static_cast<std::size_t>(degree + 1);
    return 3 * (d * d - 1);
}

}  // namespace petsplat
