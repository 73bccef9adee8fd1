#include "petsplat/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <tuple>

namespace petsplat {

namespace {

struct Proportions {
    double body_length = 1.0;
    double body_height = 0.3;
    double body_width = 0.3;
    double leg_length = 0.4;
    double leg_width = 0.1;
    double tail_length = 0.4;
    double head_scale = 1.0;
};

Proportions proportions_for(std::uint64_t seed) {
    Proportions p;
    if (seed == 0) return p;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    p.body_length *= jitter(rng);
    p.body_height *= jitter(rng);
    p.body_width *= jitter(rng);
    p.leg_length *= jitter(rng);
    p.leg_width *= jitter(rng);
    p.tail_length *= jitter(rng);
    p.head_scale *= jitter(rng);
    return p;
}

// Surface of an axis-aligned box subdivided into n[0] x n[1] x n[2] cells,
// triangulated with outward-facing winding.
struct BoxSurface {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
};

BoxSurface box_surface(const Vec3& lo, const Vec3& hi, const std::array<int, 3>& n) {
    BoxSurface out;
    std::map<std::tuple<int, int, int>, VertexIndex> ids;
    auto vertex = [&](std::array<int, 3> g) {
        const auto key = std::make_tuple(g[0], g[1], g[2]);
        auto it = ids.find(key);
        if (it != ids.end()) return it->second;
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = lo[a] + (hi[a] - lo[a]) * g[a] / n[a];
        const auto id = static_cast<VertexIndex>(out.vertices.size());
        out.vertices.push_back(p);
        ids.emplace(key, id);
        return id;
    };
    for (int a = 0; a < 3; ++a) {
        const int u = (a + 1) % 3;
        const int v = (a + 2) % 3;
        for (int level : {0, n[a]}) {
            for (int p = 0; p < n[u]; ++p) {
                for (int q = 0; q < n[v]; ++q) {
                    auto corner = [&](int dp, int dq) {
                        std::array<int, 3> g{};
                        g[a] = level;
                        g[u] = p + dp;
                        g[v] = q + dq;
                        return vertex(g);
                    };
                    const VertexIndex c00 = corner(0, 0), c10 = corner(1, 0), c11 = corner(1, 1), c01 = corner(0, 1);
                    // u x v points along +a, so this winding faces +a.
                    if (level == n[a]) {
                        out.faces.push_back({c00, c10, c11});
                        out.faces.push_back({c00, c11, c01});
                    } else {
                        out.faces.push_back({c00, c11, c10});
                        out.faces.push_back({c00, c01, c11});
                    }
                }
            }
        }
    }
    return out;
}

// Weights along a chain of joints split at ascending boundaries; each
// boundary blends linearly over [b - band, b + band].
std::vector<double> chain_weights(double s, const std::vector<double>& boundaries, double band) {
    const std::size_t m = boundaries.size();
    std::vector<double> past(m + 2, 0.0);
    past[0] = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        past[i + 1] = std::clamp((s - boundaries[i] + band) / (2.0 * band), 0.0, 1.0);
    }
    std::vector<double> w(m + 1);
    for (std::size_t k = 0; k <= m; ++k) w[k] = past[k] - past[k + 1];
    return w;
}

struct Builder {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<std::vector<std::pair<int, double>>> weights;

    // Adds a box; `skin` maps a vertex position to (joint, weight) pairs.
    template <typename Skin>
    void add(const Vec3& lo, const Vec3& hi, const std::array<int, 3>& n, Skin skin) {
        const BoxSurface box = box_surface(lo, hi, n);
        const auto base = static_cast<VertexIndex>(vertices.size());
        for (const Vec3& v : box.vertices) {
            vertices.push_back(v);
            weights.push_back(skin(v));
        }
        for (const Face& f : box.faces) faces.push_back({f[0] + base, f[1] + base, f[2] + base});
    }
};

std::vector<std::pair<int, double>> chain(const std::vector<int>& joints, const std::vector<double>& weights) {
    std::vector<std::pair<int, double>> out;
    for (std::size_t i = 0; i < joints.size(); ++i) {
        if (weights[i] > 0.0) out.emplace_back(joints[i], weights[i]);
    }
    return out;
}

}  // namespace

ArticulatedModel make_toy_quadruped(std::uint64_t seed) {
    namespace tj = toy_joint;
    const Proportions p = proportions_for(seed);
    const double half_l = 0.5 * p.body_length;
    const double half_w = 0.5 * p.body_width;
    const double body_lo = p.leg_length;
    const double body_hi = p.leg_length + p.body_height;
    const double body_mid = 0.5 * (body_lo + body_hi);
    const double hs = p.head_scale;

    std::vector<Vec3> joints(tj::count);
    std::vector<int> parents(tj::count);
    joints[tj::root] = {-p.body_length / 3.0, body_mid, 0.0};
    joints[tj::spine] = {-p.body_length / 6.0, body_mid, 0.0};
    joints[tj::chest] = {p.body_length / 6.0, body_mid, 0.0};
    parents[tj::root] = -1;
    parents[tj::spine] = tj::root;
    parents[tj::chest] = tj::spine;

    const double neck_x0 = half_l - 0.16 * hs;
    const double neck_top = body_hi + 0.15 * hs;
    const double head_top = neck_top + 0.15 * hs;
    const double neck_cx = half_l - 0.08 * hs;
    joints[tj::neck] = {neck_cx, body_hi + 0.04 * hs, 0.0};
    joints[tj::head] = {neck_cx, neck_top - 0.03 * hs, 0.0};
    joints[tj::jaw] = {half_l + 0.02 * hs, neck_top - 0.025 * hs, 0.0};
    parents[tj::neck] = tj::chest;
    parents[tj::head] = tj::neck;
    parents[tj::jaw] = tj::head;

    const double tail_y0 = body_hi - 0.1;
    const double tail_y1 = body_hi - 0.04;
    const double tail_cy = 0.5 * (tail_y0 + tail_y1);
    const double tail_step = p.tail_length / 3.0;
    joints[tj::tail1] = {-half_l - 0.02, tail_cy, 0.0};
    joints[tj::tail2] = {-half_l - tail_step, tail_cy, 0.0};
    joints[tj::tail3] = {-half_l - 2.0 * tail_step, tail_cy, 0.0};
    parents[tj::tail1] = tj::root;
    parents[tj::tail2] = tj::tail1;
    parents[tj::tail3] = tj::tail2;

    struct Leg {
        int hip;
        double x, z;
        int attach;
    };
    const double leg_x = 0.35 * p.body_length;
    const double leg_z = half_w - 0.5 * p.leg_width;
    const std::array<Leg, 4> legs{{
        {tj::front_left_hip, leg_x, leg_z, tj::chest},
        {tj::front_right_hip, leg_x, -leg_z, tj::chest},
        {tj::back_left_hip, -leg_x, leg_z, tj::root},
        {tj::back_right_hip, -leg_x, -leg_z, tj::root},
    }};
    for (const Leg& leg : legs) {
        joints[leg.hip] = {leg.x, p.leg_length, leg.z};
        joints[leg.hip + 1] = {leg.x, 0.55 * p.leg_length, leg.z};
        joints[leg.hip + 2] = {leg.x, 0.125 * p.leg_length, leg.z};
        parents[leg.hip] = leg.attach;
        parents[leg.hip + 1] = leg.hip;
        parents[leg.hip + 2] = leg.hip + 1;
    }

    Builder b;
    const double body_band = 0.05 * p.body_length;
    b.add(Vec3(-half_l, body_lo, -half_w), Vec3(half_l, body_hi, half_w), {10, 4, 4}, [&](const Vec3& v) {
        return chain({tj::root, tj::spine, tj::chest},
                     chain_weights(v.x(), {joints[tj::spine].x(), joints[tj::chest].x()}, body_band));
    });
    for (const Leg& leg : legs) {
        const double hw = 0.5 * p.leg_width;
        b.add(Vec3(leg.x - hw, 0.0, leg.z - hw), Vec3(leg.x + hw, p.leg_length, leg.z + hw), {2, 8, 2},
              [&](const Vec3& v) {
                  return chain({leg.hip, leg.hip + 1, leg.hip + 2},
                               chain_weights(-v.y(), {-joints[leg.hip + 1].y(), -joints[leg.hip + 2].y()},
                                             0.1 * p.leg_length));
              });
    }
    b.add(Vec3(-half_l - p.tail_length, tail_y0, -0.03), Vec3(-half_l, tail_y1, 0.03), {8, 1, 1},
          [&](const Vec3& v) {
              return chain({tj::root, tj::tail1, tj::tail2, tj::tail3},
                           chain_weights(-v.x(),
                                         {-joints[tj::tail1].x(), -joints[tj::tail2].x(), -joints[tj::tail3].x()},
                                         0.02));
          });
    b.add(Vec3(half_l - 0.13 * hs, neck_top, -0.09 * hs), Vec3(half_l + 0.22 * hs, head_top, 0.09 * hs), {3, 3, 3},
          [&](const Vec3&) { return std::vector<std::pair<int, double>>{{tj::head, 1.0}}; });
    b.add(Vec3(half_l + 0.02 * hs, neck_top - 0.05 * hs, -0.06 * hs), Vec3(half_l + 0.22 * hs, neck_top, 0.06 * hs),
          {3, 1, 2}, [&](const Vec3&) { return std::vector<std::pair<int, double>>{{tj::jaw, 1.0}}; });
    b.add(Vec3(neck_x0, body_hi, -0.07 * hs), Vec3(half_l, neck_top, 0.07 * hs), {2, 3, 2}, [&](const Vec3& v) {
        return chain({tj::chest, tj::neck, tj::head},
                     chain_weights(v.y(), {joints[tj::neck].y(), joints[tj::head].y()}, 0.015 * hs));
    });

    ArticulatedModel model;
    const std::size_t nv = b.vertices.size();
    model.template_vertices = b.vertices;
    model.faces = b.faces;
    model.parents = parents;

    model.skin_weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nv), tj::count);
    for (std::size_t i = 0; i < nv; ++i) {
        for (const auto& [j, w] : b.weights[i]) model.skin_weights(static_cast<Eigen::Index>(i), j) += w;
    }

    // Each joint regresses from its eight nearest template vertices with
    // inverse-distance weights.
    model.joint_regressor = Eigen::MatrixXd::Zero(tj::count, static_cast<Eigen::Index>(nv));
    std::vector<std::pair<double, std::size_t>> by_distance(nv);
    for (int j = 0; j < tj::count; ++j) {
        for (std::size_t i = 0; i < nv; ++i) by_distance[i] = {(b.vertices[i] - joints[j]).norm(), i};
        std::partial_sort(by_distance.begin(), by_distance.begin() + 8, by_distance.end());
        double total = 0.0;
        for (int k = 0; k < 8; ++k) total += 1.0 / (by_distance[k].first + 1e-3);
        for (int k = 0; k < 8; ++k) {
            model.joint_regressor(j, static_cast<Eigen::Index>(by_distance[k].second)) =
                (1.0 / (by_distance[k].first + 1e-3)) / total;
        }
    }

    model.shape_basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(3 * nv), kToyShapeCount);
    for (std::size_t i = 0; i < nv; ++i) {
        const Vec3& v = b.vertices[i];
        const auto r = static_cast<Eigen::Index>(3 * i);
        model.shape_basis(r, 0) = 0.1 * std::clamp(v.x(), -half_l, half_l);
        for (const Leg& leg : legs) {
            if (model.skin_weights.row(static_cast<Eigen::Index>(i)).segment(leg.hip, 3).sum() > 0.5) {
                model.shape_basis(r, 1) = 0.3 * (v.x() - leg.x);
                model.shape_basis(r + 2, 1) = 0.3 * (v.z() - leg.z);
            }
        }
    }
    model.validate();
    return model;
}

AvatarParams toy_leg_lift(const ArticulatedModel& model, double hip_angle, double knee_angle) {
    AvatarParams p = AvatarParams::canonical(model);
    p.theta.segment<3>(3 * toy_joint::front_left_hip) = Vec3(0.0, 0.0, hip_angle);
    p.theta.segment<3>(3 * toy_joint::front_left_knee) = Vec3(0.0, 0.0, knee_angle);
    return p;
}

std::vector<NamedPose> toy_pose_library(const ArticulatedModel& model) {
    namespace tj = toy_joint;
    std::vector<NamedPose> poses;
    poses.push_back({"canonical", AvatarParams::canonical(model)});
    poses.push_back({"leg_lift", toy_leg_lift(model)});

    AvatarParams head = AvatarParams::canonical(model);
    head.theta.segment<3>(3 * tj::neck) = Vec3(0.0, 0.0, 0.2);
    head.theta.segment<3>(3 * tj::head) = Vec3(0.0, 0.4, 0.0);
    head.theta.segment<3>(3 * tj::jaw) = Vec3(0.0, 0.0, -0.3);
    poses.push_back({"head_turn", head});

    AvatarParams tail = AvatarParams::canonical(model);
    for (int j : {tj::tail1, tj::tail2, tj::tail3}) tail.theta.segment<3>(3 * j) = Vec3(0.0, 0.3, 0.1);
    tail.trans = Vec3(0.1, 0.0, -0.05);
    poses.push_back({"tail_wag", tail});

    AvatarParams crouch = AvatarParams::canonical(model);
    crouch.beta = Eigen::Vector2d(0.5, -0.5);
    crouch.theta.segment<3>(3 * tj::root) = Vec3(0.0, 0.2, 0.05);
    for (int hip : {tj::back_left_hip, tj::back_right_hip}) {
        crouch.theta.segment<3>(3 * hip) = Vec3(0.0, 0.0, -0.4);
        crouch.theta.segment<3>(3 * (hip + 1)) = Vec3(0.0, 0.0, 0.7);
    }
    crouch.trans = Vec3(0.0, -0.05, 0.0);
    poses.push_back({"crouch", crouch});
    return poses;
}

Mesh make_icosahedron() {
    const double g = std::numbers::phi;
    Mesh m;
    m.vertices = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                  {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
    for (Vec3& v : m.vertices) v.normalize();
    m.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
               {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    return m;
}

SplatSet random_splats(std::size_t count, const Vec3& lo, const Vec3& hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SplatSet set;
    set.splats.resize(count);
    for (Splat& s : set.splats) {
        for (int a = 0; a < 3; ++a) s.position[a] = lo[a] + (hi[a] - lo[a]) * unit(rng);
        const double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
        const double tau = 2.0 * std::numbers::pi;
        s.rotation = Quat(std::sqrt(u1) * std::cos(tau * u3), std::sqrt(1.0 - u1) * std::sin(tau * u2),
                          std::sqrt(1.0 - u1) * std::cos(tau * u2), std::sqrt(u1) * std::sin(tau * u3));
        s.rotation.normalize();
        for (int a = 0; a < 3; ++a) s.log_scale[a] = -4.0 + 2.0 * unit(rng);
        s.set_opacity(0.05 + 0.9 * unit(rng));
        s.set_base_color(Vec3(unit(rng), unit(rng), unit(rng)));
    }
    return set;
}

}  // namespace petsplat
