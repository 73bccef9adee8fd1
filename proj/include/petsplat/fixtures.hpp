#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petsplat/geometry.hpp"
#include "petsplat/model.hpp"
#include "petsplat/splats.hpp"

namespace petsplat {

// Joint indices of the toy quadruped. Legs are hip, knee, paw from the top.
namespace toy_joint {
inline constexpr int root = 0;
inline constexpr int spine = 1;
inline constexpr int chest = 2;
inline constexpr int neck = 3;
inline constexpr int head = 4;
inline constexpr int jaw = 5;
inline constexpr int tail1 = 6;
inline constexpr int tail2 = 7;
inline constexpr int tail3 = 8;
inline constexpr int front_left_hip = 9;
inline constexpr int front_left_knee = 10;
inline constexpr int front_left_paw = 11;
inline constexpr int front_right_hip = 12;
inline constexpr int front_right_knee = 13;
inline constexpr int front_right_paw = 14;
inline constexpr int back_left_hip = 15;
inline constexpr int back_left_knee = 16;
inline constexpr int back_left_paw = 17;
inline constexpr int back_right_hip = 18;
inline constexpr int back_right_knee = 19;
inline constexpr int back_right_paw = 20;
inline constexpr int count = 21;
}  // namespace toy_joint

inline constexpr std::size_t kToyVertexCount = 640;
inline constexpr std::size_t kToyShapeCount = 2;

// Box-built quadruped facing +x with y up: body, neck, head, jaw, a
// three-joint tail and four legs of two segments each. Shape coefficient 0
// stretches the body, 1 thickens the legs. Seed 0 gives the reference
// proportions; other seeds jitter them deterministically.
ArticulatedModel make_toy_quadruped(std::uint64_t seed = 0);

struct NamedPose {
    std::string name;
    AvatarParams params;
};

// canonical, leg_lift, head_turn, tail_wag, crouch
std::vector<NamedPose> toy_pose_library(const ArticulatedModel& model);

// Front-left hip and knee bent by the given angles about the lateral axis.
AvatarParams toy_leg_lift(const ArticulatedModel& model, double hip_angle = 0.5, double knee_angle = -0.6);

// Regular icosahedron with unit circumradius, 12 vertices and 20 faces.
Mesh make_icosahedron();

// Uniformly placed splats inside [lo, hi] with random orientations,
// log-scales in [-4, -2], opacities in (0.05, 0.95) and random colors.
SplatSet random_splats(std::size_t count, const Vec3& lo, const Vec3& hi, std::uint64_t seed);

}  // namespace petsplat
