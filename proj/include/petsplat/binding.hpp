#pragma once

#include <array>
#include <vector>

#include "petsplat/geometry.hpp"
#include "petsplat/splats.hpp"

namespace petsplat {

inline constexpr int kDefaultSplatsPerFace = 3;

// Splat attached to one face. The barycentric position is the softmax of
// three unconstrained logits so it always stays on the triangle.
struct BoundSplat {
    std::uint32_t face = 0;
    std::array<double, 3> bary_logits{0.0, 0.0, 0.0};
    double opacity_logit = 0.0;
    Vec3 sh_dc = Vec3::Zero();
    std::vector<double> sh_rest;

    Vec3 barycentric() const;
};

// splats_per_face splats for every face, face-major. Logits start at zero
// (centroid), opacity at 0.5 and color mid gray.
std::vector<BoundSplat> seed_bound(const Mesh& mesh, int splats_per_face = kDefaultSplatsPerFace);

// Positions from the barycentric formula; rotation and scale are fully
// determined by the covariance frame of the assigned face.
SplatSet realize(std::span<const BoundSplat> bound, const Mesh& mesh, int sh_degree = 0);

}  // namespace petsplat
