#pragma once

#include "petsplat/geometry.hpp"

namespace petsplat {

enum class FrameKind { covariance, skinning };

// Orthonormal per-face frame; columns of `rotation` are the basis vectors.
struct FaceFrame {
    Mat3 rotation = Mat3::Identity();
    Vec3 centroid = Vec3::Zero();
    FrameKind kind = FrameKind::skinning;
};

// Extent of the flattened first axis of a surface-bound splat, in model units.
inline constexpr double kSurfelThickness = 1e-4;

// Triangles whose unnormalized normal is shorter than this are degenerate.
inline constexpr double kDegenerateNormal = 1e-12;

struct CovarianceFrame {
    FaceFrame frame;
    // (thickness, half |v1 - c|, half <v2 - c, e2>)
    Vec3 scale;
};

// Normal-first frame used for bound splats: e0 = unit normal, e1 toward v1
// from the centroid, e2 the Gram-Schmidt residual of v2 - c. Because
// (v1 - c) x (v2 - c) = n / 3, the frame is always right-handed.
CovarianceFrame covariance_frame(const Vec3& v0, const Vec3& v1, const Vec3& v2);

// Edge-first frame used for skinning: x along v1 - v0, z the unit normal,
// y = z x x.
FaceFrame skinning_frame(const Vec3& v0, const Vec3& v1, const Vec3& v2);

// Perimeter |v1 - v0| + |v2 - v1| + |v0 - v2|.
double edge_length_sum(const Vec3& v0, const Vec3& v1, const Vec3& v2);

}  // namespace petsplat
