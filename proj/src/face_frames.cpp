#include "petsplat/face_frames.hpp"

#include <cassert>

#include "petsplat/errors.hpp"

namespace petsplat {

namespace {

Vec3 checked_normal(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    const Vec3 n = (v1 - v0).cross(v2 - v0);
    if (!(n.norm() > kDegenerateNormal)) {
        throw FrameError("degenerate triangle (collinear vertices)");
    }
    return n;
}

}  // namespace

CovarianceFrame covariance_frame(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    const Vec3 n = checked_normal(v0, v1, v2);
    const Vec3 c = triangle_centroid(v0, v1, v2);
    const Vec3 e0 = n.normalized();
    const Vec3 t1 = v1 - c;
    const Vec3 e1 = t1.normalized();
    const Vec3 t2 = v2 - c;
    const Vec3 t2_perp = t2 - t2.dot(e0) * e0 - t2.dot(e1) * e1;
    const Vec3 e2 = t2_perp.normalized();

    CovarianceFrame out;
    out.frame.rotation.col(0) = e0;
    out.frame.rotation.col(1) = e1;
    out.frame.rotation.col(2) = e2;
    out.frame.centroid = c;
    out.frame.kind = FrameKind::covariance;
    const double along_e2 = t2.dot(e2);
    assert(along_e2 >= 0.0);
    out.scale = Vec3(kSurfelThickness, 0.5 * t1.norm(), 0.5 * along_e2);
    return out;
}

FaceFrame skinning_frame(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    const Vec3 n = checked_normal(v0, v1, v2);
    const Vec3 x = (v1 - v0).normalized();
    const Vec3 z = n.normalized();
    const Vec3 y = z.cross(x);
    FaceFrame f;
    f.rotation.col(0) = x;
    f.rotation.col(1) = y;
    f.rotation.col(2) = z;
    f.centroid = triangle_centroid(v0, v1, v2);
    f.kind = FrameKind::skinning;
    return f;
}

double edge_length_sum(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    return (v1 - v0).norm() + (v2 - v1).norm() + (v0 - v2).norm();
}

}  // namespace petsplat
