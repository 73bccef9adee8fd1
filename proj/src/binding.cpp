#include "petsplat/binding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "petsplat/errors.hpp"
#include "petsplat/face_frames.hpp"

namespace petsplat {

Vec3 BoundSplat::barycentric() const {
    const double m = std::max({bary_logits[0], bary_logits[1], bary_logits[2]});
    Vec3 e(std::exp(bary_logits[0] - m), std::exp(bary_logits[1] - m), std::exp(bary_logits[2] - m));
    return e / e.sum();
}

std::vector<BoundSplat> seed_bound(const Mesh& mesh, int splats_per_face) {
    if (mesh.faces.empty() || mesh.vertices.empty()) throw ModelError("cannot seed splats on an empty mesh");
    if (splats_per_face < 1) throw ModelError("splats per face must be at least 1");
    std::vector<BoundSplat> out;
    out.reserve(mesh.faces.size() * static_cast<std::size_t>(splats_per_face));
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (int k = 0; k < splats_per_face; ++k) {
            BoundSplat s;
            s.face = static_cast<std::uint32_t>(f);
            out.push_back(std::move(s));
        }
    }
    return out;
}

SplatSet realize(std::span<const BoundSplat> bound, const Mesh& mesh, int sh_degree) {
    SplatSet set;
    set.sh_degree = sh_degree;
    set.splats.resize(bound.size());
    const std::size_t rest = sh_rest_count(sh_degree);
    for (std::size_t i = 0; i < bound.size(); ++i) {
        const BoundSplat& b = bound[i];
        if (b.face >= mesh.faces.size()) {
            throw ModelError("bound splat " + std::to_string(i) + " references face " +
                             std::to_string(b.face) + " of " + std::to_string(mesh.faces.size()));
        }
        const Face& f = mesh.faces[b.face];
        const Vec3& v0 = mesh.vertices[f[0]];
        const Vec3& v1 = mesh.vertices[f[1]];
        const Vec3& v2 = mesh.vertices[f[2]];
        const CovarianceFrame cf = covariance_frame(v0, v1, v2);
        const Vec3 alpha = b.barycentric();

        Splat& s = set.splats[i];
        s.position = alpha[0] * v0 + alpha[1] * v1 + alpha[2] * v2;
        s.rotation = quaternion_from_matrix(cf.frame.rotation);
        s.set_scale(cf.scale);
        s.opacity_logit = b.opacity_logit;
        s.sh_dc = b.sh_dc;
        s.sh_rest = b.sh_rest;
        s.sh_rest.resize(rest, 0.0);
    }
    return set;
}

}  // namespace petsplat
