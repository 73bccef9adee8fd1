#pragma once

#include <cstdint>
#include <vector>

#include "petsplat/geometry.hpp"

namespace petsplat {

struct NearestFace {
    std::uint32_t face = 0;
    TriangleProjection projection;
};

// Bounding-volume hierarchy over triangles for exact nearest-face queries.
// Results equal a brute-force scan: smallest squared distance, ties broken
// by the lowest face index. The mesh must outlive the tree.
class TriangleBvh {
public:
    explicit TriangleBvh(const Mesh& mesh);

    NearestFace nearest(const Vec3& p) const;

private:
    struct Node {
        Eigen::AlignedBox3d box;
        std::uint32_t first = 0;  // into order_ for leaves, child index otherwise
        std::uint32_t count = 0;  // 0 for interior nodes
        std::uint32_t right = 0;
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end, const std::vector<Vec3>& centroids);

    const Mesh& mesh_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

// Reference implementation used by tests and as a fallback for tiny meshes.
NearestFace nearest_face_brute_force(const Mesh& mesh, const Vec3& p);

}  // namespace petsplat
