#include "petsplat/nearest.hpp"

#include <algorithm>
#include <limits>

namespace petsplat {

namespace {

constexpr std::uint32_t kLeafSize = 4;

TriangleProjection project_face(const Mesh& mesh, std::uint32_t f, const Vec3& p) {
    const Face& face = mesh.faces[f];
    return project_to_triangle(p, mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]);
}

bool better(double d, std::uint32_t f, double best_d, std::uint32_t best_f) {
    return d < best_d || (d == best_d && f < best_f);
}

}  // namespace

NearestFace nearest_face_brute_force(const Mesh& mesh, const Vec3& p) {
    NearestFace best;
    best.projection.distance_squared = std::numeric_limits<double>::infinity();
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        const TriangleProjection proj = project_face(mesh, f, p);
        if (better(proj.distance_squared, f, best.projection.distance_squared, best.face)) {
            best.face = f;
            best.projection = proj;
        }
    }
    return best;
}

TriangleBvh::TriangleBvh(const Mesh& mesh) : mesh_(mesh) {
    const auto n = static_cast<std::uint32_t>(mesh.faces.size());
    order_.resize(n);
    std::vector<Vec3> centroids(n);
    for (std::uint32_t f = 0; f < n; ++f) {
        order_[f] = f;
        centroids[f] = face_centroid(mesh, f);
    }
    nodes_.reserve(2 * (n / kLeafSize + 1));
    if (n > 0) build(0, n, centroids);
}

std::uint32_t TriangleBvh::build(std::uint32_t begin, std::uint32_t end,
                                 const std::vector<Vec3>& centroids) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Eigen::AlignedBox3d box;
    Eigen::AlignedBox3d centroid_box;
    for (std::uint32_t i = begin; i < end; ++i) {
        const Face& f = mesh_.faces[order_[i]];
        for (VertexIndex v : f) box.extend(mesh_.vertices[v]);
        centroid_box.extend(centroids[order_[i]]);
    }
    nodes_[index].box = box;
    if (end - begin <= kLeafSize) {
        nodes_[index].first = begin;
        nodes_[index].count = end - begin;
        return index;
    }
    int axis = 0;
    centroid_box.sizes().maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double ca = centroids[a][axis];
                         const double cb = centroids[b][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    const std::uint32_t left = build(begin, mid, centroids);
    const std::uint32_t right = build(mid, end, centroids);
    nodes_[index].first = left;
    nodes_[index].right = right;
    nodes_[index].count = 0;
    return index;
}

NearestFace TriangleBvh::nearest(const Vec3& p) const {
    NearestFace best;
    best.face = std::numeric_limits<std::uint32_t>::max();
    best.projection.distance_squared = std::numeric_limits<double>::infinity();
    if (nodes_.empty()) return best;

    std::vector<std::pair<double, std::uint32_t>> stack;
    stack.emplace_back(nodes_[0].box.squaredExteriorDistance(p), 0);
    while (!stack.empty()) {
        const auto [bound, ni] = stack.back();
        stack.pop_back();
        // Boxes that tie the current best may hold a lower index; the slack
        // covers rounding in the box bound.
        if (bound > best.projection.distance_squared * (1.0 + 1e-12)) continue;
        const Node& node = nodes_[ni];
        if (node.count > 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                const std::uint32_t f = order_[i];
                const TriangleProjection proj = project_face(mesh_, f, p);
                if (better(proj.distance_squared, f, best.projection.distance_squared, best.face)) {
                    best.face = f;
                    best.projection = proj;
                }
            }
            continue;
        }
        const double dl = nodes_[node.first].box.squaredExteriorDistance(p);
        const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
        // Push the farther child first so the nearer one is visited next.
        if (dl <= dr) {
            stack.emplace_back(dr, node.right);
            stack.emplace_back(dl, node.first);
        } else {
            stack.emplace_back(dl, node.first);
            stack.emplace_back(dr, node.right);
        }
    }
    return best;
}

}  // namespace petsplat
