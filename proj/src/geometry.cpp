#include "petsplat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "petsplat/errors.hpp"

namespace petsplat {

void validate_faces(std::span<const Face> faces, std::size_t num_vertices) {
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& face = faces[f];
        for (VertexIndex idx : face) {
            if (idx >= num_vertices) {
                throw ModelError("face " + std::to_string(f) + " references vertex " +
                                 std::to_string(idx) + " but mesh has " +
                                 std::to_string(num_vertices) + " vertices");
            }
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            throw ModelError("face " + std::to_string(f) + " repeats a vertex index");
        }
    }
}

void require_same_topology(const Mesh& a, const Mesh& b) {
    if (a.vertices.size() != b.vertices.size()) {
        throw TopologyError("vertex count mismatch: " + std::to_string(a.vertices.size()) +
                            " vs " + std::to_string(b.vertices.size()));
    }
    if (a.faces != b.faces) {
        throw TopologyError("face connectivity differs between meshes");
    }
}

std::vector<Edge> unique_edges(std::span<const Face> faces) {
    std::vector<Edge> edges;
    edges.reserve(faces.size() * 3);
    for (const Face& f : faces) {
        for (int k = 0; k < 3; ++k) {
            VertexIndex a = f[k];
            VertexIndex b = f[(k + 1) % 3];
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<std::vector<VertexIndex>> vertex_neighbors(std::span<const Face> faces,
                                                       std::size_t num_vertices) {
    std::vector<std::vector<VertexIndex>> nbrs(num_vertices);
    for (const auto& [a, b] : unique_edges(faces)) {
        nbrs[a].push_back(b);
        nbrs[b].push_back(a);
    }
    for (auto& n : nbrs) std::sort(n.begin(), n.end());
    return nbrs;
}

Vec3 face_centroid(const Mesh& mesh, std::size_t face) {
    const Face& f = mesh.faces[face];
    return triangle_centroid(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
}

namespace {

TriangleProjection project_to_segment(const Vec3& p, const Vec3& a, const Vec3& b, int ia,
                                      int ib) {
    Vec3 ab = b - a;
    double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    TriangleProjection out;
    out.closest = a + t * ab;
    out.bary = Vec3::Zero();
    out.bary[ia] = 1.0 - t;
    out.bary[ib] += t;
    out.distance_squared = (p - out.closest).squaredNorm();
    return out;
}

}  // namespace

// Region classification after Ericson, "Real-Time Collision Detection" 5.1.5.
TriangleProjection project_to_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                       const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    if (ab.cross(ac).squaredNorm() <= 0.0) {
        TriangleProjection best = project_to_segment(p, a, b, 0, 1);
        for (auto cand : {project_to_segment(p, b, c, 1, 2), project_to_segment(p, c, a, 2, 0)}) {
            if (cand.distance_squared < best.distance_squared) best = cand;
        }
        return best;
    }

    auto finish = [&](double b0, double b1, double b2) {
        TriangleProjection out;
        out.bary = Vec3(b0, b1, b2);
        out.closest = b0 * a + b1 * b + b2 * c;
        out.distance_squared = (p - out.closest).squaredNorm();
        return out;
    };

    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return finish(1.0, 0.0, 0.0);

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return finish(0.0, 1.0, 0.0);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return finish(1.0 - v, v, 0.0);
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return finish(0.0, 0.0, 1.0);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return finish(1.0 - w, 0.0, w);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(0.0, 1.0 - w, w);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    // Interior: measure along the normal, which stays exact for points on the plane.
    const Vec3 n = ab.cross(ac);
    const double h = ap.dot(n) / n.squaredNorm();
    TriangleProjection out;
    out.bary = Vec3(1.0 - v - w, v, w);
    out.closest = p - h * n;
    out.distance_squared = h * h * n.squaredNorm();
    return out;
}

Quat quaternion_from_matrix(const Mat3& r) {
    Quat q(r);
    q.normalize();
    return q;
}

bool same_rotation(const Quat& a, const Quat& b, double tol) {
    const Eigen::Vector4d va = a.coeffs();
    const Eigen::Vector4d vb = b.coeffs();
    return (va - vb).cwiseAbs().maxCoeff() <= tol || (va + vb).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace petsplat
