#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace petsplat {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

using VertexIndex = std::uint32_t;
using Face = std::array<VertexIndex, 3>;
using Edge = std::pair<VertexIndex, VertexIndex>;

// Triangle mesh. Also the output of ArticulatedModel forward evaluation.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_faces() const { return faces.size(); }
};

// Throws ModelError on out-of-range or repeated indices.
void validate_faces(std::span<const Face> faces, std::size_t num_vertices);

// Throws TopologyError unless both meshes have equal vertex counts and
// identical face lists.
void require_same_topology(const Mesh& a, const Mesh& b);

// Undirected edges as (lo, hi) pairs, sorted ascending and deduplicated.
std::vector<Edge> unique_edges(std::span<const Face> faces);

// Per-vertex neighbor lists derived from unique_edges; each list is sorted.
std::vector<std::vector<VertexIndex>> vertex_neighbors(std::span<const Face> faces,
                                                       std::size_t num_vertices);

inline Vec3 triangle_centroid(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    return (v0 + v1 + v2) / 3.0;
}

Vec3 face_centroid(const Mesh& mesh, std::size_t face);

// Closest point on a triangle to p, expressed by barycentric weights
// (b0, b1, b2) so that closest = b0*a + b1*b + b2*c. Handles the interior,
// edge and vertex regions exactly; degenerate triangles fall back to the
// closest of the three edge segments.
struct TriangleProjection {
    Vec3 closest;
    Vec3 bary;
    double distance_squared = 0.0;
};

TriangleProjection project_to_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                       const Vec3& c);

// Skew-symmetric cross-product matrix [v]x.
inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

// Unit quaternion from a proper rotation matrix.
Quat quaternion_from_matrix(const Mat3& r);

// True when q and -q are within tol componentwise of each other's sign class.
bool same_rotation(const Quat& a, const Quat& b, double tol);

}  // namespace petsplat
