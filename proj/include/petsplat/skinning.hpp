#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "petsplat/geometry.hpp"
#include "petsplat/model.hpp"
#include "petsplat/splats.hpp"

namespace petsplat {

inline constexpr int kDefaultBindingFaces = 10;

// Per-splat face bindings, K entries per splat stored contiguously
// (entry k of splat i lives at i * k_faces + k).
struct BindingTable {
    std::uint32_t k_faces = 0;
    std::vector<std::uint32_t> face_ids;
    std::vector<double> weights;
    std::vector<Vec3> local_positions;
    std::vector<Quat> local_rotations;
    std::vector<double> ref_lengths;

    std::size_t num_splats() const { return k_faces == 0 ? 0 : face_ids.size() / k_faces; }
    std::size_t slot(std::size_t splat, std::size_t k) const { return splat * k_faces + k; }

    // Throws FormatError on the first violated invariant. weight_tol bounds
    // |sum w - 1| and |q| - 1; tables read from f32 files need a looser one.
    void validate(std::size_t num_faces, double weight_tol = 1e-9) const;
};

// Per-face quantities the skinning law reads from a mesh pose.
struct FaceState {
    Mat3 rotation;
    Quat quaternion;
    Vec3 centroid;
    double edge_sum;
    // false for degenerate faces; using one throws FrameError
    bool valid;
};

std::vector<FaceState> face_states(const Mesh& mesh, unsigned threads = 0);

// K nearest face centroids, ascending by (squared distance, face index).
// Uses a uniform grid over centroids and agrees exactly with a full scan.
class CentroidIndex {
public:
    explicit CentroidIndex(std::vector<Vec3> centroids);

    std::vector<std::uint32_t> k_nearest(const Vec3& p, std::size_t k) const;

private:
    std::vector<Vec3> centroids_;
    Eigen::Vector3d origin_;
    double cell_ = 1.0;
    Eigen::Vector3i dims_;
    std::vector<std::uint32_t> cell_start_;
    std::vector<std::uint32_t> cell_items_;

    Eigen::Vector3i cell_of(const Vec3& p) const;
};

// Bakes each splat into the local frames of its K nearest faces with
// inverse-distance weights.
BindingTable bake(const SplatSet& splats, const Mesh& reference, int k_faces = kDefaultBindingFaces,
                  unsigned threads = 0);

// Moves splats with the mesh: blended position, hemisphere-aligned quaternion
// blend, and scale multiplied by the weighted sqrt of the perimeter ratio.
// Opacity and color are copied unchanged.
SplatSet animate(const BindingTable& table, const SplatSet& splats, const Mesh& new_mesh,
                 unsigned threads = 0);

// forward() followed by animate() for every frame.
std::vector<SplatSet> animate_sequence(const BindingTable& table, const SplatSet& splats,
                                       const ArticulatedModel& model,
                                       std::span<const AvatarParams> frames, unsigned threads = 0);

}  // namespace petsplat
