#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "petsplat/geometry.hpp"
#include "petsplat/image.hpp"

namespace petsplat {

struct LossWeights {
    double lambda_dssim = 0.2;
    double lambda_opac = 0.001;
    double lambda_dist = 10.0;
    double lambda_edge = 1.0;
    double lambda_lap = 1.0;
    double lambda_offsets = 1.0;
    double lambda_pose = 1.0;
    double lambda_scale = 1.0;

    // Throws NumericError on negative or non-finite weights.
    void validate() const;
};

// Joints whose rotation is pulled toward a reference pose.
struct PoseSubsetSpec {
    std::vector<int> joints;
    // One axis-angle per entry of `joints`.
    std::vector<Vec3> reference;

    // Reference = rest pose (all zeros).
    static PoseSubsetSpec at_rest(std::vector<int> joints);

    // Throws ParameterShapeError on out-of-range or repeated joints.
    void validate(std::size_t num_joints) const;
};

// Loss value with gradient with respect to a list of 3-vectors.
struct PointwiseLoss {
    double value = 0.0;
    std::vector<Vec3> grad;
};

// Loss value with gradient with respect to a flat scalar array.
struct ScalarLoss {
    double value = 0.0;
    std::vector<double> grad;
};

// Mean windowed SSIM over all pixels and channels: 11x11 Gaussian window
// (sigma 1.5), zero padding, k1 = 0.01, k2 = 0.03, dynamic range 1.
double ssim(const Image& a, const Image& b);

// (1 - lambda) * mean|a - b| + lambda * (1 - SSIM(a, b)); the mean runs over
// pixels and channels.
double loss_rgb(const Image& a, const Image& b, double lambda_dssim);

// Mean over unique edges of (|e| - |e_canonical|)^2.
PointwiseLoss loss_edge(const Mesh& mesh, const Mesh& canonical);

// Mean over non-isolated vertices of |v_i - mean(neighbors(v_i))|^2 with the
// uniform graph Laplacian. Isolated vertices neither count nor receive gradient.
PointwiseLoss loss_laplacian(const Mesh& mesh);

// Squared L2 norm of the offset stack.
PointwiseLoss loss_offsets(std::span<const Vec3> offsets);

// Squared L2 distance of the selected joints from their reference. The
// gradient has one entry per theta entry; unselected joints get zero.
ScalarLoss loss_pose_subset(const Eigen::VectorXd& theta, const PoseSubsetSpec& spec);

// Mean of -o.
ScalarLoss loss_opacity(std::span<const double> opacities);

// Mean of -o ln o with 0 ln 0 = 0. The gradient -(ln o + 1)/N is evaluated
// at max(o, 1e-12) so it stays finite at o = 0.
ScalarLoss loss_entropy(std::span<const double> opacities);

// Mean over splats of |S|^2 + max(S) - min(S). Ties in max/min resolve to the
// lowest index, so isotropic scales get no range subgradient.
PointwiseLoss loss_scale(std::span<const Vec3> scales);

enum class DistanceMode { squared, euclidean };

struct PointToMeshLoss {
    double value = 0.0;
    // One entry per mesh vertex. Points are constants and get no gradient.
    std::vector<Vec3> vertex_grad;
    std::vector<std::uint32_t> nearest_faces;
};

// Mean over points of the (squared) distance to the closest face. When
// `assignment` is given, each point is measured against that face instead of
// searching; the fitter's gradient checks use this to avoid reassignment kinks.
PointToMeshLoss loss_point_to_mesh(std::span<const Vec3> points, const Mesh& mesh,
                                   DistanceMode mode = DistanceMode::squared,
                                   std::span<const std::uint32_t> assignment = {},
                                   unsigned threads = 0);

// Unweighted term values; the weights are applied by the totals.
struct LossTerms {
    double rgb = 0.0;
    double edge = 0.0;
    double lap = 0.0;
    double offsets = 0.0;
    double pose = 0.0;
    double opac = 0.0;
    double dist = 0.0;
    double scale = 0.0;
    double ent = 0.0;
};

// L_rgb + L_edge + L_lap + |d|^2 + |theta_sub - ref|^2 + lambda_opac L_opac
double total_bound(const LossTerms& terms, const LossWeights& weights);

// L_rgb + L_edge + L_lap + |d|^2 + |theta_sub - ref|^2 + lambda_dist L_dist
//   + L_s + lambda_opac L_ent
double total_unbound(const LossTerms& terms, const LossWeights& weights);

}  // namespace petsplat
