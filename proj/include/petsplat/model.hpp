#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "petsplat/geometry.hpp"

namespace petsplat {

// Generic articulated mesh in the SMAL layout: template + linear shape
// blendshapes + linear blend skinning over a kinematic tree. Pose-corrective
// blendshapes are not part of the format.
struct ArticulatedModel {
    std::vector<Vec3> template_vertices;
    std::vector<Face> faces;
    // parents[j] < 0 marks the root. Parents need not precede children.
    std::vector<int> parents;
    // joints x vertices
    Eigen::MatrixXd joint_regressor;
    // vertices x joints, rows sum to one
    Eigen::MatrixXd skin_weights;
    // (3 * vertices) x shape coefficients; row 3*i+c holds coordinate c of vertex i
    Eigen::MatrixXd shape_basis;

    std::size_t num_vertices() const { return template_vertices.size(); }
    std::size_t num_joints() const { return parents.size(); }
    std::size_t num_shape_coeffs() const { return static_cast<std::size_t>(shape_basis.cols()); }

    // Throws ModelError describing the first violated invariant.
    void validate() const;

    Mesh template_mesh() const { return Mesh{template_vertices, faces}; }
};

// Theta = (beta, theta, trans, offsets).
struct AvatarParams {
    Eigen::VectorXd beta;
    // axis-angle per joint, 3 * joints entries
    Eigen::VectorXd theta;
    Vec3 trans = Vec3::Zero();
    std::vector<Vec3> offsets;

    static AvatarParams canonical(const ArticulatedModel& model);

    Vec3 joint_rotation(std::size_t joint) const { return theta.segment<3>(3 * joint); }
};

// Gradients share the parameter layout.
using ParamGradient = AvatarParams;

// Throws ParameterShapeError when params cannot be applied to model.
void check_dimensions(const ArticulatedModel& model, const AvatarParams& params);

// Parent-before-child traversal order; throws ModelError on cycles, a missing
// root, multiple roots or out-of-range parents.
std::vector<int> kinematic_order(std::span<const int> parents);

// Rodrigues' formula.
Mat3 rodrigues(const Vec3& axis_angle);

// dR/dv_i for i = 0..2.
std::array<Mat3, 3> rodrigues_derivatives(const Vec3& axis_angle);

// template + shape_basis * beta + offsets
std::vector<Vec3> shaped_rest_vertices(const ArticulatedModel& model, const AvatarParams& params);

// Rest-pose joint locations: regressor applied to the shaped rest vertices.
std::vector<Vec3> joint_positions(const ArticulatedModel& model, const AvatarParams& params);

// Posed mesh M(Theta).
Mesh forward(const ArticulatedModel& model, const AvatarParams& params);

// Everything forward() computes, kept for reverse-mode differentiation.
struct ForwardTrace {
    std::vector<Vec3> shaped_rest;
    std::vector<Vec3> joints;
    std::vector<Mat3> local_rotations;
    std::vector<Mat3> global_rotations;
    std::vector<Vec3> global_translations;
    std::vector<int> order;
    Mesh mesh;
};

ForwardTrace forward_traced(const ArticulatedModel& model, const AvatarParams& params);

// Pulls dL/dvertices back to dL/dTheta through skinning, the kinematic chain,
// joint regression and the blendshapes.
ParamGradient backpropagate(const ArticulatedModel& model, const AvatarParams& params,
                            const ForwardTrace& trace, std::span<const Vec3> vertex_grad);

// One length per unique_edges() entry, in the same order.
std::vector<double> edge_lengths(const Mesh& mesh);

}  // namespace petsplat
