#include "petsplat/model.hpp"

#include <cmath>
#include <string>

#include "petsplat/errors.hpp"

namespace petsplat {

namespace {

constexpr double kWeightSumTolerance = 1e-6;

}  // namespace

void ArticulatedModel::validate() const {
    const std::size_t nv = num_vertices();
    const std::size_t nj = num_joints();
    if (nv == 0) throw ModelError("model has no vertices");
    if (nj == 0) throw ModelError("model has no joints");
    if (faces.empty()) throw ModelError("model has no faces");
    validate_faces(faces, nv);
    kinematic_order(parents);

    if (static_cast<std::size_t>(joint_regressor.rows()) != nj ||
        static_cast<std::size_t>(joint_regressor.cols()) != nv) {
        throw ModelError("regressor must be " + std::to_string(nj) + " x " + std::to_string(nv));
    }
    if (static_cast<std::size_t>(skin_weights.rows()) != nv ||
        static_cast<std::size_t>(skin_weights.cols()) != nj) {
        throw ModelError("skin weights must be " + std::to_string(nv) + " x " + std::to_string(nj));
    }
    if (static_cast<std::size_t>(shape_basis.rows()) != 3 * nv) {
        throw ModelError("shape basis must have 3 x vertices rows");
    }
    for (std::size_t i = 0; i < nv; ++i) {
        if (!template_vertices[i].allFinite()) {
            throw ModelError("template vertex " + std::to_string(i) + " is not finite");
        }
        const auto row = skin_weights.row(static_cast<Eigen::Index>(i));
        if (!row.allFinite() || row.minCoeff() < 0.0) {
            throw ModelError("skin weights of vertex " + std::to_string(i) +
                             " must be finite and nonnegative");
        }
        if (std::abs(row.sum() - 1.0) > kWeightSumTolerance) {
            throw ModelError("skin weights of vertex " + std::to_string(i) + " sum to " +
                             std::to_string(row.sum()) + ", expected 1");
        }
    }
    if (!joint_regressor.allFinite()) throw ModelError("regressor contains non-finite values");
    if (!shape_basis.allFinite()) throw ModelError("shape basis contains non-finite values");
}

AvatarParams AvatarParams::canonical(const ArticulatedModel& model) {
    AvatarParams p;
    p.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.num_shape_coeffs()));
    p.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * model.num_joints()));
    p.trans = Vec3::Zero();
    p.offsets.assign(model.num_vertices(), Vec3::Zero());
    return p;
}

void check_dimensions(const ArticulatedModel& model, const AvatarParams& params) {
    auto fail = [](const std::string& what, std::size_t got, std::size_t want) {
        throw ParameterShapeError(what + " has " + std::to_string(got) + " entries, model expects " +
                                  std::to_string(want));
    };
    if (static_cast<std::size_t>(params.beta.size()) != model.num_shape_coeffs())
        fail("beta", static_cast<std::size_t>(params.beta.size()), model.num_shape_coeffs());
    if (static_cast<std::size_t>(params.theta.size()) != 3 * model.num_joints())
        fail("theta", static_cast<std::size_t>(params.theta.size()), 3 * model.num_joints());
    if (params.offsets.size() != model.num_vertices())
        fail("offsets", params.offsets.size(), model.num_vertices());
}

std::vector<int> kinematic_order(std::span<const int> parents) {
    const int n = static_cast<int>(parents.size());
    std::vector<std::vector<int>> children(parents.size());
    int root = -1;
    for (int j = 0; j < n; ++j) {
        const int p = parents[static_cast<std::size_t>(j)];
        if (p < 0) {
            if (root >= 0) {
                throw ModelError("kinematic tree has more than one root (joints " +
                                 std::to_string(root) + " and " + std::to_string(j) + ")");
            }
            root = j;
        } else if (p >= n || p == j) {
            throw ModelError("joint " + std::to_string(j) + " has invalid parent " +
                             std::to_string(p));
        } else {
            children[static_cast<std::size_t>(p)].push_back(j);
        }
    }
    if (root < 0) throw ModelError("kinematic tree has no root");

    std::vector<int> order;
    order.reserve(parents.size());
    order.push_back(root);
    for (std::size_t head = 0; head < order.size(); ++head) {
        for (int c : children[static_cast<std::size_t>(order[head])]) order.push_back(c);
    }
    if (order.size() != parents.size()) {
        throw ModelError("kinematic tree contains a cycle unreachable from the root");
    }
    return order;
}

Mat3 rodrigues(const Vec3& v) {
    const double theta2 = v.squaredNorm();
    const Mat3 k = skew(v);
    if (theta2 < 1e-16) {
        return Mat3::Identity() + k + 0.5 * k * k;
    }
    const double theta = std::sqrt(theta2);
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / theta2;
    return Mat3::Identity() + a * k + b * k * k;
}

// Gallego & Yezzi, "A compact formula for the derivative of a 3-D rotation in
// exponential coordinates" (2015), with a second-order series near zero.
std::array<Mat3, 3> rodrigues_derivatives(const Vec3& v) {
    std::array<Mat3, 3> out;
    const double theta2 = v.squaredNorm();
    if (theta2 < 1e-10) {
        const Mat3 k = skew(v);
        for (int i = 0; i < 3; ++i) {
            const Mat3 ei = skew(Vec3::Unit(i));
            out[static_cast<std::size_t>(i)] = ei + 0.5 * (ei * k + k * ei);
        }
        return out;
    }
    const Mat3 r = rodrigues(v);
    const Mat3 k = skew(v);
    const Mat3 i_minus_r = Mat3::Identity() - r;
    for (int i = 0; i < 3; ++i) {
        const Vec3 col = v.cross(i_minus_r.col(i));
        out[static_cast<std::size_t>(i)] = (v[i] * k + skew(col)) * r / theta2;
    }
    return out;
}

std::vector<Vec3> shaped_rest_vertices(const ArticulatedModel& model, const AvatarParams& params) {
    check_dimensions(model, params);
    const std::size_t nv = model.num_vertices();
    std::vector<Vec3> rest(nv);
    Eigen::VectorXd shape_disp;
    if (model.num_shape_coeffs() > 0) shape_disp = model.shape_basis * params.beta;
    for (std::size_t i = 0; i < nv; ++i) {
        Vec3 v = model.template_vertices[i] + params.offsets[i];
        if (model.num_shape_coeffs() > 0) v += shape_disp.segment<3>(static_cast<Eigen::Index>(3 * i));
        rest[i] = v;
    }
    return rest;
}

namespace {

std::vector<Vec3> regress_joints(const ArticulatedModel& model, std::span<const Vec3> rest) {
    const std::size_t nj = model.num_joints();
    std::vector<Vec3> joints(nj, Vec3::Zero());
    for (std::size_t j = 0; j < nj; ++j) {
        Vec3 acc = Vec3::Zero();
        for (std::size_t i = 0; i < rest.size(); ++i) {
            const double w = model.joint_regressor(static_cast<Eigen::Index>(j),
                                                   static_cast<Eigen::Index>(i));
            if (w != 0.0) acc += w * rest[i];
        }
        joints[j] = acc;
    }
    return joints;
}

}  // namespace

std::vector<Vec3> joint_positions(const ArticulatedModel& model, const AvatarParams& params) {
    return regress_joints(model, shaped_rest_vertices(model, params));
}

ForwardTrace forward_traced(const ArticulatedModel& model, const AvatarParams& params) {
    ForwardTrace tr;
    tr.shaped_rest = shaped_rest_vertices(model, params);
    tr.joints = regress_joints(model, tr.shaped_rest);
    tr.order = kinematic_order(model.parents);

    const std::size_t nj = model.num_joints();
    tr.local_rotations.resize(nj);
    tr.global_rotations.resize(nj);
    tr.global_translations.resize(nj);
    for (std::size_t j = 0; j < nj; ++j) tr.local_rotations[j] = rodrigues(params.joint_rotation(j));

    for (int ji : tr.order) {
        const auto j = static_cast<std::size_t>(ji);
        const int p = model.parents[j];
        if (p < 0) {
            tr.global_rotations[j] = tr.local_rotations[j];
            tr.global_translations[j] = tr.joints[j];
        } else {
            const auto pj = static_cast<std::size_t>(p);
            tr.global_rotations[j] = tr.global_rotations[pj] * tr.local_rotations[j];
            tr.global_translations[j] =
                tr.global_rotations[pj] * (tr.joints[j] - tr.joints[pj]) + tr.global_translations[pj];
        }
    }

    // A_j(x) = G_j (x - J_j) + t_j, blended per vertex.
    std::vector<Vec3> offsets_j(nj);
    for (std::size_t j = 0; j < nj; ++j) {
        offsets_j[j] = tr.global_translations[j] - tr.global_rotations[j] * tr.joints[j];
    }
    tr.mesh.faces = model.faces;
    tr.mesh.vertices.resize(model.num_vertices());
    for (std::size_t i = 0; i < model.num_vertices(); ++i) {
        Mat3 blend_r = Mat3::Zero();
        Vec3 blend_t = Vec3::Zero();
        for (std::size_t j = 0; j < nj; ++j) {
            const double w = model.skin_weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (w == 0.0) continue;
            blend_r += w * tr.global_rotations[j];
            blend_t += w * offsets_j[j];
        }
        tr.mesh.vertices[i] = blend_r * tr.shaped_rest[i] + blend_t + params.trans;
    }
    return tr;
}

Mesh forward(const ArticulatedModel& model, const AvatarParams& params) {
    return forward_traced(model, params).mesh;
}

ParamGradient backpropagate(const ArticulatedModel& model, const AvatarParams& params,
                            const ForwardTrace& tr, std::span<const Vec3> vertex_grad) {
    const std::size_t nv = model.num_vertices();
    const std::size_t nj = model.num_joints();
    if (vertex_grad.size() != nv) {
        throw ParameterShapeError("vertex gradient has " + std::to_string(vertex_grad.size()) +
                                  " entries, model has " + std::to_string(nv) + " vertices");
    }

    ParamGradient g = AvatarParams::canonical(model);
    std::vector<Mat3> g_global_rot(nj, Mat3::Zero());
    std::vector<Vec3> g_global_trans(nj, Vec3::Zero());
    std::vector<Vec3> g_joints(nj, Vec3::Zero());
    std::vector<Vec3> g_rest(nv, Vec3::Zero());

    // Skinning: v_i = sum_j w_ij (G_j (x_i - J_j) + t_j) + trans.
    for (std::size_t i = 0; i < nv; ++i) {
        const Vec3& gv = vertex_grad[i];
        g.trans += gv;
        Vec3 g_x = Vec3::Zero();
        for (std::size_t j = 0; j < nj; ++j) {
            const double w = model.skin_weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (w == 0.0) continue;
            const Vec3 wg = w * gv;
            g_global_rot[j] += wg * (tr.shaped_rest[i] - tr.joints[j]).transpose();
            g_global_trans[j] += wg;
            g_x += tr.global_rotations[j].transpose() * wg;
        }
        g_rest[i] = g_x;
    }
    for (std::size_t j = 0; j < nj; ++j) {
        g_joints[j] -= tr.global_rotations[j].transpose() * g_global_trans[j];
    }

    // Kinematic chain, children before parents.
    std::vector<Mat3> g_local_rot(nj, Mat3::Zero());
    for (auto it = tr.order.rbegin(); it != tr.order.rend(); ++it) {
        const auto j = static_cast<std::size_t>(*it);
        const int p = model.parents[j];
        if (p < 0) {
            g_local_rot[j] += g_global_rot[j];
            g_joints[j] += g_global_trans[j];
            continue;
        }
        const auto pj = static_cast<std::size_t>(p);
        const Mat3& parent_rot = tr.global_rotations[pj];
        g_global_rot[pj] += g_global_rot[j] * tr.local_rotations[j].transpose();
        g_local_rot[j] += parent_rot.transpose() * g_global_rot[j];
        g_global_rot[pj] += g_global_trans[j] * (tr.joints[j] - tr.joints[pj]).transpose();
        const Vec3 pulled = parent_rot.transpose() * g_global_trans[j];
        g_joints[j] += pulled;
        g_joints[pj] -= pulled;
        g_global_trans[pj] += g_global_trans[j];
    }

    for (std::size_t j = 0; j < nj; ++j) {
        const auto d_r = rodrigues_derivatives(params.joint_rotation(j));
        for (int k = 0; k < 3; ++k) {
            g.theta[static_cast<Eigen::Index>(3 * j) + k] =
                g_local_rot[j].cwiseProduct(d_r[static_cast<std::size_t>(k)]).sum();
        }
    }

    // Joint regression.
    for (std::size_t j = 0; j < nj; ++j) {
        if (g_joints[j].isZero(0.0)) continue;
        for (std::size_t i = 0; i < nv; ++i) {
            const double w = model.joint_regressor(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            if (w != 0.0) g_rest[i] += w * g_joints[j];
        }
    }

    // Blendshapes and offsets.
    Eigen::VectorXd flat(static_cast<Eigen::Index>(3 * nv));
    for (std::size_t i = 0; i < nv; ++i) {
        g.offsets[i] = g_rest[i];
        flat.segment<3>(static_cast<Eigen::Index>(3 * i)) = g_rest[i];
    }
    if (model.num_shape_coeffs() > 0) g.beta = model.shape_basis.transpose() * flat;
    return g;
}

std::vector<double> edge_lengths(const Mesh& mesh) {
    const auto edges = unique_edges(mesh.faces);
    std::vector<double> lengths;
    lengths.reserve(edges.size());
    for (const auto& [a, b] : edges) lengths.push_back((mesh.vertices[a] - mesh.vertices[b]).norm());
    return lengths;
}

}  // namespace petsplat
