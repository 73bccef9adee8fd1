#include "petsplat/skinning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "petsplat/errors.hpp"
#include "petsplat/face_frames.hpp"
#include "petsplat/parallel.hpp"

namespace petsplat {

namespace {

// Blends whose summed quaternion is shorter than this are treated as cancelled.
constexpr double kMinBlendNorm = 1e-9;

const FaceState& use_face(const std::vector<FaceState>& states, std::uint32_t face) {
    const FaceState& s = states[face];
    if (!s.valid) throw FrameError("face " + std::to_string(face) + " is degenerate (collinear vertices)");
    return s;
}

}  // namespace

void BindingTable::validate(std::size_t num_faces, double weight_tol) const {
    if (k_faces == 0) throw FormatError("binding table has K = 0");
    const std::size_t n = face_ids.size();
    if (n % k_faces != 0 || weights.size() != n || local_positions.size() != n || local_rotations.size() != n ||
        ref_lengths.size() != n) {
        throw FormatError("binding table arrays have inconsistent sizes");
    }
    for (std::size_t i = 0; i < num_splats(); ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < k_faces; ++k) {
            const std::size_t s = slot(i, k);
            if (face_ids[s] >= num_faces) {
                throw FormatError("splat " + std::to_string(i) + " binds face " + std::to_string(face_ids[s]) +
                                  " but mesh has " + std::to_string(num_faces) + " faces");
            }
            for (std::size_t m = 0; m < k; ++m) {
                if (face_ids[slot(i, m)] == face_ids[s]) {
                    throw FormatError("splat " + std::to_string(i) + " binds face " + std::to_string(face_ids[s]) +
                                      " twice");
                }
            }
            if (!std::isfinite(weights[s]) || weights[s] < 0.0) {
                throw FormatError("splat " + std::to_string(i) + " has a negative or non-finite weight");
            }
            if (!local_positions[s].allFinite() || !local_rotations[s].coeffs().allFinite()) {
                throw FormatError("splat " + std::to_string(i) + " has non-finite local coordinates");
            }
            if (std::abs(local_rotations[s].norm() - 1.0) > weight_tol) {
                throw FormatError("splat " + std::to_string(i) + " has a non-unit local rotation");
            }
            if (!(ref_lengths[s] > 0.0) || !std::isfinite(ref_lengths[s])) {
                throw FormatError("splat " + std::to_string(i) + " has a non-positive reference edge sum");
            }
            sum += weights[s];
        }
        if (std::abs(sum - 1.0) > weight_tol) {
            throw FormatError("weights of splat " + std::to_string(i) + " sum to " + std::to_string(sum));
        }
    }
}

std::vector<FaceState> face_states(const Mesh& mesh, unsigned threads) {
    std::vector<FaceState> states(mesh.faces.size());
    parallel_for(mesh.faces.size(), threads, [&](std::size_t f) {
        const Face& face = mesh.faces[f];
        const Vec3& v0 = mesh.vertices[face[0]];
        const Vec3& v1 = mesh.vertices[face[1]];
        const Vec3& v2 = mesh.vertices[face[2]];
        FaceState& s = states[f];
        s.centroid = triangle_centroid(v0, v1, v2);
        s.edge_sum = edge_length_sum(v0, v1, v2);
        try {
            s.rotation = skinning_frame(v0, v1, v2).rotation;
            s.quaternion = quaternion_from_matrix(s.rotation);
            s.valid = true;
        } catch (const FrameError&) {
            s.rotation = Mat3::Identity();
            s.quaternion = Quat::Identity();
            s.valid = false;
        }
    });
    return states;
}

CentroidIndex::CentroidIndex(std::vector<Vec3> centroids) : centroids_(std::move(centroids)) {
    for (std::size_t i = 0; i < centroids_.size(); ++i) {
        if (!centroids_[i].allFinite()) throw NumericError("centroid " + std::to_string(i) + " is not finite");
    }
    Eigen::AlignedBox3d box;
    for (const Vec3& c : centroids_) box.extend(c);
    origin_ = centroids_.empty() ? Vec3::Zero() : box.min();
    const Vec3 extent = centroids_.empty() ? Vec3::Ones() : Vec3(box.sizes());
    // Roughly two centroids per occupied cell for a surface-like distribution.
    const double volume = std::max(extent.prod(), 1e-30);
    const double target = std::max<double>(1.0, static_cast<double>(centroids_.size()) / 2.0);
    cell_ = std::cbrt(volume / target);
    const double max_extent = extent.maxCoeff();
    if (!(cell_ > 0.0) || !std::isfinite(cell_)) cell_ = max_extent > 0.0 ? max_extent : 1.0;
    cell_ = std::max(cell_, max_extent / 64.0);
    if (!(cell_ > 0.0)) cell_ = 1.0;
    for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(std::floor(extent[a] / cell_)) + 1;

    const std::size_t ncells = static_cast<std::size_t>(dims_.x()) * static_cast<std::size_t>(dims_.y()) *
                               static_cast<std::size_t>(dims_.z());
    auto flat = [&](const Eigen::Vector3i& c) {
        return (static_cast<std::size_t>(c.z()) * static_cast<std::size_t>(dims_.y()) + static_cast<std::size_t>(c.y())) *
                   static_cast<std::size_t>(dims_.x()) +
               static_cast<std::size_t>(c.x());
    };
    cell_start_.assign(ncells + 1, 0);
    std::vector<std::size_t> cell_of_item(centroids_.size());
    for (std::size_t i = 0; i < centroids_.size(); ++i) {
        cell_of_item[i] = flat(cell_of(centroids_[i]));
        ++cell_start_[cell_of_item[i] + 1];
    }
    for (std::size_t c = 0; c < ncells; ++c) cell_start_[c + 1] += cell_start_[c];
    cell_items_.resize(centroids_.size());
    std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < centroids_.size(); ++i) {
        cell_items_[fill[cell_of_item[i]]++] = static_cast<std::uint32_t>(i);
    }
}

Eigen::Vector3i CentroidIndex::cell_of(const Vec3& p) const {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a) {
        const double t = std::floor((p[a] - origin_[a]) / cell_);
        c[a] = static_cast<int>(std::clamp(t, 0.0, static_cast<double>(dims_[a] - 1)));
    }
    return c;
}

std::vector<std::uint32_t> CentroidIndex::k_nearest(const Vec3& p, std::size_t k) const {
    if (!p.allFinite()) throw NumericError("nearest-centroid query point is not finite");
    k = std::min(k, centroids_.size());
    using Candidate = std::pair<double, std::uint32_t>;
    std::vector<Candidate> found;
    if (k == 0) return {};
    const Eigen::Vector3i home = cell_of(p);
    const int max_ring = dims_.maxCoeff();

    auto visit_cell = [&](int x, int y, int z) {
        const std::size_t c = (static_cast<std::size_t>(z) * static_cast<std::size_t>(dims_.y()) + static_cast<std::size_t>(y)) *
                                  static_cast<std::size_t>(dims_.x()) +
                              static_cast<std::size_t>(x);
        for (std::uint32_t it = cell_start_[c]; it < cell_start_[c + 1]; ++it) {
            const std::uint32_t idx = cell_items_[it];
            found.emplace_back((p - centroids_[idx]).squaredNorm(), idx);
        }
    };

    for (int r = 0; r <= max_ring; ++r) {
        const Eigen::Vector3i lo = (home.array() - r).max(0);
        const Eigen::Vector3i hi = (home.array() + r).min(dims_.array() - 1);
        for (int z = lo.z(); z <= hi.z(); ++z) {
            for (int y = lo.y(); y <= hi.y(); ++y) {
                for (int x = lo.x(); x <= hi.x(); ++x) {
                    const int ring = std::max({std::abs(x - home.x()), std::abs(y - home.y()), std::abs(z - home.z())});
                    if (ring == r) visit_cell(x, y, z);
                }
            }
        }
        if (found.size() >= k) {
            std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k - 1), found.end());
            const double kth = found[k - 1].first;
            // Every centroid outside rings 0..r is at least r cells away.
            const double reach = static_cast<double>(r) * cell_;
            if (kth < reach * reach * (1.0 - 1e-9)) break;
        }
    }
    std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k), found.end());
    std::vector<std::uint32_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = found[i].second;
    return out;
}

BindingTable bake(const SplatSet& splats, const Mesh& reference, int k_faces, unsigned threads) {
    if (k_faces < 1) throw ParameterShapeError("K must be at least 1");
    if (static_cast<std::size_t>(k_faces) > reference.faces.size()) {
        throw ParameterShapeError("K = " + std::to_string(k_faces) + " exceeds the mesh face count " +
                                  std::to_string(reference.faces.size()));
    }
    for (std::size_t i = 0; i < splats.size(); ++i) {
        if (!splats.splats[i].position.allFinite()) {
            throw NumericError("splat " + std::to_string(i) + " has a non-finite position");
        }
    }
    const auto states = face_states(reference, threads);
    std::vector<Vec3> centroids(states.size());
    for (std::size_t f = 0; f < states.size(); ++f) centroids[f] = states[f].centroid;
    const CentroidIndex index(std::move(centroids));

    const std::size_t n = splats.size();
    const auto k = static_cast<std::size_t>(k_faces);
    BindingTable table;
    table.k_faces = static_cast<std::uint32_t>(k_faces);
    table.face_ids.resize(n * k);
    table.weights.resize(n * k);
    table.local_positions.resize(n * k);
    table.local_rotations.resize(n * k);
    table.ref_lengths.resize(n * k);

    parallel_for(n, threads, [&](std::size_t i) {
        const Splat& s = splats.splats[i];
        const auto faces = index.k_nearest(s.position, k);
        std::vector<double> dist(k);
        std::size_t zeros = 0;
        for (std::size_t j = 0; j < k; ++j) {
            dist[j] = (s.position - states[faces[j]].centroid).norm();
            if (dist[j] == 0.0) ++zeros;
        }
        double inv_sum = 0.0;
        if (zeros == 0) {
            for (double d : dist) inv_sum += 1.0 / d;
        }
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t slot = table.slot(i, j);
            const FaceState& fs = use_face(states, faces[j]);
            table.face_ids[slot] = faces[j];
            if (zeros > 0) {
                // Limit of the inverse-distance formula as d -> 0.
                table.weights[slot] = dist[j] == 0.0 ? 1.0 / static_cast<double>(zeros) : 0.0;
            } else {
                table.weights[slot] = (1.0 / dist[j]) / inv_sum;
            }
            table.local_positions[slot] = fs.rotation.transpose() * (s.position - fs.centroid);
            table.local_rotations[slot] = (fs.quaternion.conjugate() * s.rotation).normalized();
            table.ref_lengths[slot] = fs.edge_sum;
        }
    });
    return table;
}

SplatSet animate(const BindingTable& table, const SplatSet& splats, const Mesh& new_mesh, unsigned threads) {
    if (table.num_splats() != splats.size()) {
        throw ParameterShapeError("binding table covers " + std::to_string(table.num_splats()) + " splats, got " +
                                  std::to_string(splats.size()));
    }
    for (std::uint32_t f : table.face_ids) {
        if (f >= new_mesh.faces.size()) {
            throw TopologyError("binding references face " + std::to_string(f) + " but mesh has " +
                                std::to_string(new_mesh.faces.size()) + " faces");
        }
    }
    const auto states = face_states(new_mesh, threads);
    SplatSet out = splats;
    const std::size_t k = table.k_faces;

    parallel_for(splats.size(), threads, [&](std::size_t i) {
        Vec3 position = Vec3::Zero();
        Eigen::Vector4d q_sum = Eigen::Vector4d::Zero();
        Eigen::Vector4d q_first = Eigen::Vector4d::Zero();
        double stretch = 0.0;
        double weight_sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t slot = table.slot(i, j);
            const double w = table.weights[slot];
            const FaceState& fs = use_face(states, table.face_ids[slot]);
            position += w * (fs.centroid + fs.rotation * table.local_positions[slot]);
            Eigen::Vector4d q = (fs.quaternion * table.local_rotations[slot]).coeffs();
            if (j == 0) {
                q_first = q;
            } else if (q.dot(q_first) < 0.0) {
                q = -q;
            }
            q_sum += w * q;
            stretch += w * std::sqrt(fs.edge_sum / table.ref_lengths[slot]);
            weight_sum += w;
        }
        const double qn = q_sum.norm();
        if (!(qn > kMinBlendNorm)) {
            throw NumericError("splat " + std::to_string(i) + ": quaternion blend cancels (antipodal rotations)");
        }
        // Dividing by the weight sum leaves exact tables unchanged and keeps
        // tables read back at f32 precision on the simplex.
        Splat& s = out.splats[i];
        s.position = position / weight_sum;
        s.rotation = Quat(Eigen::Vector4d(q_sum / qn));
        s.log_scale = splats.splats[i].log_scale.array() + std::log(stretch / weight_sum);
    });
    return out;
}

std::vector<SplatSet> animate_sequence(const BindingTable& table, const SplatSet& splats,
                                       const ArticulatedModel& model, std::span<const AvatarParams> frames,
                                       unsigned threads) {
    std::vector<SplatSet> out;
    out.reserve(frames.size());
    for (const AvatarParams& params : frames) {
        out.push_back(animate(table, splats, forward(model, params), threads));
    }
    return out;
}

}  // namespace petsplat
