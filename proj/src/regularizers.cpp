#include "petsplat/regularizers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "petsplat/errors.hpp"
#include "petsplat/nearest.hpp"
#include "petsplat/parallel.hpp"

namespace petsplat {

void LossWeights::validate() const {
    const std::array<std::pair<const char*, double>, 8> all{{
        {"lambda_dssim", lambda_dssim},
        {"lambda_opac", lambda_opac},
        {"lambda_dist", lambda_dist},
        {"lambda_edge", lambda_edge},
        {"lambda_lap", lambda_lap},
        {"lambda_offsets", lambda_offsets},
        {"lambda_pose", lambda_pose},
        {"lambda_scale", lambda_scale},
    }};
    for (const auto& [name, value] : all) {
        if (!std::isfinite(value) || value < 0.0) {
            throw NumericError(std::string(name) + " must be finite and nonnegative");
        }
    }
    if (lambda_dssim > 1.0) throw NumericError("lambda_dssim must lie in [0, 1]");
}

PoseSubsetSpec PoseSubsetSpec::at_rest(std::vector<int> joints) {
    PoseSubsetSpec spec;
    spec.reference.assign(joints.size(), Vec3::Zero());
    spec.joints = std::move(joints);
    return spec;
}

void PoseSubsetSpec::validate(std::size_t num_joints) const {
    if (reference.size() != joints.size()) {
        throw ParameterShapeError("pose subset has " + std::to_string(joints.size()) + " joints but " +
                                  std::to_string(reference.size()) + " reference rotations");
    }
    std::set<int> seen;
    for (int j : joints) {
        if (j < 0 || static_cast<std::size_t>(j) >= num_joints) {
            throw ParameterShapeError("pose subset joint " + std::to_string(j) + " out of range");
        }
        if (!seen.insert(j).second) {
            throw ParameterShapeError("pose subset repeats joint " + std::to_string(j));
        }
    }
}

namespace {

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::array<double, 2 * kSsimRadius + 1> gaussian_taps() {
    std::array<double, 2 * kSsimRadius + 1> taps{};
    double sum = 0.0;
    for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
        const double v = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
        taps[static_cast<std::size_t>(i + kSsimRadius)] = v;
        sum += v;
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// Separable zero-padded blur of one plane.
std::vector<double> blur(const std::vector<double>& plane, int w, int h) {
    static const auto taps = gaussian_taps();
    std::vector<double> tmp(plane.size(), 0.0);
    std::vector<double> out(plane.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
                const int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                acc += taps[static_cast<std::size_t>(k + kSsimRadius)] * plane[static_cast<std::size_t>(y * w + xx)];
            }
            tmp[static_cast<std::size_t>(y * w + x)] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
                const int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                acc += taps[static_cast<std::size_t>(k + kSsimRadius)] * tmp[static_cast<std::size_t>(yy * w + x)];
            }
            out[static_cast<std::size_t>(y * w + x)] = acc;
        }
    }
    return out;
}

void require_same_shape(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size()) {
        throw ParameterShapeError("image shapes differ: " + std::to_string(a.width) + "x" +
                                  std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                  std::to_string(b.height));
    }
    if (a.width <= 0 || a.height <= 0) throw ParameterShapeError("images must be non-empty");
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b);
    const int w = a.width;
    const int h = a.height;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
        for (std::size_t i = 0; i < n; ++i) {
            pa[i] = a.data[3 * i + static_cast<std::size_t>(c)];
            pb[i] = b.data[3 * i + static_cast<std::size_t>(c)];
            paa[i] = pa[i] * pa[i];
            pbb[i] = pb[i] * pb[i];
            pab[i] = pa[i] * pb[i];
        }
        const auto mu_a = blur(pa, w, h);
        const auto mu_b = blur(pb, w, h);
        const auto e_aa = blur(paa, w, h);
        const auto e_bb = blur(pbb, w, h);
        const auto e_ab = blur(pab, w, h);
        for (std::size_t i = 0; i < n; ++i) {
            const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
            const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
            const double cov = e_ab[i] - mu_a[i] * mu_b[i];
            const double num = (2.0 * mu_a[i] * mu_b[i] + kSsimC1) * (2.0 * cov + kSsimC2);
            const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kSsimC1) * (var_a + var_b + kSsimC2);
            total += num / den;
        }
    }
    return total / static_cast<double>(3 * n);
}

double loss_rgb(const Image& a, const Image& b, double lambda_dssim) {
    require_same_shape(a, b);
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) l1 += std::abs(a.data[i] - b.data[i]);
    l1 /= static_cast<double>(a.data.size());
    if (lambda_dssim == 0.0) return l1;
    return (1.0 - lambda_dssim) * l1 + lambda_dssim * (1.0 - ssim(a, b));
}

PointwiseLoss loss_edge(const Mesh& mesh, const Mesh& canonical) {
    require_same_topology(mesh, canonical);
    const auto edges = unique_edges(mesh.faces);
    PointwiseLoss out;
    out.grad.assign(mesh.vertices.size(), Vec3::Zero());
    if (edges.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(edges.size());
    for (const auto& [a, b] : edges) {
        const Vec3 e = mesh.vertices[a] - mesh.vertices[b];
        const double len = e.norm();
        const double ref = (canonical.vertices[a] - canonical.vertices[b]).norm();
        const double diff = len - ref;
        out.value += diff * diff;
        if (len > 0.0) {
            const Vec3 g = (2.0 * diff * inv_n / len) * e;
            out.grad[a] += g;
            out.grad[b] -= g;
        }
    }
    out.value *= inv_n;
    return out;
}

PointwiseLoss loss_laplacian(const Mesh& mesh) {
    const auto nbrs = vertex_neighbors(mesh.faces, mesh.vertices.size());
    PointwiseLoss out;
    out.grad.assign(mesh.vertices.size(), Vec3::Zero());
    std::size_t counted = 0;
    for (const auto& n : nbrs) counted += n.empty() ? 0 : 1;
    if (counted == 0) return out;
    const double inv_n = 1.0 / static_cast<double>(counted);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
        if (nbrs[i].empty()) continue;
        Vec3 mean = Vec3::Zero();
        for (VertexIndex j : nbrs[i]) mean += mesh.vertices[j];
        const double inv_deg = 1.0 / static_cast<double>(nbrs[i].size());
        mean *= inv_deg;
        const Vec3 delta = mesh.vertices[i] - mean;
        out.value += delta.squaredNorm();
        const Vec3 g = 2.0 * inv_n * delta;
        out.grad[i] += g;
        for (VertexIndex j : nbrs[i]) out.grad[j] -= inv_deg * g;
    }
    out.value *= inv_n;
    return out;
}

PointwiseLoss loss_offsets(std::span<const Vec3> offsets) {
    PointwiseLoss out;
    out.grad.resize(offsets.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        out.value += offsets[i].squaredNorm();
        out.grad[i] = 2.0 * offsets[i];
    }
    return out;
}

ScalarLoss loss_pose_subset(const Eigen::VectorXd& theta, const PoseSubsetSpec& spec) {
    spec.validate(static_cast<std::size_t>(theta.size()) / 3);
    ScalarLoss out;
    out.grad.assign(static_cast<std::size_t>(theta.size()), 0.0);
    for (std::size_t k = 0; k < spec.joints.size(); ++k) {
        const auto j = static_cast<Eigen::Index>(spec.joints[k]);
        const Vec3 diff = theta.segment<3>(3 * j) - spec.reference[k];
        out.value += diff.squaredNorm();
        for (int c = 0; c < 3; ++c) out.grad[static_cast<std::size_t>(3 * j + c)] = 2.0 * diff[c];
    }
    return out;
}

ScalarLoss loss_opacity(std::span<const double> o) {
    ScalarLoss out;
    if (o.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(o.size());
    out.grad.assign(o.size(), -inv_n);
    for (double v : o) out.value -= v;
    out.value *= inv_n;
    return out;
}

ScalarLoss loss_entropy(std::span<const double> o) {
    ScalarLoss out;
    if (o.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(o.size());
    out.grad.resize(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double v = o[i];
        if (v > 0.0) out.value -= v * std::log(v);
        out.grad[i] = -(std::log(std::max(v, 1e-12)) + 1.0) * inv_n;
    }
    out.value *= inv_n;
    return out;
}

PointwiseLoss loss_scale(std::span<const Vec3> scales) {
    PointwiseLoss out;
    out.grad.resize(scales.size());
    if (scales.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(scales.size());
    for (std::size_t i = 0; i < scales.size(); ++i) {
        const Vec3& s = scales[i];
        int imax = 0;
        int imin = 0;
        for (int c = 1; c < 3; ++c) {
            if (s[c] > s[imax]) imax = c;
            if (s[c] < s[imin]) imin = c;
        }
        out.value += s.squaredNorm() + s[imax] - s[imin];
        Vec3 g = 2.0 * s;
        g[imax] += 1.0;
        g[imin] -= 1.0;
        out.grad[i] = inv_n * g;
    }
    out.value *= inv_n;
    return out;
}

PointToMeshLoss loss_point_to_mesh(std::span<const Vec3> points, const Mesh& mesh, DistanceMode mode,
                                   std::span<const std::uint32_t> assignment, unsigned threads) {
    if (points.empty()) throw ParameterShapeError("point-to-mesh loss needs at least one point");
    if (mesh.faces.empty() || mesh.vertices.empty()) throw ParameterShapeError("point-to-mesh loss needs a non-empty mesh");
    if (!assignment.empty() && assignment.size() != points.size()) {
        throw ParameterShapeError("face assignment must have one entry per point");
    }

    const bool mesh_finite = std::all_of(mesh.vertices.begin(), mesh.vertices.end(),
                                         [](const Vec3& v) { return v.allFinite(); });
    if (!mesh_finite) {
        // A diverged mesh has no meaningful nearest face; report NaN so the
        // caller can name the term instead of searching garbage.
        const double nan = std::numeric_limits<double>::quiet_NaN();
        PointToMeshLoss out;
        out.value = nan;
        out.vertex_grad.assign(mesh.vertices.size(), Vec3::Constant(nan));
        out.nearest_faces.assign(points.size(), 0);
        return out;
    }

    struct PerPoint {
        std::uint32_t face;
        double value;
        std::array<Vec3, 3> grad;
    };
    std::vector<PerPoint> per(points.size());
    const TriangleBvh bvh(mesh);
    parallel_for(points.size(), threads, [&](std::size_t i) {
        const Vec3& p = points[i];
        PerPoint& out = per[i];
        if (!p.allFinite()) {
            // Poisoned input propagates as NaN so callers can name the term.
            const double nan = std::numeric_limits<double>::quiet_NaN();
            out.face = assignment.empty() ? 0 : assignment[i];
            out.value = nan;
            out.grad.fill(Vec3::Constant(nan));
            return;
        }
        NearestFace nf;
        if (assignment.empty()) {
            nf = bvh.nearest(p);
        } else {
            if (assignment[i] >= mesh.faces.size()) {
                throw ParameterShapeError("assigned face " + std::to_string(assignment[i]) + " out of range");
            }
            const Face& f = mesh.faces[assignment[i]];
            nf.face = assignment[i];
            nf.projection = project_to_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
        }
        // d/dv_k of min_b |p - sum b v|^2 is -2 (p - q) b_k at the minimizer.
        const Vec3 r = p - nf.projection.closest;
        const double d2 = nf.projection.distance_squared;
        out.face = nf.face;
        Vec3 dq;
        if (mode == DistanceMode::squared) {
            out.value = d2;
            dq = -2.0 * r;
        } else {
            const double d = std::sqrt(d2);
            out.value = d;
            dq = d > 0.0 ? Vec3(-r / d) : Vec3::Zero();
        }
        for (int k = 0; k < 3; ++k) out.grad[static_cast<std::size_t>(k)] = nf.projection.bary[k] * dq;
    });

    PointToMeshLoss out;
    out.vertex_grad.assign(mesh.vertices.size(), Vec3::Zero());
    out.nearest_faces.resize(points.size());
    const double inv_n = 1.0 / static_cast<double>(points.size());
    for (std::size_t i = 0; i < per.size(); ++i) {
        out.value += per[i].value;
        out.nearest_faces[i] = per[i].face;
        const Face& f = mesh.faces[per[i].face];
        for (int k = 0; k < 3; ++k) out.vertex_grad[f[static_cast<std::size_t>(k)]] += inv_n * per[i].grad[static_cast<std::size_t>(k)];
    }
    out.value *= inv_n;
    return out;
}

double total_bound(const LossTerms& t, const LossWeights& w) {
    return t.rgb + w.lambda_edge * t.edge + w.lambda_lap * t.lap + w.lambda_offsets * t.offsets +
           w.lambda_pose * t.pose + w.lambda_opac * t.opac;
}

double total_unbound(const LossTerms& t, const LossWeights& w) {
    return t.rgb + w.lambda_edge * t.edge + w.lambda_lap * t.lap + w.lambda_offsets * t.offsets +
           w.lambda_pose * t.pose + w.lambda_dist * t.dist + w.lambda_scale * t.scale + w.lambda_opac * t.ent;
}

}  // namespace petsplat
