#include "petsplat/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "petsplat/errors.hpp"

namespace petsplat {

namespace {

Eigen::VectorXd flatten(const AvatarParams& p) {
    const auto nb = p.beta.size();
    const auto nt = p.theta.size();
    const auto nd = static_cast<Eigen::Index>(3 * p.offsets.size());
    Eigen::VectorXd v(nb + nt + 3 + nd);
    v.head(nb) = p.beta;
    v.segment(nb, nt) = p.theta;
    v.segment<3>(nb + nt) = p.trans;
    for (std::size_t i = 0; i < p.offsets.size(); ++i) {
        v.segment<3>(nb + nt + 3 + static_cast<Eigen::Index>(3 * i)) = p.offsets[i];
    }
    return v;
}

void unflatten(const Eigen::VectorXd& v, AvatarParams& p) {
    const auto nb = p.beta.size();
    const auto nt = p.theta.size();
    p.beta = v.head(nb);
    p.theta = v.segment(nb, nt);
    p.trans = v.segment<3>(nb + nt);
    for (std::size_t i = 0; i < p.offsets.size(); ++i) {
        p.offsets[i] = v.segment<3>(nb + nt + 3 + static_cast<Eigen::Index>(3 * i));
    }
}

bool all_finite(std::span<const Vec3> g) {
    return std::all_of(g.begin(), g.end(), [](const Vec3& v) { return v.allFinite(); });
}

bool all_finite(std::span<const double> g) {
    return std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(bool ok, const char* term) {
    if (!ok) throw NumericError(std::string("non-finite gradient in term ") + term);
}

Mesh displacement(const Mesh& mesh, const Mesh& canonical) {
    Mesh d;
    d.faces = mesh.faces;
    d.vertices.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) d.vertices[i] = mesh.vertices[i] - canonical.vertices[i];
    return d;
}

}  // namespace

void FitConfig::validate(const ArticulatedModel& model) const {
    if (iterations < 0) throw ParameterShapeError("iterations must be nonnegative");
    for (double s : {step_beta, step_theta, step_trans, step_offsets}) {
        if (!(s > 0.0) || !std::isfinite(s)) throw NumericError("step sizes must be positive and finite");
    }
    if (!(tolerance >= 0.0)) throw NumericError("tolerance must be nonnegative");
    weights.validate();
    pose_subset.validate(model.num_joints());
}

GeoObjective::GeoObjective(const ArticulatedModel& model, std::span<const Vec3> target, const FitConfig& config)
    : model_(model), target_(target), config_(config), canonical_(forward(model, AvatarParams::canonical(model))) {
    if (target.empty()) throw ParameterShapeError("fit target has no points");
}

GeoTerms GeoObjective::terms(const Mesh& mesh, const AvatarParams& params,
                             std::span<const std::uint32_t> assignment) const {
    const LossWeights& w = config_.weights;
    GeoTerms t;
    if (w.lambda_edge > 0.0) t.edge = loss_edge(mesh, canonical_).value;
    if (w.lambda_lap > 0.0) t.lap = loss_laplacian(displacement(mesh, canonical_)).value;
    if (w.lambda_offsets > 0.0) t.offsets = loss_offsets(params.offsets).value;
    if (w.lambda_pose > 0.0 && !config_.pose_subset.joints.empty()) {
        t.pose = loss_pose_subset(params.theta, config_.pose_subset).value;
    }
    if (w.lambda_dist > 0.0) {
        t.dist = loss_point_to_mesh(target_, mesh, config_.distance, assignment, config_.threads).value;
    }
    t.total = w.lambda_edge * t.edge + w.lambda_lap * t.lap + w.lambda_offsets * t.offsets +
              w.lambda_pose * t.pose + w.lambda_dist * t.dist;
    return t;
}

double GeoObjective::value(const AvatarParams& params, std::span<const std::uint32_t> assignment) const {
    return terms(forward(model_, params), params, assignment).total;
}

GeoEvaluation GeoObjective::evaluate(const AvatarParams& params, std::span<const std::uint32_t> assignment) const {
    const LossWeights& w = config_.weights;
    const ForwardTrace trace = forward_traced(model_, params);
    const Mesh& mesh = trace.mesh;

    GeoEvaluation out;
    std::vector<Vec3> vertex_grad(mesh.vertices.size(), Vec3::Zero());
    auto accumulate = [&](const std::vector<Vec3>& g, double weight) {
        for (std::size_t i = 0; i < g.size(); ++i) vertex_grad[i] += weight * g[i];
    };

    if (w.lambda_edge > 0.0) {
        const auto l = loss_edge(mesh, canonical_);
        require_finite(all_finite(l.grad), "edge");
        out.terms.edge = l.value;
        accumulate(l.grad, w.lambda_edge);
    }
    if (w.lambda_lap > 0.0) {
        const auto l = loss_laplacian(displacement(mesh, canonical_));
        require_finite(all_finite(l.grad), "lap");
        out.terms.lap = l.value;
        accumulate(l.grad, w.lambda_lap);
    }
    if (w.lambda_dist > 0.0) {
        const auto l = loss_point_to_mesh(target_, mesh, config_.distance, assignment, config_.threads);
        require_finite(all_finite(l.vertex_grad) && std::isfinite(l.value), "dist");
        out.terms.dist = l.value;
        out.assignment = l.nearest_faces;
        accumulate(l.vertex_grad, w.lambda_dist);
    }

    out.gradient = backpropagate(model_, params, trace, vertex_grad);

    if (w.lambda_offsets > 0.0) {
        const auto l = loss_offsets(params.offsets);
        require_finite(all_finite(l.grad), "offsets");
        out.terms.offsets = l.value;
        for (std::size_t i = 0; i < l.grad.size(); ++i) out.gradient.offsets[i] += w.lambda_offsets * l.grad[i];
    }
    if (w.lambda_pose > 0.0 && !config_.pose_subset.joints.empty()) {
        const auto l = loss_pose_subset(params.theta, config_.pose_subset);
        require_finite(all_finite(l.grad), "pose");
        out.terms.pose = l.value;
        for (std::size_t i = 0; i < l.grad.size(); ++i) {
            out.gradient.theta[static_cast<Eigen::Index>(i)] += w.lambda_pose * l.grad[i];
        }
    }
    require_finite(flatten(out.gradient).allFinite(), "chain");

    const GeoTerms& t = out.terms;
    out.terms.total = w.lambda_edge * t.edge + w.lambda_lap * t.lap + w.lambda_offsets * t.offsets +
                      w.lambda_pose * t.pose + w.lambda_dist * t.dist;
    return out;
}

ParamGradient GeoObjective::numeric_gradient(const AvatarParams& params, std::span<const std::uint32_t> assignment,
                                             double step) const {
    const Eigen::VectorXd base = flatten(params);
    Eigen::VectorXd grad(base.size());
    AvatarParams probe = params;
    Eigen::VectorXd x = base;
    for (Eigen::Index i = 0; i < base.size(); ++i) {
        x[i] = base[i] + step;
        unflatten(x, probe);
        const double fp = value(probe, assignment);
        x[i] = base[i] - step;
        unflatten(x, probe);
        const double fm = value(probe, assignment);
        x[i] = base[i];
        grad[i] = (fp - fm) / (2.0 * step);
    }
    ParamGradient out = params;
    unflatten(grad, out);
    return out;
}

FitResult fit(const ArticulatedModel& model, const AvatarParams& init, std::span<const Vec3> target,
              const FitConfig& config) {
    config.validate(model);
    check_dimensions(model, init);
    const GeoObjective objective(model, target, config);

    FitResult result;
    result.params = init;
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0;; ++it) {
        GeoEvaluation eval = objective.evaluate(result.params);
        if (config.gradient == GradientMode::finite_difference) {
            eval.gradient = objective.numeric_gradient(result.params, {});
            require_finite(flatten(eval.gradient).allFinite(), "finite-difference");
        }
        result.trace.push_back(TraceRow{it, eval.terms});
        if (it >= config.iterations) break;
        if (config.tolerance > 0.0 && it > 0 && std::abs(previous - eval.terms.total) < config.tolerance) break;
        previous = eval.terms.total;

        AvatarParams& p = result.params;
        p.beta -= config.step_beta * eval.gradient.beta;
        p.theta -= config.step_theta * eval.gradient.theta;
        p.trans -= config.step_trans * eval.gradient.trans;
        for (std::size_t i = 0; i < p.offsets.size(); ++i) p.offsets[i] -= config.step_offsets * eval.gradient.offsets[i];
    }
    return result;
}

double GradientReport::max() const { return std::max({beta, theta, trans, offsets}); }

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    if (analytic.size() == 0) return 0.0;
    const double denom = std::max({analytic.norm(), numeric.norm(), 1e-6});
    return (analytic - numeric).norm() / denom;
}

GradientReport gradient_check(const ArticulatedModel& model, const AvatarParams& params,
                              std::span<const Vec3> target, const FitConfig& config, double step) {
    config.validate(model);
    check_dimensions(model, params);
    const GeoObjective objective(model, target, config);
    const GeoEvaluation eval = objective.evaluate(params);
    const ParamGradient numeric = objective.numeric_gradient(params, eval.assignment, step);
    const ParamGradient& analytic = eval.gradient;

    GradientReport report;
    report.beta = relative_error(analytic.beta, numeric.beta);
    report.theta = relative_error(analytic.theta, numeric.theta);
    report.trans = relative_error(analytic.trans, numeric.trans);
    Eigen::VectorXd da(static_cast<Eigen::Index>(3 * params.offsets.size()));
    Eigen::VectorXd dn(da.size());
    for (std::size_t i = 0; i < params.offsets.size(); ++i) {
        da.segment<3>(static_cast<Eigen::Index>(3 * i)) = analytic.offsets[i];
        dn.segment<3>(static_cast<Eigen::Index>(3 * i)) = numeric.offsets[i];
    }
    report.offsets = relative_error(da, dn);

    const LossWeights& w = config.weights;
    if (w.lambda_edge > 0.0) report.terms.push_back("edge");
    if (w.lambda_lap > 0.0) report.terms.push_back("lap");
    if (w.lambda_offsets > 0.0) report.terms.push_back("offsets");
    if (w.lambda_pose > 0.0 && !config.pose_subset.joints.empty()) report.terms.push_back("pose");
    if (w.lambda_dist > 0.0) report.terms.push_back("dist");
    return report;
}

}  // namespace petsplat
