#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "petsplat/model.hpp"
#include "petsplat/regularizers.hpp"

namespace petsplat {

enum class GradientMode { analytic, finite_difference };

struct FitConfig {
    int iterations = 200;
    double step_beta = 1e-3;
    double step_theta = 1e-3;
    double step_trans = 1e-2;
    double step_offsets = 1e-4;
    LossWeights weights;
    PoseSubsetSpec pose_subset;
    // Stop once |L_k - L_{k-1}| falls below this; 0 disables the check.
    double tolerance = 0.0;
    GradientMode gradient = GradientMode::analytic;
    DistanceMode distance = DistanceMode::squared;
    unsigned threads = 0;

    // Throws ParameterShapeError / NumericError on invalid settings.
    void validate(const ArticulatedModel& model) const;
};

// Geometric objective terms, unweighted.
struct GeoTerms {
    double edge = 0.0;
    double lap = 0.0;
    double offsets = 0.0;
    double pose = 0.0;
    double dist = 0.0;
    double total = 0.0;
};

struct GeoEvaluation {
    GeoTerms terms;
    ParamGradient gradient;
    std::vector<std::uint32_t> assignment;
};

// Geometric part of the unbound objective with splats frozen:
//   lambda_edge L_edge(V, V0) + lambda_lap L_lap(V - V0) + lambda_offsets |d|^2
//   + lambda_pose |theta_sub - ref|^2 + lambda_dist L_dist(target, V)
// where V0 is the mesh at canonical parameters. The Laplacian acts on the
// displacement from V0 so the rest shape itself is not penalized.
class GeoObjective {
public:
    GeoObjective(const ArticulatedModel& model, std::span<const Vec3> target, const FitConfig& config);

    // Value and analytic gradient. A non-empty assignment freezes the
    // nearest face per target point. Throws NumericError naming the first
    // term whose gradient is not finite.
    GeoEvaluation evaluate(const AvatarParams& params, std::span<const std::uint32_t> assignment = {}) const;

    // Value only, same assignment semantics.
    double value(const AvatarParams& params, std::span<const std::uint32_t> assignment = {}) const;

    // Central differences of value() with the given step.
    ParamGradient numeric_gradient(const AvatarParams& params, std::span<const std::uint32_t> assignment,
                                   double step = 1e-5) const;

private:
    GeoTerms terms(const Mesh& mesh, const AvatarParams& params, std::span<const std::uint32_t> assignment) const;

    const ArticulatedModel& model_;
    std::span<const Vec3> target_;
    const FitConfig& config_;
    Mesh canonical_;
};

struct TraceRow {
    int iteration = 0;
    GeoTerms terms;
};

struct FitResult {
    AvatarParams params;
    std::vector<TraceRow> trace;
};

// Plain gradient descent with per-group steps. The trace holds the loss at
// every visited iterate, including the initial and the returned one.
FitResult fit(const ArticulatedModel& model, const AvatarParams& init, std::span<const Vec3> target,
              const FitConfig& config);

struct GradientReport {
    double beta = 0.0;
    double theta = 0.0;
    double trans = 0.0;
    double offsets = 0.0;
    // Names of the terms with nonzero weight, i.e. covered by the check.
    std::vector<std::string> terms;

    double max() const;
};

// |g_analytic - g_fd| / max(|g_analytic|, |g_fd|, 1e-6) per parameter group,
// with the nearest-face assignment frozen at params.
GradientReport gradient_check(const ArticulatedModel& model, const AvatarParams& params,
                              std::span<const Vec3> target, const FitConfig& config, double step = 1e-5);

// Norm-based relative error used by gradient checks.
double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric);

}  // namespace petsplat
