// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "petsplat/binding.hpp"
#include "petsplat/errors.hpp"
#include "petsplat/face_frames.hpp"
#include "petsplat/fitter.hpp"
#include "petsplat/fixtures.hpp"
#include "petsplat/io.hpp"
#include "petsplat/regularizers.hpp"
#include "petsplat/renderer.hpp"
#include "petsplat/skinning.hpp"
#include "support.hpp"

using namespace petsplat;
using testing::Rng;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    return buf;
}

SplatSet splats_around(const Mesh& m, std::size_t n, std::uint64_t seed) {
    Eigen::AlignedBox3d box;
    for (const Vec3& v : m.vertices) box.extend(v);
    return random_splats(n, box.min() - Vec3::Constant(0.05), box.max() + Vec3::Constant(0.05), seed);
}

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-6});
}

// ---------------------------------------------------------------------------

Outcome identity_round_trip() {
    const ArticulatedModel toy = make_toy_quadruped();
    const Mesh m = toy.template_mesh();
    const SplatSet s = splats_around(m, 10000, 101);
    const auto start = Clock::now();
    const SplatSet out = animate(bake(s, m), s, m);
    const double secs = seconds_since(start);
    double pos = 0.0, quat = 0.0;
    bool scales_exact = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
        pos = std::max(pos, (out.splats[i].position - s.splats[i].position).norm());
        const Eigen::Vector4d a = out.splats[i].rotation.coeffs(), b = s.splats[i].rotation.coeffs();
        quat = std::max(quat, std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff()));
        scales_exact &= out.splats[i].log_scale == s.splats[i].log_scale;
    }
    return {pos <= 1e-9 && quat <= 1e-9 && scales_exact && secs < 5.0,
            format("max |dp| %.3g, max |dq| (up to sign) %.3g, scales exact %s, %.2f s", pos, quat,
                   scales_exact ? "yes" : "no", secs)};
}

Outcome rigid_equivariance() {
    const ArticulatedModel toy = make_toy_quadruped();
    const Mesh m = toy.template_mesh();
    const SplatSet s = splats_around(m, 1000, 202);
    const BindingTable t = bake(s, m);
    Rng rng(202);
    double pos = 0.0, rot = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Mat3 g = rng.rotation();
        const Vec3 shift = rng.vec(-5, 5);
        Mesh moved = m;
        for (Vec3& v : moved.vertices) v = g * v + shift;
        const SplatSet out = animate(t, s, moved);
        for (std::size_t i = 0; i < s.size(); ++i) {
            pos = std::max(pos, (out.splats[i].position - (g * s.splats[i].position + shift)).norm());
            rot = std::max(rot, (out.splats[i].rotation_matrix() - g * s.splats[i].rotation_matrix()).norm());
        }
    }
    return {pos <= 1e-6 && rot <= 1e-6, format("100 motions, max position error %.3g, max rotation error %.3g", pos, rot)};
}

Outcome weight_formula() {
    const ArticulatedModel toy = make_toy_quadruped();
    const Mesh m = toy.template_mesh();
    SplatSet s = splats_around(m, 400, 303);
    // Tie cases: mesh vertices and face centroids sit at equal distances
    // from several centroids on the regular box grids.
    for (std::size_t i = 0; i < 50; ++i) {
        Splat a;
        a.position = m.vertices[(i * 37) % m.vertices.size()];
        s.splats.push_back(a);
        Splat b;
        b.position = face_centroid(m, (i * 53) % m.faces.size());
        s.splats.push_back(b);
    }
    const std::size_t k = kDefaultBindingFaces;
    const BindingTable t = bake(s, m, static_cast<int>(k));
    std::size_t agree = 0, ties = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::vector<std::pair<double, std::uint32_t>> all;
        for (std::uint32_t f = 0; f < m.faces.size(); ++f) {
            const Face& face = m.faces[f];
            const Vec3 c = (m.vertices[face[0]] + m.vertices[face[1]] + m.vertices[face[2]]) / 3.0;
            all.emplace_back((s.splats[i].position - c).squaredNorm(), f);
        }
        std::sort(all.begin(), all.end());
        bool ok = true;
        std::vector<double> inv;
        for (std::size_t j = 0; j < k; ++j) {
            ok &= t.face_ids[i * k + j] == all[j].second;
            inv.push_back(all[j].first == 0.0 ? 0.0 : 1.0 / std::sqrt(all[j].first));
        }
        for (std::size_t j = 0; j + 1 < all.size() && j < k; ++j) ties += all[j].first == all[j + 1].first ? 1 : 0;
        // Inverse-distance weights, normalized; zero distance takes all weight.
        const std::size_t zeros = static_cast<std::size_t>(std::count_if(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                                                                         [](const auto& e) { return e.first == 0.0; }));
        double total = 0.0;
        for (double v : inv) total += v;
        for (std::size_t j = 0; j < k; ++j) {
            const double expect = zeros ? (all[j].first == 0.0 ? 1.0 / static_cast<double>(zeros) : 0.0) : inv[j] / total;
            ok &= std::abs(t.weights[i * k + j] - expect) <= 1e-12;
        }
        agree += ok ? 1 : 0;
    }
    return {agree == s.size() && ties > 0,
            format("K = %zu, %zu / %zu splats match the full scan (%zu tied neighbor pairs)", k, agree, s.size(), ties)};
}

Outcome loss_constants() {
    const LossWeights w;
    LossTerms dist;
    dist.dist = 1.0;
    LossTerms ent;
    ent.ent = 1.0;
    LossTerms opac;
    opac.opac = 1.0;
    LossTerms unit{1, 1, 1, 1, 1, 1, 1, 1, 1};
    const double u = total_unbound(unit, w);
    const double b = total_bound(unit, w);
    const bool ok = total_unbound(dist, w) == 10.0 && total_unbound(ent, w) == 0.001 && total_bound(opac, w) == 0.001 &&
                    total_bound(dist, w) == 0.0 && u == 1 + 1 + 1 + 1 + 1 + 10.0 + 1 + 0.001 && b == 5 + 0.001;
    return {ok, format("unit terms: total_unbound %.17g, total_bound %.17g; dist alone %.17g, ent alone %.17g",
                       u, b, total_unbound(dist, w), total_unbound(ent, w))};
}

// Central differences over a flat parameter vector.
Eigen::VectorXd central(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x, double h) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

std::vector<Vec3> unstack(const Eigen::VectorXd& x) {
    std::vector<Vec3> out(static_cast<std::size_t>(x.size() / 3));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.segment<3>(static_cast<Eigen::Index>(3 * i));
    return out;
}

Mesh with_vertices(Mesh m, const Eigen::VectorXd& x) {
    m.vertices = unstack(x);
    return m;
}

Outcome gradient_suite() {
    Rng rng(505);
    constexpr int kInstances = 100;
    std::vector<std::pair<std::string, double>> worst;
    std::size_t failures = 0;
    auto record = [&](const std::string& name, double e) {
        auto it = std::find_if(worst.begin(), worst.end(), [&](const auto& p) { return p.first == name; });
        if (it == worst.end()) {
            worst.emplace_back(name, e);
        } else {
            it->second = std::max(it->second, e);
        }
        failures += e < 1e-4 ? 0 : 1;
    };
    const double h = 1e-6;
    for (int trial = 0; trial < kInstances; ++trial) {
        const Mesh mesh = testing::bumpy_grid(4, rng, 0.3);
        const Mesh canon = testing::bumpy_grid(4, rng, 0.3);
        const Eigen::VectorXd x = testing::stack(mesh.vertices);

        record("edge", rel(testing::stack(loss_edge(mesh, canon).grad),
                           central([&](const Eigen::VectorXd& v) { return loss_edge(with_vertices(mesh, v), canon).value; }, x, h)));
        record("lap", rel(testing::stack(loss_laplacian(mesh).grad),
                          central([&](const Eigen::VectorXd& v) { return loss_laplacian(with_vertices(mesh, v)).value; }, x, h)));

        std::vector<Vec3> offsets;
        for (int i = 0; i < 20; ++i) offsets.push_back(rng.vec(-0.2, 0.2));
        record("offsets", rel(testing::stack(loss_offsets(offsets).grad),
                              central([&](const Eigen::VectorXd& v) { return loss_offsets(unstack(v)).value; },
                                      testing::stack(offsets), h)));

        Eigen::VectorXd theta(3 * 6);
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = rng.uniform(-1, 1);
        PoseSubsetSpec spec;
        spec.joints = {1, 4};
        spec.reference = {rng.vec(-0.5, 0.5), rng.vec(-0.5, 0.5)};
        const ScalarLoss pose = loss_pose_subset(theta, spec);
        record("pose", rel(testing::stack(pose.grad),
                           central([&](const Eigen::VectorXd& v) { return loss_pose_subset(v, spec).value; }, theta, h)));

        std::vector<double> o;
        for (int i = 0; i < 30; ++i) o.push_back(rng.uniform(0.05, 0.95));
        const Eigen::VectorXd ov = testing::stack(o);
        auto as_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
        record("opac", rel(testing::stack(loss_opacity(o).grad),
                           central([&](const Eigen::VectorXd& v) { return loss_opacity(as_vec(v)).value; }, ov, h)));
        record("ent", rel(testing::stack(loss_entropy(o).grad),
                          central([&](const Eigen::VectorXd& v) { return loss_entropy(as_vec(v)).value; }, ov, h)));

        std::vector<Vec3> scales;
        for (int i = 0; i < 20; ++i) scales.push_back(Vec3(rng.uniform(0.01, 1), rng.uniform(0.01, 1), rng.uniform(0.01, 1)));
        record("scale", rel(testing::stack(loss_scale(scales).grad),
                            central([&](const Eigen::VectorXd& v) { return loss_scale(unstack(v)).value; },
                                    testing::stack(scales), h)));

        std::vector<Vec3> points;
        for (int i = 0; i < 25; ++i) points.push_back(Vec3(rng.uniform(-0.5, 4.5), rng.uniform(-0.5, 4.5), rng.uniform(-1, 1)));
        for (DistanceMode mode : {DistanceMode::squared, DistanceMode::euclidean}) {
            const PointToMeshLoss l = loss_point_to_mesh(points, mesh, mode);
            const auto assign = l.nearest_faces;
            record(mode == DistanceMode::squared ? "dist (squared)" : "dist (euclidean)",
                   rel(testing::stack(l.vertex_grad), central([&](const Eigen::VectorXd& v) {
                           return loss_point_to_mesh(points, with_vertices(mesh, v), mode, assign).value;
                       }, x, h)));
        }
    }
    std::string detail = format("%d instances per loss, %zu failures; worst:", kInstances, failures);
    for (const auto& [name, e] : worst) detail += format(" %s %.2g", name.c_str(), e);
    return {failures == 0, detail};
}

Outcome analytic_values() {
    const double ent = loss_entropy(std::vector<double>{0.5}).value;
    const double opac = loss_opacity(std::vector<double>(17, 1.0)).value;
    const double scale = loss_scale(std::vector<Vec3>{Vec3(1, 1, 2)}).value;
    return {std::abs(ent - 0.346574) <= 1e-6 && opac == -1.0 && scale == 7.0,
            format("L_ent(0.5) = %.9f, L_opac(ones) = %.17g, L_s(1,1,2) = %.17g", ent, opac, scale)};
}

Outcome scale_law() {
    const ArticulatedModel toy = make_toy_quadruped();
    const Mesh m = toy.template_mesh();
    const SplatSet s = splats_around(m, 2000, 707);
    const BindingTable t = bake(s, m);
    double worst = 0.0;
    for (double lambda : {0.25, 4.0, 9.0}) {
        Mesh scaled = m;
        for (Vec3& v : scaled.vertices) v *= lambda;
        const SplatSet out = animate(t, s, scaled);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const Vec3 ratio = (out.splats[i].log_scale - s.splats[i].log_scale).array().exp();
            worst = std::max(worst, (ratio.array() - std::sqrt(lambda)).abs().maxCoeff());
        }
    }
    return {worst <= 1e-9, format("lambda in {0.25, 4, 9}, max |s_new - sqrt(lambda)| = %.3g", worst)};
}

Outcome fit_recovery() {
    const ArticulatedModel toy = make_toy_quadruped();
    const AvatarParams canon = AvatarParams::canonical(toy);

    AvatarParams moved = canon;
    moved.trans = Vec3(0.3, 0.0, 0.0);
    FitConfig cfg;
    cfg.iterations = 300;
    cfg.step_trans = 0.02;
    auto start = Clock::now();
    const FitResult a = fit(toy, canon, forward(toy, moved).vertices, cfg);
    const double ta = seconds_since(start);
    const double trans_err = (a.params.trans - moved.trans).norm();
    const double ra = a.trace.front().terms.dist / std::max(a.trace.back().terms.dist, 1e-300);

    AvatarParams bent = canon;
    const int joint = toy_joint::front_left_hip;
    bent.theta[3 * joint + 2] = 0.3;
    cfg = FitConfig{};
    // Larger steps let the body joints chase the lifted leg; this one
    // converges smoothly.
    cfg.iterations = 5000;
    cfg.step_theta = 0.3;
    start = Clock::now();
    const FitResult b = fit(toy, canon, forward(toy, bent).vertices, cfg);
    const double tb = seconds_since(start);
    const double angle_err = (b.params.joint_rotation(joint) - bent.joint_rotation(joint)).norm();
    const double rb = b.trace.front().terms.dist / std::max(b.trace.back().terms.dist, 1e-300);

    const bool ok = trans_err <= 1e-2 && angle_err <= 5e-2 && ra >= 100 && rb >= 100 && ta < 60 && tb < 60;
    return {ok, format("translation: error %.3g, L_dist down %.3gx, %.2f s; joint 0.3 rad: error %.3g, L_dist down %.3gx, %.2f s",
                       trans_err, ra, ta, angle_err, rb, tb)};
}

Outcome frame_construction() {
    Rng rng(909);
    double ortho = 0.0, det = 0.0;
    bool eps_exact = true;
    int done = 0;
    while (done < 10000) {
        const Vec3 a = rng.vec(-2, 2), b = rng.vec(-2, 2), c = rng.vec(-2, 2);
        if ((b - a).cross(c - a).norm() < 1e-6) continue;
        ++done;
        const Mat3 s = skinning_frame(a, b, c).rotation;
        const CovarianceFrame cf = covariance_frame(a, b, c);
        const Mat3& r = cf.frame.rotation;
        ortho = std::max({ortho, (s.transpose() * s - Mat3::Identity()).cwiseAbs().maxCoeff(),
                          (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff()});
        det = std::max(det, std::abs(s.determinant() - 1.0));
        eps_exact &= cf.scale.x() == 1e-4;
    }
    return {ortho <= 1e-9 && det <= 1e-9 && eps_exact,
            format("10000 triangles, orthonormality error %.3g, |det - 1| %.3g, first scale = 1e-4 %s", ortho, det,
                   eps_exact ? "always" : "not always")};
}

Outcome renderer_checks() {
    const SplatSet scene = random_splats(5000, Vec3::Constant(-1), Vec3::Constant(1), 1010);
    Camera cam;
    cam.position = Vec3(0.4, 0.9, 3.5);
    cam.width = 256;
    cam.height = 192;
    RenderOptions opt;
    opt.threads = 1;
    const RenderTarget one = render(scene, cam, opt);
    bool identical = true;
    for (unsigned n : {4u, 16u}) {
        opt.threads = n;
        const RenderTarget other = render(scene, cam, opt);
        identical &= other.color.data == one.color.data && other.alpha == one.alpha;
    }

    Rng rng(1011);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Camera c;
        c.position = rng.vec(-1, 1).normalized() * rng.uniform(3, 6);
        c.target = rng.vec(-0.3, 0.3);
        c.fov_y = rng.uniform(0.5, 1.2);
        c.width = 96;
        c.height = 72;
        Splat sp;
        sp.position = rng.vec(-0.5, 0.5);
        sp.set_scale(Vec3::Constant(0.02));
        sp.set_opacity(0.95);
        SplatSet s;
        s.splats.push_back(sp);
        const RenderTarget t = render(s, c);
        const auto k = static_cast<std::size_t>(std::max_element(t.alpha.begin(), t.alpha.end()) - t.alpha.begin());
        // Pinhole projection of the center, computed directly.
        const Vec3 fwd = (c.target - c.position).normalized();
        const Vec3 right = fwd.cross(c.up).normalized();
        const Vec3 down = fwd.cross(right);
        const Vec3 rel_pos = sp.position - c.position;
        const double f = c.height / (2 * std::tan(c.fov_y / 2));
        const double u = c.width / 2.0 + f * rel_pos.dot(right) / rel_pos.dot(fwd);
        const double v = c.height / 2.0 + f * rel_pos.dot(down) / rel_pos.dot(fwd);
        const double px = static_cast<double>(k % static_cast<std::size_t>(c.width)) + 0.5;
        const double py = static_cast<double>(k / static_cast<std::size_t>(c.width)) + 0.5;
        worst = std::max({worst, std::abs(px - u), std::abs(py - v)});
    }
    return {identical && worst <= 0.5,
            format("1/4/16 threads identical: %s; peak pixel vs projected center, max offset %.3f px over 50 cases",
                   identical ? "yes" : "no", worst)};
}

int sh(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome pipeline_smoke() {
    const fs::path dir = testing::temp_dir("acceptance_pipeline");
    const std::string cli = std::string("\"") + PETSPLAT_CLI + "\" ";
    auto p = [&](const char* name) { return "\"" + (dir / name).string() + "\""; };
    const std::string quiet = " >" + p("log.txt") + " 2>&1";

    const ArticulatedModel toy = make_toy_quadruped();
    std::vector<AvatarParams> frames{AvatarParams::canonical(toy), toy_leg_lift(toy), toy_pose_library(toy)[4].params};
    write_animation(dir / "anim.json", frames);

    const auto start = Clock::now();
    const std::vector<std::pair<std::string, std::string>> steps{
        {"make-toy", "make-toy -o " + p("toy.json") + " --mesh " + p("toy.obj")},
        {"bind", "bind " + p("toy.obj") + " -o " + p("splats.ply")},
        {"synth-views", "synth-views " + p("toy.obj") + " --views 16 -o " + p("views")},
        {"bake", "bake " + p("splats.ply") + " " + p("toy.obj") + " -o " + p("toy.bind")},
        {"animate", "animate " + p("splats.ply") + " " + p("toy.bind") + " " + p("toy.json") + " --animation " +
                        p("anim.json") + " -o " + p("frames")},
        {"render", "render " + p("frames/frame_000.ply") + " " + p("frames/frame_001.ply") + " " +
                       p("frames/frame_002.ply") + " -o " + p("renders")},
    };
    for (const auto& [name, args] : steps) {
        if (sh(cli + args + quiet) != 0) return {false, "step " + name + " failed: " + testing::slurp(dir / "log.txt")};
    }
    const double secs = seconds_since(start);

    // Every artifact re-serializes to the same bytes.
    std::vector<std::string> lossy;
    auto same = [&](const fs::path& a, const fs::path& b) {
        if (testing::slurp(a) != testing::slurp(b)) lossy.push_back(a.filename().string());
    };
    const fs::path again = dir / "again";
    fs::create_directories(again);
    write_model(again / "toy.json", read_model(dir / "toy.json"));
    same(dir / "toy.json", again / "toy.json");
    write_mesh(again / "toy.obj", read_mesh(dir / "toy.obj"));
    same(dir / "toy.obj", again / "toy.obj");
    write_splats(again / "splats.ply", read_splats(dir / "splats.ply"));
    same(dir / "splats.ply", again / "splats.ply");
    write_binding(again / "toy.bind", read_binding(dir / "toy.bind"));
    same(dir / "toy.bind", again / "toy.bind");
    write_animation(again / "anim.json", read_animation(dir / "anim.json", toy));
    same(dir / "anim.json", again / "anim.json");
    write_camera_manifest(again / "cameras.json", read_camera_manifest(dir / "views" / "cameras.json"));
    same(dir / "views" / "cameras.json", again / "cameras.json");
    std::size_t files = 0;
    for (const char* sub : {"frames", "renders", "views"}) {
        for (const auto& e : fs::directory_iterator(dir / sub)) {
            ++files;
            const auto ext = e.path().extension();
            const fs::path copy = again / (std::string(sub) + "_" + e.path().filename().string());
            if (ext == ".ply") {
                write_splats(copy, read_splats(e.path()));
                same(e.path(), copy);
            } else if (ext == ".png") {
                write_png(copy, read_png(e.path()));
                same(e.path(), copy);
            }
        }
    }
    const bool counts = files == 3 + 3 + 17;
    std::string detail = format("%.2f s, %zu outputs, ", secs, files);
    detail += lossy.empty() ? "all round trips byte-identical" : "lossy: " + lossy.front();
    return {secs < 120 && lossy.empty() && counts, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"skinning identity round-trip", identity_round_trip},
        {"rigid equivariance", rigid_equivariance},
        {"skinning weight formula (K = 10)", weight_formula},
        {"loss constants", loss_constants},
        {"gradient suite", gradient_suite},
        {"entropy / opacity / scale analytics", analytic_values},
        {"scale law", scale_law},
        {"fit recovery", fit_recovery},
        {"frame construction", frame_construction},
        {"renderer determinism and geometry", renderer_checks},
        {"pipeline smoke", pipeline_smoke},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
