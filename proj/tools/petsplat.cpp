#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "petsplat/binding.hpp"
#include "petsplat/errors.hpp"
#include "petsplat/fitter.hpp"
#include "petsplat/fixtures.hpp"
#include "petsplat/io.hpp"
#include "petsplat/model.hpp"
#include "petsplat/regularizers.hpp"
#include "petsplat/renderer.hpp"
#include "petsplat/skinning.hpp"

namespace fs = std::filesystem;
using namespace petsplat;

namespace {

constexpr int kExitFormat = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInvalid = 4;
constexpr int kExitOther = 1;

struct Globals {
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

bool is_model_file(const fs::path& p) { return p.extension() == ".json"; }

// A mesh file (.obj) or a model document (.json) posed by an optional params file.
Mesh load_mesh(const fs::path& path, const std::string& params_path) {
    if (!is_model_file(path)) return read_mesh(path);
    const ArticulatedModel model = read_model(path);
    const AvatarParams params =
        params_path.empty() ? AvatarParams::canonical(model) : read_params(params_path, model);
    return forward(model, params);
}

std::vector<Vec3> load_points(const fs::path& path) {
    if (path.extension() == ".ply") {
        const SplatSet set = read_splats(path);
        std::vector<Vec3> pts;
        pts.reserve(set.size());
        for (const Splat& s : set.splats) pts.push_back(s.position);
        return pts;
    }
    return read_mesh(path).vertices;
}

// Bounding-box center and the largest distance from it.
std::pair<Vec3, double> bounds(const std::vector<Vec3>& pts) {
    if (pts.empty()) return {Vec3::Zero(), 1.0};
    Eigen::AlignedBox3d box;
    for (const Vec3& p : pts) box.extend(p);
    const Vec3 c = box.center();
    double r = 0.0;
    for (const Vec3& p : pts) r = std::max(r, (p - c).norm());
    return {c, std::max(r, 1e-3)};
}

double framing_distance(double extent, double fov_y) { return 1.2 * extent / std::sin(0.5 * fov_y); }

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void add_lambda_flags(CLI::App* cmd, LossWeights& w) {
    cmd->add_option("--lambda-dssim", w.lambda_dssim, "DSSIM share of the photometric term")->capture_default_str();
    cmd->add_option("--lambda-opac", w.lambda_opac, "opacity / entropy weight")->capture_default_str();
    cmd->add_option("--lambda-dist", w.lambda_dist, "point-to-mesh weight")->capture_default_str();
    cmd->add_option("--lambda-edge", w.lambda_edge, "edge-length weight")->capture_default_str();
    cmd->add_option("--lambda-lap", w.lambda_lap, "Laplacian weight")->capture_default_str();
    cmd->add_option("--lambda-offsets", w.lambda_offsets, "offset-norm weight")->capture_default_str();
    cmd->add_option("--lambda-pose", w.lambda_pose, "pose-subset weight")->capture_default_str();
    cmd->add_option("--lambda-scale", w.lambda_scale, "scale regularizer weight")->capture_default_str();
}

PoseSubsetSpec pose_subset(const std::vector<int>& joints) { return PoseSubsetSpec::at_rest(joints); }

// --- make-toy ---------------------------------------------------------------

struct MakeToyArgs {
    std::string out;
    std::string mesh_out;
};

void run_make_toy(const MakeToyArgs& a, const Globals& g) {
    const ArticulatedModel model = make_toy_quadruped(g.seed);
    write_model(a.out, model);
    if (!a.mesh_out.empty()) write_mesh(a.mesh_out, model.template_mesh());
}

// --- bind -------------------------------------------------------------------

struct BindArgs {
    std::string mesh;
    std::string params;
    int per_face = kDefaultSplatsPerFace;
    int sh_degree = 0;
    std::string out;
};

void run_bind(const BindArgs& a, const Globals&) {
    if (a.sh_degree < 0 || a.sh_degree > 3) throw ParameterShapeError("--sh-degree must lie in 0..3");
    const Mesh mesh = load_mesh(a.mesh, a.params);
    const auto bound = seed_bound(mesh, a.per_face);
    write_splats(a.out, realize(bound, mesh, a.sh_degree));
}

// --- synth-views ------------------------------------------------------------

struct SynthArgs {
    std::string input;
    std::string params;
    int views = 100;
    double radius = 0.0;
    int size = 512;
    double fov = 0.8;
    int proxy_per_face = 4;
    std::string out;
};

void run_synth_views(const SynthArgs& a, const Globals& g) {
    SplatSet splats;
    if (fs::path(a.input).extension() == ".ply") {
        splats = read_splats(a.input);
    } else {
        splats = mesh_proxy_splats(load_mesh(a.input, a.params), a.proxy_per_face);
    }
    std::vector<Vec3> pts;
    for (const Splat& s : splats.splats) pts.push_back(s.position);
    const auto [center, extent] = bounds(pts);
    const double radius = a.radius > 0.0 ? a.radius : framing_distance(extent, a.fov);
    const auto rig = sphere_rig(a.views, radius, center, a.size, a.size, a.fov);
    RenderOptions options;
    options.threads = g.threads;
    render_dataset(splats, rig, a.out, options);
}

// --- fit --------------------------------------------------------------------

struct FitArgs {
    std::string model;
    std::string target;
    std::string init;
    std::string out;
    std::string trace;
    FitConfig config;
    std::vector<int> pose_joints;
    std::string gradient = "analytic";
    std::string distance = "squared";
};

void run_fit(FitArgs a, const Globals& g) {
    const ArticulatedModel model = read_model(a.model);
    const std::vector<Vec3> target = load_points(a.target);
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (!target[i].allFinite()) throw NumericError("target point " + std::to_string(i) + " is not finite");
    }
    const AvatarParams init = a.init.empty() ? AvatarParams::canonical(model) : read_params(a.init, model);
    a.config.pose_subset = pose_subset(a.pose_joints);
    a.config.gradient = a.gradient == "fd" ? GradientMode::finite_difference : GradientMode::analytic;
    a.config.distance = a.distance == "euclidean" ? DistanceMode::euclidean : DistanceMode::squared;
    a.config.threads = g.threads;
    const FitResult result = fit(model, init, target, a.config);
    write_params(a.out, result.params);
    if (!a.trace.empty()) {
        std::ofstream csv(a.trace);
        if (!csv) throw IoError("cannot write " + a.trace);
        csv << "iteration,edge,lap,offsets,pose,dist,total\n";
        for (const TraceRow& row : result.trace) {
            const GeoTerms& t = row.terms;
            csv << row.iteration << ',' << fmt(t.edge) << ',' << fmt(t.lap) << ',' << fmt(t.offsets) << ','
                << fmt(t.pose) << ',' << fmt(t.dist) << ',' << fmt(t.total) << '\n';
        }
        if (!csv) throw IoError("failed writing " + a.trace);
    }
}

// --- bake -------------------------------------------------------------------

struct BakeArgs {
    std::string splats;
    std::string mesh;
    std::string params;
    int k = kDefaultBindingFaces;
    std::string out;
};

void run_bake(const BakeArgs& a, const Globals& g) {
    const SplatSet splats = read_splats(a.splats);
    const Mesh mesh = load_mesh(a.mesh, a.params);
    write_binding(a.out, bake(splats, mesh, a.k, g.threads));
}

// --- animate ----------------------------------------------------------------

struct AnimateArgs {
    std::string splats;
    std::string binding;
    std::string model;
    std::string params;
    std::string animation;
    std::string out;
};

void run_animate(const AnimateArgs& a, const Globals& g) {
    if (a.params.empty() == a.animation.empty()) {
        throw ParameterShapeError("give exactly one of --params and --animation");
    }
    const SplatSet splats = read_splats(a.splats);
    const BindingTable table = read_binding(a.binding);
    const ArticulatedModel model = read_model(a.model);
    if (!a.params.empty()) {
        const AvatarParams p = read_params(a.params, model);
        write_splats(a.out, animate(table, splats, forward(model, p), g.threads));
        return;
    }
    const auto frames = read_animation(a.animation, model);
    const auto posed = animate_sequence(table, splats, model, frames, g.threads);
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw IoError("cannot create directory " + a.out + ": " + ec.message());
    for (std::size_t i = 0; i < posed.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03zu.ply", i);
        write_splats(fs::path(a.out) / name, posed[i]);
    }
}

// --- render -----------------------------------------------------------------

struct RenderArgs {
    std::vector<std::string> inputs;
    std::string out;
    std::vector<double> position;
    std::vector<double> target;
    std::vector<double> up{0.0, 1.0, 0.0};
    std::vector<double> background{1.0, 1.0, 1.0};
    double fov = 0.8;
    int width = 512;
    int height = 512;
    int views = 0;
    double radius = 0.0;
};

void run_render(const RenderArgs& a, const Globals& g) {
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw IoError("cannot create directory " + a.out + ": " + ec.message());
    RenderOptions options;
    options.threads = g.threads;
    options.background = Vec3(a.background[0], a.background[1], a.background[2]);
    for (const std::string& input : a.inputs) {
        const SplatSet splats = read_splats(input);
        std::vector<Vec3> pts;
        for (const Splat& s : splats.splats) pts.push_back(s.position);
        const auto [center, extent] = bounds(pts);
        const Vec3 look = a.target.empty() ? center : Vec3(a.target[0], a.target[1], a.target[2]);
        const double dist = a.radius > 0.0 ? a.radius : framing_distance(extent, a.fov);
        const std::string stem = fs::path(input).stem().string();
        if (a.views > 0) {
            const auto rig = sphere_rig(a.views, dist, look, a.width, a.height, a.fov);
            for (std::size_t i = 0; i < rig.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "_view_%03zu.png", i);
                write_png(fs::path(a.out) / (stem + name), render(splats, rig[i], options).color);
            }
            continue;
        }
        Camera cam;
        cam.target = look;
        cam.position = a.position.empty() ? Vec3(look + Vec3(0.0, 0.0, dist))
                                          : Vec3(a.position[0], a.position[1], a.position[2]);
        cam.up = Vec3(a.up[0], a.up[1], a.up[2]);
        cam.fov_y = a.fov;
        cam.width = a.width;
        cam.height = a.height;
        cam.near_plane = std::max(1e-3, 1e-3 * (cam.position - cam.target).norm());
        cam.far_plane = std::max(1000.0, 100.0 * (cam.position - cam.target).norm());
        write_png(fs::path(a.out) / (stem + ".png"), render(splats, cam, options).color);
    }
}

// --- losses -----------------------------------------------------------------

struct LossArgs {
    std::string mesh;
    std::string canonical;
    std::string model;
    std::string params;
    std::string splats;
    std::string points;
    std::string image_a;
    std::string image_b;
    std::vector<int> pose_joints;
    std::string distance = "squared";
    LossWeights weights;
    bool json = false;
};

void run_losses(const LossArgs& a, const Globals& g) {
    a.weights.validate();
    LossTerms t;
    std::optional<Mesh> mesh;
    std::optional<Mesh> canonical;
    if (!a.model.empty()) {
        const ArticulatedModel model = read_model(a.model);
        const AvatarParams p = a.params.empty() ? AvatarParams::canonical(model) : read_params(a.params, model);
        mesh = forward(model, p);
        canonical = forward(model, AvatarParams::canonical(model));
        t.offsets = loss_offsets(p.offsets).value;
        if (!a.pose_joints.empty()) {
            const PoseSubsetSpec spec = pose_subset(a.pose_joints);
            spec.validate(model.num_joints());
            t.pose = loss_pose_subset(p.theta, spec).value;
        }
    } else if (!a.params.empty() || !a.pose_joints.empty()) {
        throw ParameterShapeError("--params and --pose-joints need --model");
    }
    if (!a.mesh.empty()) mesh = read_mesh(a.mesh);
    if (!a.canonical.empty()) canonical = read_mesh(a.canonical);
    if (mesh) {
        t.lap = loss_laplacian(*mesh).value;
        if (canonical) t.edge = loss_edge(*mesh, *canonical).value;
    }

    std::vector<Vec3> points;
    if (!a.splats.empty()) {
        const SplatSet splats = read_splats(a.splats);
        std::vector<double> opacity;
        std::vector<Vec3> scales;
        for (const Splat& s : splats.splats) {
            opacity.push_back(s.opacity());
            scales.push_back(s.scale());
            points.push_back(s.position);
        }
        if (!splats.empty()) {
            t.opac = loss_opacity(opacity).value;
            t.ent = loss_entropy(opacity).value;
            t.scale = loss_scale(scales).value;
        }
    }
    if (!a.points.empty()) points = load_points(a.points);
    if (mesh && !points.empty()) {
        const DistanceMode mode = a.distance == "euclidean" ? DistanceMode::euclidean : DistanceMode::squared;
        t.dist = loss_point_to_mesh(points, *mesh, mode, {}, g.threads).value;
    }
    if (!a.image_a.empty() || !a.image_b.empty()) {
        if (a.image_a.empty() || a.image_b.empty()) throw ParameterShapeError("--image-a needs --image-b");
        t.rgb = loss_rgb(read_png(a.image_a), read_png(a.image_b), a.weights.lambda_dssim);
    }

    const double bound = total_bound(t, a.weights);
    const double unbound = total_unbound(t, a.weights);
    const LossWeights& w = a.weights;
    if (a.json) {
        nlohmann::json doc;
        doc["terms"] = {{"rgb", t.rgb},     {"edge", t.edge},   {"lap", t.lap},
                        {"offsets", t.offsets}, {"pose", t.pose}, {"opac", t.opac},
                        {"dist", t.dist},   {"scale", t.scale}, {"ent", t.ent}};
        doc["weights"] = {{"lambda_dssim", w.lambda_dssim}, {"lambda_opac", w.lambda_opac},
                          {"lambda_dist", w.lambda_dist},   {"lambda_edge", w.lambda_edge},
                          {"lambda_lap", w.lambda_lap},     {"lambda_offsets", w.lambda_offsets},
                          {"lambda_pose", w.lambda_pose},   {"lambda_scale", w.lambda_scale}};
        doc["total_bound"] = bound;
        doc["total_unbound"] = unbound;
        std::cout << doc.dump(2) << '\n';
        return;
    }
    std::printf("%-10s %24s\n", "term", "value");
    const std::vector<std::pair<const char*, double>> rows{
        {"rgb", t.rgb},   {"edge", t.edge},   {"lap", t.lap},     {"offsets", t.offsets}, {"pose", t.pose},
        {"opac", t.opac}, {"dist", t.dist},   {"scale", t.scale}, {"ent", t.ent}};
    for (const auto& [name, v] : rows) std::printf("%-10s %24s\n", name, fmt(v).c_str());
    std::printf("\n%-16s %s\n", "lambda_dssim", fmt(w.lambda_dssim).c_str());
    std::printf("%-16s %s\n", "lambda_opac", fmt(w.lambda_opac).c_str());
    std::printf("%-16s %s\n", "lambda_dist", fmt(w.lambda_dist).c_str());
    std::printf("%-16s %s\n", "lambda_edge", fmt(w.lambda_edge).c_str());
    std::printf("%-16s %s\n", "lambda_lap", fmt(w.lambda_lap).c_str());
    std::printf("%-16s %s\n", "lambda_offsets", fmt(w.lambda_offsets).c_str());
    std::printf("%-16s %s\n", "lambda_pose", fmt(w.lambda_pose).c_str());
    std::printf("%-16s %s\n", "lambda_scale", fmt(w.lambda_scale).c_str());
    std::printf("\n%-16s %s\n", "total_bound", fmt(bound).c_str());
    std::printf("%-16s %s\n", "total_unbound", fmt(unbound).c_str());
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian splat avatars on articulated meshes"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "seed for generated fixtures")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads, 0 = all cores")->capture_default_str();

    const std::string mesh_formats = "Meshes: .obj (triangles) or a .json model posed by --params.";
    const std::string splat_formats = "Splats: binary little-endian .ply with 3DGS property names.";

    MakeToyArgs toy;
    auto* make_toy = app.add_subcommand("make-toy", "write the procedural quadruped model");
    make_toy->add_option("-o,--out", toy.out, "model .json")->required();
    make_toy->add_option("--mesh", toy.mesh_out, "also write the template mesh as .obj");
    make_toy->footer("Model JSON keys: vertices, faces, parents, regressor, weights, shape_basis.");
    make_toy->callback([&] { run_make_toy(toy, g); });

    BindArgs bind_args;
    auto* bind = app.add_subcommand("bind", "seed face-bound splats on a mesh");
    bind->add_option("mesh", bind_args.mesh, "mesh .obj or model .json")->required();
    bind->add_option("--params", bind_args.params, "params .json when the mesh is a model");
    bind->add_option("--per-face", bind_args.per_face, "splats per face")->capture_default_str();
    bind->add_option("--sh-degree", bind_args.sh_degree, "spherical harmonic degree 0..3")->capture_default_str();
    bind->add_option("-o,--out", bind_args.out, "splat .ply")->required();
    bind->footer(mesh_formats + "\n" + splat_formats);
    bind->callback([&] { run_bind(bind_args, g); });

    SynthArgs synth;
    auto* synth_views = app.add_subcommand("synth-views", "render a multi-view dataset on a sphere of cameras");
    synth_views->add_option("input", synth.input, "splat .ply, mesh .obj or model .json")->required();
    synth_views->add_option("--params", synth.params, "params .json when the input is a model");
    synth_views->add_option("--views", synth.views, "number of cameras")->capture_default_str();
    synth_views->add_option("--radius", synth.radius, "camera distance, 0 = fit the object")->capture_default_str();
    synth_views->add_option("--size", synth.size, "square image size in pixels")->capture_default_str();
    synth_views->add_option("--fov", synth.fov, "vertical field of view, radians")->capture_default_str();
    synth_views->add_option("--proxy-per-face", synth.proxy_per_face, "surfels per face for mesh input")
        ->capture_default_str();
    synth_views->add_option("-o,--out", synth.out, "output directory")->required();
    synth_views->footer(mesh_formats + "\n" + splat_formats +
                        "\nWrites view_NNN.png and cameras.json (file, position, target, up, fov_y, width, "
                        "height, near, far).");
    synth_views->callback([&] { run_synth_views(synth, g); });

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "fit model parameters to a target point cloud");
    fit_cmd->add_option("model", fit_args.model, "model .json")->required();
    fit_cmd->add_option("target", fit_args.target, "target splat .ply or .obj (vertices used)")->required();
    fit_cmd->add_option("--init", fit_args.init, "initial params .json, default canonical");
    fit_cmd->add_option("-o,--out", fit_args.out, "fitted params .json")->required();
    fit_cmd->add_option("--trace", fit_args.trace, "loss trace .csv");
    fit_cmd->add_option("--iterations", fit_args.config.iterations, "gradient steps")->capture_default_str();
    fit_cmd->add_option("--step-beta", fit_args.config.step_beta)->capture_default_str();
    fit_cmd->add_option("--step-theta", fit_args.config.step_theta)->capture_default_str();
    fit_cmd->add_option("--step-trans", fit_args.config.step_trans)->capture_default_str();
    fit_cmd->add_option("--step-offsets", fit_args.config.step_offsets)->capture_default_str();
    fit_cmd->add_option("--tolerance", fit_args.config.tolerance, "stop when the loss changes less")
        ->capture_default_str();
    fit_cmd->add_option("--pose-joints", fit_args.pose_joints, "joints pulled toward the rest pose");
    fit_cmd->add_option("--gradient", fit_args.gradient, "analytic or fd")
        ->check(CLI::IsMember({"analytic", "fd"}))
        ->capture_default_str();
    fit_cmd->add_option("--distance", fit_args.distance, "squared or euclidean point-to-mesh distance")
        ->check(CLI::IsMember({"squared", "euclidean"}))
        ->capture_default_str();
    add_lambda_flags(fit_cmd, fit_args.config.weights);
    fit_cmd->footer("Params JSON: {\"beta\", \"theta\", \"trans\", \"offsets\"}. Trace CSV columns: "
                    "iteration,edge,lap,offsets,pose,dist,total.");
    fit_cmd->callback([&] { run_fit(fit_args, g); });

    BakeArgs bake_args;
    auto* bake_cmd = app.add_subcommand("bake", "bind splats to their nearest mesh faces");
    bake_cmd->add_option("splats", bake_args.splats, "splat .ply")->required();
    bake_cmd->add_option("mesh", bake_args.mesh, "reference mesh .obj or model .json")->required();
    bake_cmd->add_option("--params", bake_args.params, "params .json when the mesh is a model");
    bake_cmd->add_option("--k", bake_args.k, "faces per splat")->capture_default_str();
    bake_cmd->add_option("-o,--out", bake_args.out, "binding file")->required();
    bake_cmd->footer(mesh_formats + "\nBinding file: GSBIND1 binary, see README.");
    bake_cmd->callback([&] { run_bake(bake_args, g); });

    AnimateArgs anim;
    auto* animate_cmd = app.add_subcommand("animate", "move baked splats to new model poses");
    animate_cmd->add_option("splats", anim.splats, "splat .ply used at bake time")->required();
    animate_cmd->add_option("binding", anim.binding, "binding file")->required();
    animate_cmd->add_option("model", anim.model, "model .json")->required();
    animate_cmd->add_option("--params", anim.params, "single params .json; -o is a .ply");
    animate_cmd->add_option("--animation", anim.animation, "{\"frames\": [...]} .json; -o is a directory");
    animate_cmd->add_option("-o,--out", anim.out, "output .ply or directory")->required();
    animate_cmd->footer(splat_formats + "\nSequences write frame_NNN.ply.");
    animate_cmd->callback([&] { run_animate(anim, g); });

    RenderArgs ren;
    auto* render_cmd = app.add_subcommand("render", "rasterize splat files to PNG");
    render_cmd->add_option("inputs", ren.inputs, "splat .ply files")->required();
    render_cmd->add_option("-o,--out", ren.out, "output directory")->required();
    render_cmd->add_option("--position", ren.position, "camera position x y z")->expected(3);
    render_cmd->add_option("--target", ren.target, "look-at point x y z")->expected(3);
    render_cmd->add_option("--up", ren.up, "up hint x y z")->expected(3)->capture_default_str();
    render_cmd->add_option("--background", ren.background, "background r g b")->expected(3)->capture_default_str();
    render_cmd->add_option("--fov", ren.fov, "vertical field of view, radians")->capture_default_str();
    render_cmd->add_option("--width", ren.width)->capture_default_str();
    render_cmd->add_option("--height", ren.height)->capture_default_str();
    render_cmd->add_option("--views", ren.views, "render a sphere of N cameras instead of one")
        ->capture_default_str();
    render_cmd->add_option("--radius", ren.radius, "camera distance, 0 = fit the object")->capture_default_str();
    render_cmd->footer(splat_formats + "\nWrites <stem>.png, or <stem>_view_NNN.png with --views.");
    render_cmd->callback([&] { run_render(ren, g); });

    LossArgs loss;
    auto* losses = app.add_subcommand("losses", "report regularizer terms and weighted totals");
    losses->add_option("--mesh", loss.mesh, "mesh .obj for edge, Laplacian and distance terms");
    losses->add_option("--canonical", loss.canonical, "reference .obj for the edge term");
    losses->add_option("--model", loss.model, "model .json; posed mesh, offsets and pose terms");
    losses->add_option("--params", loss.params, "params .json for --model");
    losses->add_option("--pose-joints", loss.pose_joints, "joints of the pose-subset term");
    losses->add_option("--splats", loss.splats, "splat .ply for opacity, entropy, scale and distance terms");
    losses->add_option("--points", loss.points, "distance-term points (.ply or .obj), overrides --splats");
    losses->add_option("--image-a", loss.image_a, "rendered PNG");
    losses->add_option("--image-b", loss.image_b, "reference PNG");
    losses->add_option("--distance", loss.distance)->check(CLI::IsMember({"squared", "euclidean"}))->capture_default_str();
    losses->add_flag("--json", loss.json, "print JSON instead of a table");
    add_lambda_flags(losses, loss.weights);
    losses->footer("Terms without inputs are reported as 0.");
    losses->callback([&] { run_losses(loss, g); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const FormatError& e) {
        std::cerr << "petsplat: format error: " << one_line(e.what()) << '\n';
        return kExitFormat;
    } catch (const IoError& e) {
        std::cerr << "petsplat: io error: " << one_line(e.what()) << '\n';
        return kExitFormat;
    } catch (const NumericError& e) {
        std::cerr << "petsplat: numeric error: " << one_line(e.what()) << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "petsplat: error: " << one_line(e.what()) << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "petsplat: " << one_line(e.what()) << '\n';
        return kExitOther;
    }
    return 0;
}
