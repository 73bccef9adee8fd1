#include "petsplat/renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "json.hpp"

#include "petsplat/binding.hpp"
#include "petsplat/errors.hpp"
#include "petsplat/face_frames.hpp"
#include "petsplat/io.hpp"
#include "petsplat/parallel.hpp"

namespace petsplat {

void Camera::validate() const {
    if (!(fov_y > 0.0 && fov_y < std::numbers::pi)) throw ParameterShapeError("fov must lie in (0, pi)");
    if (width <= 0 || height <= 0) throw ParameterShapeError("image size must be positive");
    if (!(near_plane > 0.0 && near_plane < far_plane)) throw ParameterShapeError("need 0 < near < far");
    if (!position.allFinite() || !target.allFinite() || !up.allFinite()) {
        throw ParameterShapeError("camera vectors must be finite");
    }
    const Vec3 forward = target - position;
    if (forward.norm() <= 0.0) throw ParameterShapeError("camera target coincides with its position");
    if (forward.normalized().cross(up).norm() < 1e-9) {
        throw ParameterShapeError("camera up hint is parallel to the view direction");
    }
}

Mat3 Camera::world_to_camera() const {
    const Vec3 forward = (target - position).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Mat3 w;
    w.row(0) = right.transpose();
    w.row(1) = down.transpose();
    w.row(2) = forward.transpose();
    return w;
}

double Camera::focal() const { return 0.5 * static_cast<double>(height) / std::tan(0.5 * fov_y); }

Eigen::Vector3d Camera::project(const Vec3& world) const {
    const Vec3 c = world_to_camera() * (world - position);
    const double f = focal();
    return {f * c.x() / c.z() + 0.5 * width, f * c.y() / c.z() + 0.5 * height, c.z()};
}

namespace {

constexpr double kShC1 = 0.4886025119029199;
constexpr std::array<double, 5> kShC2{1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                      -1.0925484305920792, 0.5462742152960396};
constexpr std::array<double, 7> kShC3{-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                      0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                                      -0.5900435899266435};

Vec3 eval_color(const Splat& s, int degree, const Vec3& dir) {
    Vec3 rgb = kShC0 * s.sh_dc;
    if (degree > 0) {
        const std::size_t per_channel = sh_rest_count(degree) / 3;
        auto coeff = [&](std::size_t k) {
            return Vec3(s.sh_rest[k - 1], s.sh_rest[per_channel + k - 1], s.sh_rest[2 * per_channel + k - 1]);
        };
        const double x = dir.x(), y = dir.y(), z = dir.z();
        rgb += -kShC1 * y * coeff(1) + kShC1 * z * coeff(2) - kShC1 * x * coeff(3);
        if (degree > 1) {
            const double xx = x * x, yy = y * y, zz = z * z, xy = x * y, yz = y * z, xz = x * z;
            rgb += kShC2[0] * xy * coeff(4) + kShC2[1] * yz * coeff(5) +
                   kShC2[2] * (2.0 * zz - xx - yy) * coeff(6) + kShC2[3] * xz * coeff(7) +
                   kShC2[4] * (xx - yy) * coeff(8);
            if (degree > 2) {
                rgb += kShC3[0] * y * (3.0 * xx - yy) * coeff(9) + kShC3[1] * xy * z * coeff(10) +
                       kShC3[2] * y * (4.0 * zz - xx - yy) * coeff(11) +
                       kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * coeff(12) +
                       kShC3[4] * x * (4.0 * zz - xx - yy) * coeff(13) + kShC3[5] * z * (xx - yy) * coeff(14) +
                       kShC3[6] * x * (xx - 3.0 * yy) * coeff(15);
            }
        }
    }
    return (rgb.array() + 0.5).cwiseMax(0.0).cwiseMin(1.0);
}

struct Projected {
    std::uint32_t index = 0;
    double depth = 0.0;
    Eigen::Vector2d center;
    // Inverse 2D covariance (a, b, c) for [[a, b], [b, c]].
    Eigen::Vector3d conic;
    double opacity = 0.0;
    Vec3 color;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
    bool visible = false;
};

Projected project_splat(const Splat& s, std::uint32_t index, int degree, const Camera& cam, const Mat3& w,
                        double f) {
    Projected out;
    out.index = index;
    const Vec3 c = w * (s.position - cam.position);
    if (!(c.z() > cam.near_plane) || c.z() > cam.far_plane) return out;

    const Mat3 r = s.rotation_matrix();
    const Vec3 sc = s.scale();
    const Mat3 sigma = r * sc.cwiseProduct(sc).asDiagonal() * r.transpose();
    const Mat3 sigma_cam = w * sigma * w.transpose();
    Eigen::Matrix<double, 2, 3> jac;
    const double iz = 1.0 / c.z();
    jac << f * iz, 0.0, -f * c.x() * iz * iz,
           0.0, f * iz, -f * c.y() * iz * iz;
    Eigen::Matrix2d cov = jac * sigma_cam * jac.transpose();
    cov(0, 0) += kCovarianceDilation;
    cov(1, 1) += kCovarianceDilation;
    const double det = cov.determinant();
    if (!(det > 0.0)) return out;

    out.conic = Eigen::Vector3d(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);
    out.center = Eigen::Vector2d(f * c.x() * iz + 0.5 * cam.width, f * c.y() * iz + 0.5 * cam.height);
    out.depth = c.z();
    const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    const double radius = 3.0 * std::sqrt(lambda_max);
    // Pixels whose centers (i + 0.5) fall inside the 3-sigma box.
    if (!std::isfinite(radius) || !out.center.allFinite()) return out;
    const double wd = cam.width, hd = cam.height;
    auto pixel = [](double v, double hi) { return static_cast<int>(std::clamp(v, -1.0, hi)); };
    out.x0 = std::max(0, pixel(std::ceil(out.center.x() - radius - 0.5), wd));
    out.x1 = std::min(cam.width - 1, pixel(std::floor(out.center.x() + radius - 0.5), wd));
    out.y0 = std::max(0, pixel(std::ceil(out.center.y() - radius - 0.5), hd));
    out.y1 = std::min(cam.height - 1, pixel(std::floor(out.center.y() + radius - 0.5), hd));
    if (out.x0 > out.x1 || out.y0 > out.y1) return out;

    out.opacity = s.opacity();
    out.color = eval_color(s, degree, (s.position - cam.position).normalized());
    out.visible = out.opacity > 0.0;
    return out;
}

}  // namespace

RenderTarget render(const SplatSet& splats, const Camera& camera, const RenderOptions& options) {
    camera.validate();
    const int width = camera.width;
    const int height = camera.height;
    const Mat3 w = camera.world_to_camera();
    const double f = camera.focal();

    std::vector<Projected> projected(splats.size());
    parallel_for(splats.size(), options.threads, [&](std::size_t i) {
        projected[i] = project_splat(splats.splats[i], static_cast<std::uint32_t>(i), splats.sh_degree, camera, w, f);
    });

    std::vector<std::uint32_t> order;
    order.reserve(projected.size());
    for (const Projected& p : projected) {
        if (p.visible) order.push_back(p.index);
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double da = projected[a].depth;
        const double db = projected[b].depth;
        return da < db || (da == db && a < b);
    });

    const int tiles_x = (width + kTileSize - 1) / kTileSize;
    const int tiles_y = (height + kTileSize - 1) / kTileSize;
    std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x * tiles_y));
    for (std::uint32_t idx : order) {
        const Projected& p = projected[idx];
        for (int ty = p.y0 / kTileSize; ty <= p.y1 / kTileSize; ++ty) {
            for (int tx = p.x0 / kTileSize; tx <= p.x1 / kTileSize; ++tx) {
                bins[static_cast<std::size_t>(ty * tiles_x + tx)].push_back(idx);
            }
        }
    }

    RenderTarget out;
    out.color = Image(width, height);
    out.alpha.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0);
    parallel_for(bins.size(), options.threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % tiles_x;
        const int ty = static_cast<int>(tile) / tiles_x;
        const auto& list = bins[tile];
        for (int py = ty * kTileSize; py < std::min(height, (ty + 1) * kTileSize); ++py) {
            for (int px = tx * kTileSize; px < std::min(width, (tx + 1) * kTileSize); ++px) {
                const Eigen::Vector2d pixel(px + 0.5, py + 0.5);
                double transmittance = 1.0;
                Vec3 rgb = Vec3::Zero();
                for (std::uint32_t idx : list) {
                    const Projected& p = projected[idx];
                    if (px < p.x0 || px > p.x1 || py < p.y0 || py > p.y1) continue;
                    const Eigen::Vector2d d = pixel - p.center;
                    const double maha = p.conic.x() * d.x() * d.x() + 2.0 * p.conic.y() * d.x() * d.y() +
                                        p.conic.z() * d.y() * d.y();
                    if (maha > 9.0) continue;
                    const double a = std::min(1.0, p.opacity * std::exp(-0.5 * maha));
                    if (a <= 0.0) continue;
                    rgb += (a * transmittance) * p.color;
                    transmittance *= 1.0 - a;
                    if (transmittance < kMinTransmittance) break;
                }
                rgb += transmittance * options.background;
                for (int c = 0; c < 3; ++c) out.color.at(px, py, c) = std::clamp(rgb[c], 0.0, 1.0);
                out.alpha[static_cast<std::size_t>(py) * static_cast<std::size_t>(width) + static_cast<std::size_t>(px)] =
                    1.0 - transmittance;
            }
        }
    });
    return out;
}

std::vector<Camera> sphere_rig(int count, double radius, const Vec3& center, int width, int height, double fov_y) {
    if (count < 1) throw ParameterShapeError("rig needs at least one camera");
    if (!(radius > 0.0)) throw ParameterShapeError("rig radius must be positive");
    // Fibonacci lattice with both poles pinned; interior rows are shifted by
    // kOffset rows away from the poles, which widens the polar gaps.
    constexpr double kOffset = 2.5;
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Camera> rig;
    rig.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        double z;
        if (i == 0) {
            z = 1.0;
        } else if (i == count - 1) {
            z = -1.0;
        } else {
            z = 1.0 - 2.0 * (i + kOffset) / (count - 1 + 2.0 * kOffset);
        }
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * i;
        const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
        Camera cam;
        cam.position = center + radius * dir;
        cam.target = center;
        cam.up = std::abs(dir.y()) > 0.999 ? Vec3(0.0, 0.0, 1.0) : Vec3(0.0, 1.0, 0.0);
        cam.fov_y = fov_y;
        cam.width = width;
        cam.height = height;
        cam.near_plane = std::max(1e-3, radius * 1e-3);
        cam.far_plane = radius * 100.0;
        rig.push_back(cam);
    }
    return rig;
}

std::vector<DatasetView> render_dataset(const SplatSet& splats, const std::vector<Camera>& rig,
                                        const std::filesystem::path& out_dir, const RenderOptions& options) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory " + out_dir.string() + ": " + ec.message());
    std::vector<DatasetView> views;
    views.reserve(rig.size());
    for (std::size_t i = 0; i < rig.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "view_%03zu.png", i);
        const RenderTarget target = render(splats, rig[i], options);
        write_png(out_dir / name, target.color);
        views.push_back({name, rig[i]});
    }
    write_camera_manifest(out_dir / "cameras.json", views);
    return views;
}

SplatSet mesh_proxy_splats(const Mesh& mesh, int splats_per_face) {
    auto bound = seed_bound(mesh, splats_per_face);
    // Spread extra splats toward the corners instead of stacking them.
    for (std::size_t i = 0; i < bound.size(); ++i) {
        const int k = static_cast<int>(i % static_cast<std::size_t>(splats_per_face));
        if (k > 0) bound[i].bary_logits[static_cast<std::size_t>((k - 1) % 3)] = 1.0;
    }
    SplatSet set = realize(bound, mesh);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Face& face = mesh.faces[bound[i].face];
        const Vec3 n = (mesh.vertices[face[1]] - mesh.vertices[face[0]])
                           .cross(mesh.vertices[face[2]] - mesh.vertices[face[0]])
                           .normalized();
        set.splats[i].set_base_color(0.5 * (n.array() + 1.0));
        set.splats[i].set_opacity(0.99);
    }
    return set;
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const nlohmann::json& j, const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw FormatError(std::string("manifest field ") + key + " must be a 3-vector");
    Vec3 v(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    if (!v.allFinite()) throw FormatError(std::string("manifest field ") + key + " is not finite");
    return v;
}

}  // namespace

void write_camera_manifest(const std::filesystem::path& path, const std::vector<DatasetView>& views) {
    nlohmann::json doc;
    doc["views"] = nlohmann::json::array();
    for (const auto& v : views) {
        doc["views"].push_back({{"file", v.file},
                                {"position", vec_json(v.camera.position)},
                                {"target", vec_json(v.camera.target)},
                                {"up", vec_json(v.camera.up)},
                                {"fov_y", v.camera.fov_y},
                                {"width", v.camera.width},
                                {"height", v.camera.height},
                                {"near", v.camera.near_plane},
                                {"far", v.camera.far_plane}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<DatasetView> read_camera_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<DatasetView> views;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& v : doc.at("views")) {
            DatasetView view;
            view.file = v.at("file").get<std::string>();
            view.camera.position = json_vec(v, "position");
            view.camera.target = json_vec(v, "target");
            view.camera.up = json_vec(v, "up");
            view.camera.fov_y = v.at("fov_y").get<double>();
            view.camera.width = v.at("width").get<int>();
            view.camera.height = v.at("height").get<int>();
            view.camera.near_plane = v.at("near").get<double>();
            view.camera.far_plane = v.at("far").get<double>();
            view.camera.validate();
            views.push_back(std::move(view));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const ParameterShapeError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return views;
}

}  // namespace petsplat
