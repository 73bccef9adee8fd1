#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "petsplat/geometry.hpp"
#include "petsplat/image.hpp"
#include "petsplat/splats.hpp"

namespace petsplat {

// Pinhole camera looking from `position` at `target`. Image x grows right,
// image y grows down; pixel (i, j) covers [i, i+1) x [j, j+1).
struct Camera {
    Vec3 position = Vec3(0.0, 0.0, 1.0);
    Vec3 target = Vec3::Zero();
    Vec3 up = Vec3(0.0, 1.0, 0.0);
    double fov_y = 0.8;
    int width = 512;
    int height = 512;
    double near_plane = 0.01;
    double far_plane = 1000.0;

    // Throws ParameterShapeError on invalid intrinsics or a degenerate basis.
    void validate() const;

    // Rows are the camera right, down and forward axes in world coordinates.
    Mat3 world_to_camera() const;
    double focal() const;
    // Continuous pixel coordinates and view depth of a world point.
    Eigen::Vector3d project(const Vec3& world) const;

    bool operator==(const Camera&) const = default;
};

struct RenderTarget {
    Image color;
    std::vector<double> alpha;
};

struct RenderOptions {
    Vec3 background = Vec3::Ones();
    unsigned threads = 0;
};

inline constexpr int kTileSize = 16;
inline constexpr double kMinTransmittance = 1e-4;
// Screen-space low-pass added to every projected covariance, in pixels^2.
inline constexpr double kCovarianceDilation = 0.3;

RenderTarget render(const SplatSet& splats, const Camera& camera, const RenderOptions& options = {});

// `count` cameras on a Fibonacci sphere around `center`, all looking at it.
// The first camera sits on +z; with two or more cameras the last sits on -z.
std::vector<Camera> sphere_rig(int count, double radius, const Vec3& center, int width, int height,
                               double fov_y);

struct DatasetView {
    std::string file;
    Camera camera;
};

// Renders every camera to <out_dir>/view_NNN.png and writes cameras.json.
std::vector<DatasetView> render_dataset(const SplatSet& splats, const std::vector<Camera>& rig,
                                        const std::filesystem::path& out_dir, const RenderOptions& options = {});

// Opaque surfels covering every face, colored by face normal; used to
// render a bare mesh.
SplatSet mesh_proxy_splats(const Mesh& mesh, int splats_per_face = 1);

void write_camera_manifest(const std::filesystem::path& path, const std::vector<DatasetView>& views);
std::vector<DatasetView> read_camera_manifest(const std::filesystem::path& path);

}  // namespace petsplat
