#pragma once

#include <filesystem>
#include <vector>

#include "petsplat/geometry.hpp"
#include "petsplat/image.hpp"
#include "petsplat/model.hpp"
#include "petsplat/skinning.hpp"
#include "petsplat/splats.hpp"

namespace petsplat {

// Binary little-endian PLY with the usual splatting property names
// (x y z [nx ny nz] f_dc_0..2 [f_rest_*] opacity scale_0..2 rot_0..3, all
// float). Properties are matched by name, so any order is accepted. Opacity
// and scales stay in logit/log form; quaternions (w x y z) are normalized.
SplatSet read_splats(const std::filesystem::path& path);
void write_splats(const std::filesystem::path& path, const SplatSet& splats);

// OBJ subset: `v x y z` and triangular `f a b c` lines (1-based, negative
// indices relative, `a/b/c` slash forms accepted). Other statements are ignored.
Mesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const Mesh& mesh);

// JSON model document with keys vertices, faces, parents, regressor,
// weights, shape_basis (one vertices-shaped displacement field per shape
// coefficient). The result is validated.
ArticulatedModel read_model(const std::filesystem::path& path);
void write_model(const std::filesystem::path& path, const ArticulatedModel& model);

// A single parameter set: {"beta": [...], "theta": [...], "trans": [x, y, z],
// "offsets": [[x, y, z], ...]} with offsets optional (zeros).
AvatarParams read_params(const std::filesystem::path& path, const ArticulatedModel& model);
void write_params(const std::filesystem::path& path, const AvatarParams& params);

// {"frames": [params, ...]}; errors name the offending frame index.
std::vector<AvatarParams> read_animation(const std::filesystem::path& path, const ArticulatedModel& model);
void write_animation(const std::filesystem::path& path, const std::vector<AvatarParams>& frames);

// GSBIND1 binary binding table (see README for the record layout). Values
// are stored as f32; the reader checks invariants at f32 tolerance.
BindingTable read_binding(const std::filesystem::path& path);
void write_binding(const std::filesystem::path& path, const BindingTable& table);

// 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

}  // namespace petsplat
