#pragma once

#include <filesystem>
#include <optional>

#include "b3d/bundle.hpp"
#include "b3d/camera_rig.hpp"
#include "b3d/geometry.hpp"

namespace b3d {

struct TextureConfig {
  double cosine_power = 4.0;
  double min_weight = 1e-3;
  Vec3d fallback_color = Vec3d::Constant(0.8);
  // Long edges are split down to this length first; nullopt keeps the mesh.
  std::optional<double> pre_subdivide_to_edge_length = 0.01;
};

void validate(const TextureConfig& config);

inline constexpr int kColorDiffusionIterations = 10;

// Per-vertex colors from the bundle's RGB tiles. Each view contributes
//   w = visible * max(0, -n.view_dir)^p * mask coverage
// with a mask-weighted bilinear sample. Views are summed in ascending
// azimuth so the result does not depend on tile order. Vertices whose total
// weight stays below min_weight take the average of colored neighbors
// (repeated up to kColorDiffusionIterations times), else the fallback.
Mesh project_colors(const Mesh& mesh, const BundleImage& bundle, const CameraRigSpec& rig,
                    const TextureConfig& config = {});

// Writes a binary glTF with COLOR_0.
void bake_and_export(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace b3d
