#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "b3d/bundle.hpp"
#include "b3d/camera_rig.hpp"
#include "b3d/geometry.hpp"

namespace b3d {

struct MeshInit {
  enum class Kind { kSphere, kCoarse };

  Kind kind = Kind::kSphere;
  int sphere_subdivisions = 4;
  // Coarse init reads `coarse_mesh` when set, otherwise `coarse_path`.
  std::filesystem::path coarse_path;
  std::optional<Mesh> coarse_mesh;

  static MeshInit sphere(int subdivisions = 4) {
    return {Kind::kSphere, subdivisions, {}, std::nullopt};
  }
  static MeshInit coarse(std::filesystem::path path) {
    return {Kind::kCoarse, 4, std::move(path), std::nullopt};
  }
  static MeshInit coarse(Mesh mesh) {
    return {Kind::kCoarse, 4, {}, std::move(mesh)};
  }
};

struct ReconConfig {
  int steps = 50;
  double normal_step_size = 0.05;
  double silhouette_step_size = 0.02;
  double laplacian_weight = 0.3;
  int remesh_interval = 10;
  double target_edge_length = 0.02;
  MeshInit init;
};

void validate(const ReconConfig& config);

inline constexpr double kSphereInitRadius = 0.85;
inline constexpr int kTraceInterval = 10;
// Every step keeps vertices inside this cube.
inline constexpr double kReconBound = 1.05;

struct Checkpoint {
  int step = 0;
  double residual_deg = 0.0;  // mean angular normal residual, covered pixels
  std::vector<double> iou;    // silhouette IoU per view
  int vertices = 0;
  int euler = 0;              // V - E + F
};

struct RefineTrace {
  std::vector<Checkpoint> checkpoints;

  // One JSON object per line.
  std::string to_jsonl() const;
};

// Per-view supervision decoded from a bundle: world-space target normals,
// foreground masks and cameras sized to the tiles.
struct ReconTargets {
  int size = 0;
  std::vector<Camera> cameras;
  std::vector<MaskPlane> masks;
  std::vector<DistancePlane> silhouette;  // signed pixel distance, positive outside
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>> normals;
};

ReconTargets make_targets(const BundleImage& bundle, const std::vector<Camera>& rig);

Mesh init_mesh(const ReconConfig& config, const BundleImage& bundle);

struct ResidualStats {
  double residual_deg = 0.0;
  std::vector<double> iou;
};

// Renders the mesh in every view and compares against the targets.
ResidualStats measure_residual(const Mesh& mesh, const ReconTargets& targets);

// One explicit update pass:
//   1. rasterize each view and find visible vertices,
//   2. sample target normal and mask at each visible vertex, weighted by
//      max(0, -n.view_dir), and average over views into a world target,
//   3. normal alignment: an implicit step pulling every edge towards the
//      plane of the mean target normal of its endpoints,
//   4. silhouette: shrink vertices landing on target background, grow
//      grazing vertices next to target foreground the render misses; the
//      move is capped by the distance to the target silhouette,
//   5. one uniform Laplacian smoothing pass, then fresh normals.
Mesh refine_step(const Mesh& mesh, const ReconTargets& targets, const ReconConfig& config);
Mesh refine_step(const Mesh& mesh, const BundleImage& bundle,
                 const std::vector<Camera>& rig, const ReconConfig& config);

struct ReconResult {
  Mesh mesh;
  RefineTrace trace;
};

ReconResult reconstruct(const BundleImage& bundle, const ReconConfig& config);

}  // namespace b3d
