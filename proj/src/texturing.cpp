#include "b3d/texturing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "b3d/mesh_io.hpp"
#include "b3d/raster.hpp"

namespace b3d {
namespace {

struct ColorSample {
  Vec3d rgb = Vec3d::Zero();
  double coverage = 0.0;
};

// Bilinear over pixel centers, clamped at the tile border; background
// pixels drop out and their share becomes missing coverage.
ColorSample sample_tile(const ImagePlane& tile, const MaskPlane& mask, double u, double v) {
  const double fx = u - 0.5, fy = v - 0.5;
  const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0, ay = fy - y0;
  ColorSample s;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int x = std::clamp(x0 + dx, 0, tile.width - 1);
      const int y = std::clamp(y0 + dy, 0, tile.height - 1);
      if (!mask(y, x)) continue;
      const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
      for (int c = 0; c < 3; ++c) s.rgb[c] += w * tile.at(x, y, c) / 255.0;
      s.coverage += w;
    }
  }
  if (s.coverage > 0.0) s.rgb /= s.coverage;
  return s;
}

double wrap_degrees(double a) {
  const double r = std::fmod(a, 360.0);
  return r < 0.0 ? r + 360.0 : r;
}

}  // namespace

void validate(const TextureConfig& config) {
  require(config.cosine_power > 0.0 && std::isfinite(config.cosine_power),
          ErrorKind::kInvalidArgument, "cosine power must be positive");
  require(config.min_weight >= 0.0, ErrorKind::kInvalidArgument,
          "minimum weight must be non-negative");
  require((config.fallback_color.array() >= 0.0).all() &&
              (config.fallback_color.array() <= 1.0).all(),
          ErrorKind::kInvalidArgument, "fallback color must lie in [0, 1]");
  require(!config.pre_subdivide_to_edge_length || *config.pre_subdivide_to_edge_length > 0.0,
          ErrorKind::kInvalidArgument, "pre-subdivision edge length must be positive");
}

Mesh project_colors(const Mesh& mesh_in, const BundleImage& bundle, const CameraRigSpec& rig,
                    const TextureConfig& config) {
  validate(config);
  validate(bundle);
  validate(mesh_in);
  require(static_cast<int>(rig.azimuths_deg.size()) == bundle.view_count(),
          ErrorKind::kInvalidArgument, "rig and bundle disagree on the number of views");

  Mesh mesh = config.pre_subdivide_to_edge_length
                  ? split_long_edges(mesh_in, *config.pre_subdivide_to_edge_length)
                  : mesh_in;
  mesh = compute_vertex_normals(mesh);
  const Eigen::Index n = mesh.vertex_count();
  const int size = bundle.tile_size();
  const std::vector<Camera> cameras = build_rig(rig);

  std::vector<int> order(cameras.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return wrap_degrees(rig.azimuths_deg[a]) < wrap_degrees(rig.azimuths_deg[b]);
  });

  Mesh::Points color_sum = Mesh::Points::Zero(n, 3);
  Eigen::VectorXd weight_sum = Eigen::VectorXd::Zero(n);
  const auto& normals = *mesh.normals;
  for (int v : order) {
    const Camera cam = resized(cameras[v], size);
    const GBuffer gb = rasterize(mesh, cam, size);
    const VertexVisibility vis = vertex_visibility(mesh, cam, gb);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!vis.visible[i]) continue;
      const Vec3d p = mesh.vertex(i);
      const auto pix = project(cam, p);
      if (!pix) continue;
      const Vec3d dir = (p - cam.position).normalized();
      const double facing = std::max(0.0, -normals.row(i).dot(dir.transpose()));
      const ColorSample s = sample_tile(bundle.rgb_tiles[v], bundle.masks[v], pix->x(), pix->y());
      const double w = std::pow(facing, config.cosine_power) * s.coverage;
      if (!(w > 0.0)) continue;
      color_sum.row(i) += w * s.rgb.transpose();
      weight_sum(i) += w;
    }
  }

  Mesh::Points colors(n, 3);
  std::vector<char> colored(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weight_sum(i) >= config.min_weight && weight_sum(i) > 0.0) {
      colors.row(i) = color_sum.row(i) / weight_sum(i);
      colored[i] = 1;
    } else {
      colors.row(i) = config.fallback_color.transpose();
    }
  }

  // Fill uncolored vertices from colored neighbors, one ring per pass.
  const auto rings = vertex_rings(mesh);
  for (int it = 0; it < kColorDiffusionIterations; ++it) {
    std::vector<char> next = colored;
    Mesh::Points updated = colors;
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (colored[i]) continue;
      Eigen::RowVector3d sum = Eigen::RowVector3d::Zero();
      int count = 0;
      for (int j : rings[static_cast<std::size_t>(i)]) {
        if (!colored[j]) continue;
        sum += colors.row(j);
        ++count;
      }
      if (count == 0) continue;
      updated.row(i) = sum / count;
      next[i] = 1;
      changed = true;
    }
    colors.swap(updated);
    colored.swap(next);
    if (!changed) break;
  }
  mesh.colors = colors.cwiseMax(0.0).cwiseMin(1.0);
  return mesh;
}

void bake_and_export(const Mesh& mesh, const std::filesystem::path& path) {
  require(mesh.has_colors(), ErrorKind::kPrecondition, "mesh has no vertex colors to bake");
  save_mesh(mesh, path, MeshFormat::kGlb);
}

}  // namespace b3d
