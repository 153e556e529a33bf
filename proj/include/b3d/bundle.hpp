#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "b3d/camera_rig.hpp"
#include "b3d/geometry.hpp"
#include "b3d/image.hpp"

namespace b3d {

inline constexpr int kBundleLayoutVersion = 1;
inline constexpr int kBundleViews = 4;

enum class NormalFrame { kCamera, kWorld };

struct BundleMeta {
  std::string caption;
  std::int64_t seed = 0;
  CameraRigSpec rig;
  NormalFrame normal_frame = NormalFrame::kCamera;
  int layout_version = kBundleLayoutVersion;

  bool operator==(const BundleMeta&) const = default;
};

nlohmann::json to_json(const BundleMeta& meta);
BundleMeta bundle_meta_from_json(const nlohmann::json& j);

// Four views in rig (azimuth) order: RGB tile, camera-space normal tile and
// the foreground mask shared by both.
struct BundleImage {
  std::vector<ImagePlane> rgb_tiles;
  std::vector<ImagePlane> normal_tiles;
  std::vector<MaskPlane> masks;
  BundleMeta meta;

  int tile_size() const { return rgb_tiles.empty() ? 0 : rgb_tiles.front().width; }
  int view_count() const { return static_cast<int>(rgb_tiles.size()); }

  bool operator==(const BundleImage& other) const;
};

// Throws kMalformed unless there are four square, equal-sized tiles of each
// kind with matching masks.
void validate(const BundleImage& bundle);

// 2 x 4 grid, (4S) x (2S) RGBA: RGB views on the top row, matching normal
// views below, columns in azimuth order.
ImagePlane compose(const BundleImage& bundle);

// Inverse of compose. Masks come from the normal tiles' alpha when present;
// for RGB-only images a pixel is foreground when its raw decoded normal has
// magnitude in [0.5, 1.5] (white and black backgrounds decode to sqrt(3)).
BundleImage decompose(const ImagePlane& flat, const BundleMeta& meta);

inline constexpr double kMaskMinMagnitude = 0.5;
inline constexpr double kMaskMaxMagnitude = 1.5;

// Renders one color and one normal tile per rig camera. The mesh must lie in
// [-1.01, 1.01]^3; normals are computed when absent.
BundleImage render_bundle(const Mesh& mesh, const CameraRigSpec& spec);

// Index of the azimuth-0 view (the front view), 0 when the rig has none.
int front_view_index(const CameraRigSpec& spec);

// Fits `image` into the tile with aspect-preserving nearest-neighbor
// scaling, centered and padded with transparent background, and swaps it in
// for the front RGB tile. Everything else is left untouched.
BundleImage replace_front_rgb(const BundleImage& bundle, const ImagePlane& image);

ImagePlane fit_to_tile(const ImagePlane& image, int size);

std::filesystem::path sidecar_path(const std::filesystem::path& png_path);

struct LoadedBundle {
  BundleImage bundle;
  bool sidecar_missing = false;  // defaults were used for the metadata
};

LoadedBundle read_bundle(const std::filesystem::path& path);
void write_bundle(const BundleImage& bundle, const std::filesystem::path& path);

}  // namespace b3d
