#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "b3d/camera_rig.hpp"
#include "b3d/geometry.hpp"
#include "b3d/image.hpp"

namespace b3d {

inline constexpr int kNoFace = -1;

// Per-pixel rasterization record, row-major (row = image y).
struct GBuffer {
  template <typename T>
  using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int width = 0;
  int height = 0;
  Plane<double> depth;     // +inf where empty
  Plane<int> face_id;      // kNoFace where empty
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> barycentrics;  // row y*width+x
  Plane<bool> mask;

  GBuffer() = default;
  GBuffer(int w, int h);

  bool covered(int x, int y) const { return mask(y, x); }
  Eigen::Index pixel(int x, int y) const {
    return static_cast<Eigen::Index>(y) * width + x;
  }
};

// Rescales the camera intrinsics so the image spans [0, size].
Camera resized(const Camera& camera, int size);

// Nearest front-facing surface per pixel center. Back faces (clockwise as
// seen from the camera) are culled; faces with a vertex at or behind the
// near limit are skipped. Coverage uses the top-left rule on exact edge
// ties, and depth ties keep the lower face index. Barycentrics are
// perspective-correct and refer to the face's stored vertex order.
GBuffer rasterize(const Mesh& mesh, const Camera& camera, int size);

// u8 = round(255 * (n + 1) / 2), half away from zero.
std::array<std::uint8_t, 3> encode_normal(const Vec3d& n);
// Raw decode 2u/255 - 1 without re-normalization.
Vec3d decode_normal_raw(std::uint8_t r, std::uint8_t g, std::uint8_t b);
Vec3d decode_normal(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Camera-space normal map, RGBA; background (0,0,0,0).
ImagePlane render_normal_tile(const Mesh& mesh, const Camera& camera, int size);
ImagePlane render_normal_tile(const Mesh& mesh, const Camera& camera,
                              const GBuffer& gbuffer);

inline constexpr double kDefaultGray = 0.8;

// Vertex colors (or flat 0.8 gray), RGBA; background alpha 0.
ImagePlane render_color_tile(const Mesh& mesh, const Camera& camera, int size);
ImagePlane render_color_tile(const Mesh& mesh, const GBuffer& gbuffer);

struct VertexVisibility {
  std::vector<char> visible;
  // Buffer depth minus vertex depth at the vertex's pixel; -inf when the
  // vertex does not land on a covered pixel.
  Eigen::VectorXd depth_margin;
};

// Visible = lands on a covered pixel, is not behind the buffer depth by more
// than 1e-3 of the mesh bounding-box diagonal, and faces the camera.
// `camera` must be sized to the buffer (see resized()).
VertexVisibility vertex_visibility(const Mesh& mesh, const Camera& camera,
                                   const GBuffer& gbuffer);

}  // namespace b3d
