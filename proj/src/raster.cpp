#include "b3d/raster.hpp"

#include <algorithm>
#include <cmath>

namespace b3d {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kTileRows = 16;

struct ScreenVertex {
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
  bool valid = false;
};

double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// For a positively oriented triangle in y-down pixel space.
bool top_left(double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

struct SetupFace {
  int face = 0;
  std::array<int, 3> order{};  // raster order -> stored corner
  std::array<ScreenVertex, 3> v;
  double area = 0.0;
  int y0 = 0, y1 = -1, x0 = 0, x1 = -1;
};

std::uint8_t to_u8(double unit) {
  const double v = std::round(255.0 * std::clamp(unit, 0.0, 1.0));
  return static_cast<std::uint8_t>(v);
}

}  // namespace

GBuffer::GBuffer(int w, int h)
    : width(w),
      height(h),
      depth(Plane<double>::Constant(h, w, kInf)),
      face_id(Plane<int>::Constant(h, w, kNoFace)),
      barycentrics(Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>::Zero(
          static_cast<Eigen::Index>(w) * h, 3)),
      mask(Plane<bool>::Constant(h, w, false)) {}

Camera resized(const Camera& camera, int size) {
  require(size > 0, ErrorKind::kInvalidArgument, "image size must be positive");
  const double current = 2.0 * camera.intrinsics.principal.x();
  if (current == size) return camera;
  Camera out = camera;
  out.intrinsics.focal = camera.intrinsics.focal * size / current;
  out.intrinsics.principal = Eigen::Vector2d::Constant(size / 2.0);
  return out;
}

GBuffer rasterize(const Mesh& mesh, const Camera& camera_in, int size) {
  require(mesh.face_count() > 0, ErrorKind::kPrecondition,
          "cannot rasterize an empty mesh");
  const Camera camera = resized(camera_in, size);
  GBuffer gb(size, size);

  std::vector<ScreenVertex> sv(static_cast<std::size_t>(mesh.vertex_count()));
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    const Vec3d q = camera.to_camera(mesh.vertex(i));
    const double d = -q.z();
    if (d <= kMinProjectionDepth) continue;
    const double f = camera.intrinsics.focal;
    sv[i] = {camera.intrinsics.principal.x() + f * q.x() / d,
             camera.intrinsics.principal.y() - f * q.y() / d, d, true};
  }

  std::vector<SetupFace> setup;
  setup.reserve(static_cast<std::size_t>(mesh.face_count()));
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    const ScreenVertex& a = sv[mesh.faces(f, 0)];
    const ScreenVertex& b = sv[mesh.faces(f, 1)];
    const ScreenVertex& c = sv[mesh.faces(f, 2)];
    if (!a.valid || !b.valid || !c.valid) continue;
    const double area = edge(a.x, a.y, b.x, b.y, c.x, c.y);
    // Front faces are counter-clockwise in camera space, hence negative in
    // y-down pixel space. Swap two corners to rasterize with positive area.
    if (!(area < 0.0)) continue;
    SetupFace s;
    s.face = static_cast<int>(f);
    s.order = {0, 2, 1};
    s.v = {a, c, b};
    s.area = -area;
    const double minx = std::min({a.x, b.x, c.x}), maxx = std::max({a.x, b.x, c.x});
    const double miny = std::min({a.y, b.y, c.y}), maxy = std::max({a.y, b.y, c.y});
    s.x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
    s.x1 = std::min(size - 1, static_cast<int>(std::floor(maxx - 0.5)));
    s.y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
    s.y1 = std::min(size - 1, static_cast<int>(std::floor(maxy - 0.5)));
    if (s.x0 > s.x1 || s.y0 > s.y1) continue;
    setup.push_back(s);
  }

  const int tiles = (size + kTileRows - 1) / kTileRows;
  std::vector<std::vector<int>> bins(static_cast<std::size_t>(tiles));
  for (std::size_t i = 0; i < setup.size(); ++i) {
    for (int t = setup[i].y0 / kTileRows; t <= setup[i].y1 / kTileRows; ++t) {
      bins[t].push_back(static_cast<int>(i));
    }
  }

  // Each tile owns its rows; faces are visited in index order, so the
  // outcome is independent of the thread schedule.
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < tiles; ++t) {
    const int row_lo = t * kTileRows;
    const int row_hi = std::min(size - 1, row_lo + kTileRows - 1);
    for (int idx : bins[t]) {
      const SetupFace& s = setup[idx];
      const auto& [v0, v1, v2] = s.v;
      const bool tl0 = top_left(v1.x, v1.y, v2.x, v2.y);
      const bool tl1 = top_left(v2.x, v2.y, v0.x, v0.y);
      const bool tl2 = top_left(v0.x, v0.y, v1.x, v1.y);
      for (int y = std::max(s.y0, row_lo); y <= std::min(s.y1, row_hi); ++y) {
        const double py = y + 0.5;
        for (int x = s.x0; x <= s.x1; ++x) {
          const double px = x + 0.5;
          const double w0 = edge(v1.x, v1.y, v2.x, v2.y, px, py);
          const double w1 = edge(v2.x, v2.y, v0.x, v0.y, px, py);
          const double w2 = edge(v0.x, v0.y, v1.x, v1.y, px, py);
          if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
          if ((w0 == 0.0 && !tl0) || (w1 == 0.0 && !tl1) || (w2 == 0.0 && !tl2)) continue;
          const double l0 = w0 / s.area, l1 = w1 / s.area, l2 = w2 / s.area;
          const double p0 = l0 / v0.depth, p1 = l1 / v1.depth, p2 = l2 / v2.depth;
          const double inv = p0 + p1 + p2;
          const double depth = 1.0 / inv;
          if (!(depth < gb.depth(y, x))) continue;
          gb.depth(y, x) = depth;
          gb.face_id(y, x) = s.face;
          gb.mask(y, x) = true;
          auto bary = gb.barycentrics.row(gb.pixel(x, y));
          bary(s.order[0]) = p0 / inv;
          bary(s.order[1]) = p1 / inv;
          bary(s.order[2]) = p2 / inv;
        }
      }
    }
  }
  return gb;
}

std::array<std::uint8_t, 3> encode_normal(const Vec3d& n) {
  std::array<std::uint8_t, 3> out{};
  for (int k = 0; k < 3; ++k) {
    // std::round rounds half away from zero.
    const double v = std::round(255.0 * (std::clamp(n[k], -1.0, 1.0) + 1.0) / 2.0);
    out[k] = static_cast<std::uint8_t>(v);
  }
  return out;
}

Vec3d decode_normal_raw(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return Vec3d(2.0 * r / 255.0 - 1.0, 2.0 * g / 255.0 - 1.0, 2.0 * b / 255.0 - 1.0);
}

Vec3d decode_normal(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const Vec3d raw = decode_normal_raw(r, g, b);
  const double len = raw.norm();
  return len > 0.0 ? Vec3d(raw / len) : Vec3d::UnitZ();
}

ImagePlane render_normal_tile(const Mesh& mesh, const Camera& camera,
                              const GBuffer& gb) {
  require(mesh.has_normals(), ErrorKind::kPrecondition,
          "normal rendering needs vertex normals");
  ImagePlane out(gb.width, gb.height, 4, 0);
  for (int y = 0; y < gb.height; ++y) {
    for (int x = 0; x < gb.width; ++x) {
      if (!gb.covered(x, y)) continue;
      const auto face = mesh.faces.row(gb.face_id(y, x));
      const auto bary = gb.barycentrics.row(gb.pixel(x, y));
      Vec3d n = Vec3d::Zero();
      for (int k = 0; k < 3; ++k) n += bary(k) * mesh.normals->row(face(k)).transpose();
      if (n.norm() == 0.0) n = camera.rotation.row(2).transpose();
      const auto rgb = encode_normal(to_camera_normal(camera, n));
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb[c];
      out.at(x, y, 3) = 255;
    }
  }
  return out;
}

ImagePlane render_normal_tile(const Mesh& mesh, const Camera& camera, int size) {
  require(mesh.has_normals(), ErrorKind::kPrecondition,
          "normal rendering needs vertex normals");
  const Camera cam = resized(camera, size);
  return render_normal_tile(mesh, cam, rasterize(mesh, cam, size));
}

ImagePlane render_color_tile(const Mesh& mesh, const GBuffer& gb) {
  ImagePlane out(gb.width, gb.height, 4, 0);
  for (int y = 0; y < gb.height; ++y) {
    for (int x = 0; x < gb.width; ++x) {
      if (!gb.covered(x, y)) continue;
      Vec3d c = Vec3d::Constant(kDefaultGray);
      if (mesh.colors) {
        const auto face = mesh.faces.row(gb.face_id(y, x));
        const auto bary = gb.barycentrics.row(gb.pixel(x, y));
        c.setZero();
        for (int k = 0; k < 3; ++k) c += bary(k) * mesh.colors->row(face(k)).transpose();
      }
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = to_u8(c[ch]);
      out.at(x, y, 3) = 255;
    }
  }
  return out;
}

ImagePlane render_color_tile(const Mesh& mesh, const Camera& camera, int size) {
  return render_color_tile(mesh, rasterize(mesh, camera, size));
}

VertexVisibility vertex_visibility(const Mesh& mesh, const Camera& camera,
                                   const GBuffer& gb) {
  require(mesh.has_normals(), ErrorKind::kPrecondition,
          "visibility needs vertex normals");
  require(gb.width == gb.height && gb.width > 0, ErrorKind::kInvalidArgument,
          "gbuffer must be square");
  require(gb.depth.rows() == gb.height && gb.depth.cols() == gb.width,
          ErrorKind::kInvalidArgument, "gbuffer planes do not match its size");
  require(std::abs(2.0 * camera.intrinsics.principal.x() - gb.width) < 1e-9 &&
              std::abs(2.0 * camera.intrinsics.principal.y() - gb.height) < 1e-9,
          ErrorKind::kInvalidArgument,
          "gbuffer size does not match the camera image size");

  const Aabbd box = bounding_box(mesh);
  const double eps = 1e-3 * box.extent().norm();

  VertexVisibility out;
  const Eigen::Index n = mesh.vertex_count();
  out.visible.assign(static_cast<std::size_t>(n), 0);
  out.depth_margin = Eigen::VectorXd::Constant(n, -kInf);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3d p = mesh.vertex(i);
    const auto pix = project(camera, p);
    if (!pix) continue;
    const int x = static_cast<int>(std::floor(pix->x()));
    const int y = static_cast<int>(std::floor(pix->y()));
    if (x < 0 || y < 0 || x >= gb.width || y >= gb.height || !gb.covered(x, y)) continue;
    const double d = camera.depth(p);
    out.depth_margin(i) = gb.depth(y, x) - d;
    const Vec3d view_dir = (p - camera.position).normalized();
    const bool front = mesh.normals->row(i).dot(view_dir.transpose()) < 0.0;
    out.visible[i] = (d <= gb.depth(y, x) + eps && front) ? 1 : 0;
  }
  return out;
}

}  // namespace b3d
