#include "support/fixtures.hpp"

#include <cmath>
#include <random>

namespace b3d::testing {
namespace {

template <typename RadiusFn>
Mesh radial_shape(int subdivisions, RadiusFn radius) {
  Mesh m = make_icosphere(subdivisions, 1.0);
  for (Eigen::Index i = 0; i < m.vertex_count(); ++i) {
    const Vec3d d = m.vertex(i).normalized();
    m.positions.row(i) = (radius(d) * d).transpose();
  }
  m.normals.reset();
  return compute_vertex_normals(normalize_to_cube(m).mesh);
}

}  // namespace

Mesh ellipsoid(int subdivisions) {
  Mesh m = make_icosphere(subdivisions, 1.0);
  const Eigen::RowVector3d axes(1.0, 0.65, 0.8);
  for (Eigen::Index i = 0; i < m.vertex_count(); ++i) {
    m.positions.row(i) = m.positions.row(i).cwiseProduct(axes);
  }
  m.normals.reset();
  return compute_vertex_normals(normalize_to_cube(m).mesh);
}

Mesh rounded_box(int subdivisions) {
  const Vec3d half(1.0, 0.7, 0.8);
  constexpr double kPower = 6.0;
  return radial_shape(subdivisions, [&](const Vec3d& d) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += std::pow(std::abs(d[k]) / half[k], kPower);
    return std::pow(s, -1.0 / kPower);
  });
}

Mesh blob(std::uint64_t seed, int subdivisions) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  struct Wave {
    Vec3d axis;
    double freq, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 5; ++k) {
    Vec3d axis(gauss(rng), gauss(rng), gauss(rng));
    waves.push_back({axis.normalized(), 1.5 + k * 0.5, phase(rng), 0.06});
  }
  return radial_shape(subdivisions, [&](const Vec3d& d) {
    double r = 1.0;
    for (const Wave& w : waves) r += w.amp * std::sin(w.freq * d.dot(w.axis) * 3.0 + w.phase);
    return r;
  });
}

std::vector<NamedMesh> reconstruction_fixtures() {
  return {{"ellipsoid", ellipsoid()}, {"rounded_box", rounded_box()}, {"blob", blob(7)}};
}

Mesh decimate(const Mesh& mesh, double edge_length) {
  return remesh(mesh, edge_length);
}

Mesh tetra_split_cube(double half) {
  Mesh m;
  m.positions.resize(8, 3);
  for (int i = 0; i < 8; ++i) {
    m.positions.row(i) << ((i & 1) ? half : -half), ((i & 2) ? half : -half),
        ((i & 4) ? half : -half);
  }
  // Even-parity corners (0, 3, 5, 6) carry every face diagonal.
  m.faces.resize(12, 3);
  m.faces << 0, 3, 1,  0, 2, 3,   // z = -h
             4, 5, 6,  5, 7, 6,   // z = +h  (diagonal 5-6)
             0, 1, 5,  0, 5, 4,   // y = -h
             2, 6, 3,  3, 6, 7,   // y = +h  (diagonal 3-6)
             0, 4, 6,  0, 6, 2,   // x = -h
             1, 3, 5,  3, 7, 5;   // x = +h  (diagonal 3-5)
  return m;
}

Mesh random_triangle_soup(int faces, std::uint64_t seed, double extent) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  Mesh m;
  m.positions.resize(3 * faces, 3);
  m.faces.resize(faces, 3);
  for (int f = 0; f < faces; ++f) {
    const Vec3d c(u(rng), u(rng), u(rng));
    for (int k = 0; k < 3; ++k) {
      const Vec3d off(u(rng), u(rng), u(rng));
      m.positions.row(3 * f + k) = (c + 0.4 * off).transpose();
    }
    m.faces.row(f) << 3 * f, 3 * f + 1, 3 * f + 2;
  }
  return m;
}

}  // namespace b3d::testing
