#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "b3d/geometry.hpp"
#include "b3d/mesh_io.hpp"
#include "support/fixtures.hpp"

namespace b3d {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("b3d_geometry_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Mesh single_triangle() {
  Mesh m;
  m.positions.resize(3, 3);
  m.positions << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  m.faces.resize(1, 3);
  m.faces << 0, 1, 2;
  return m;
}

Mesh box(const Vec3d& lo, const Vec3d& hi) {
  Mesh m = testing::tetra_split_cube(1.0);
  for (Eigen::Index i = 0; i < m.vertex_count(); ++i) {
    for (int a = 0; a < 3; ++a) {
      m.positions(i, a) = m.positions(i, a) < 0 ? lo(a) : hi(a);
    }
  }
  m.normals.reset();
  return m;
}

double radial_std(const Mesh& m) {
  const Eigen::VectorXd r = m.positions.rowwise().norm();
  return std::sqrt((r.array() - r.mean()).square().mean());
}

TEST(Icosphere, CountsFollowSubdivisionFormula) {
  for (int s = 0; s <= 5; ++s) {
    const Mesh m = make_icosphere(s, 1.0);
    const int p = 1 << (2 * s);
    EXPECT_EQ(m.vertex_count(), 10 * p + 2) << s;
    EXPECT_EQ(m.face_count(), 20 * p) << s;
    EXPECT_EQ(euler_characteristic(m), 2);
    EXPECT_NO_THROW(validate(m));
  }
}

TEST(Icosphere, SmallCases) {
  EXPECT_EQ(make_icosphere(0, 1.0).vertex_count(), 12);
  EXPECT_EQ(make_icosphere(0, 1.0).face_count(), 20);
  EXPECT_EQ(make_icosphere(2, 1.0).vertex_count(), 162);
  EXPECT_EQ(make_icosphere(2, 1.0).face_count(), 320);
}

TEST(Icosphere, VerticesOnRadius) {
  const Mesh m = make_icosphere(1, 2.0);
  for (Eigen::Index i = 0; i < m.vertex_count(); ++i) {
    EXPECT_NEAR(m.positions.row(i).norm(), 2.0, 1e-6);
  }
}

TEST(Icosphere, RejectsTooManySubdivisions) {
  EXPECT_THROW(make_icosphere(8, 1.0), Error);
  EXPECT_THROW(make_icosphere(2, 0.0), Error);
}

TEST(VertexNormals, SphereNormalsAreRadial) {
  const Mesh m = compute_vertex_normals(make_icosphere(3, 1.0));
  const double cos2 = std::cos(2.0 * M_PI / 180.0);
  for (Eigen::Index i = 0; i < m.vertex_count(); ++i) {
    EXPECT_GT(m.normals->row(i).dot(m.positions.row(i).normalized()), cos2);
  }
}

TEST(VertexNormals, SingleTriangleFacesPlusZ) {
  const Mesh m = compute_vertex_normals(single_triangle());
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR((m.normals->row(i) - Eigen::RowVector3d(0, 0, 1)).norm(), 0.0, 1e-12);
  }
}

TEST(VertexNormals, CubeCornersPointDiagonally) {
  const Mesh m = compute_vertex_normals(testing::tetra_split_cube(1.0));
  for (Eigen::Index i = 0; i < m.vertex_count(); ++i) {
    const Eigen::RowVector3d expect = m.positions.row(i).array().sign().matrix().normalized();
    EXPECT_NEAR((m.normals->row(i) - expect).norm(), 0.0, 1e-12) << i;
  }
}

TEST(VertexNormals, IsolatedVertexGetsPlusZ) {
  Mesh m = single_triangle();
  m.positions.conservativeResize(4, 3);
  m.positions.row(3) << 5, 5, 5;
  const Mesh n = compute_vertex_normals(m);
  EXPECT_EQ(n.normals->row(3), Eigen::RowVector3d(0, 0, 1));
}

TEST(VertexNormals, EmptyMeshIsAnError) {
  EXPECT_THROW(compute_vertex_normals(Mesh{}), Error);
}

TEST(NormalizeToCube, UnitCube) {
  const auto n = normalize_to_cube(box(Vec3d::Zero(), Vec3d::Constant(2)));
  const Aabbd b = bounding_box(n.mesh);
  EXPECT_EQ(b.min, Vec3d::Constant(-1));
  EXPECT_EQ(b.max, Vec3d::Constant(1));
}

TEST(NormalizeToCube, UniformScaleAlongLongestAxis) {
  const auto n = normalize_to_cube(box(Vec3d::Zero(), Vec3d(4, 2, 1)));
  const Aabbd b = bounding_box(n.mesh);
  EXPECT_NEAR((b.min - Vec3d(-1, -0.5, -0.25)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((b.max - Vec3d(1, 0.5, 0.25)).norm(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(n.transform.scale, 0.5);
}

TEST(NormalizeToCube, TransformRoundTrips) {
  const Mesh m = transform(testing::blob(3, 3), Similarity{2.5, Vec3d(1, -2, 3)});
  const auto n = normalize_to_cube(m);
  const Mesh back = transform(n.mesh, n.transform.inverse());
  EXPECT_LT((back.positions - m.positions).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NormalizeToCube, Idempotent) {
  const Mesh once = normalize_to_cube(testing::blob(5, 3)).mesh;
  const Mesh twice = normalize_to_cube(once).mesh;
  EXPECT_LT((once.positions - twice.positions).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(NormalizeToCube, SinglePointIsDegenerate) {
  Mesh m;
  m.positions = Mesh::Points::Zero(1, 3);
  EXPECT_THROW(normalize_to_cube(m), Error);
}

TEST(LaplacianSmooth, ZeroWeightIsIdentity) {
  const Mesh m = testing::blob(1, 3);
  EXPECT_EQ(laplacian_smooth(m, 0.0, 3).positions, m.positions);
}

TEST(LaplacianSmooth, TetrahedronMovesToOppositeCentroid) {
  Mesh t;
  t.positions.resize(4, 3);
  t.positions << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  t.faces.resize(4, 3);
  t.faces << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
  const Mesh s = laplacian_smooth(t, 1.0, 1);
  for (int i = 0; i < 4; ++i) {
    const Eigen::RowVector3d expect = (t.positions.colwise().sum() - t.positions.row(i)) / 3.0;
    EXPECT_NEAR((s.positions.row(i) - expect).norm(), 0.0, 1e-15);
  }
  EXPECT_EQ(s.faces, t.faces);
}

TEST(LaplacianSmooth, ReducesRadialNoise) {
  Mesh m = make_icosphere(3, 1.0);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (Eigen::Index i = 0; i < m.vertex_count(); ++i) {
    m.positions.row(i) *= 1.0 + noise(rng);
  }
  const Mesh s = laplacian_smooth(m, 0.5, 10);
  EXPECT_LT(radial_std(s), radial_std(m));
  EXPECT_TRUE(s.positions.allFinite());
  EXPECT_EQ(connected_components(s), connected_components(m));
}

TEST(LaplacianSmooth, IsolatedVertexIsAnError) {
  Mesh m = single_triangle();
  m.positions.conservativeResize(4, 3);
  m.positions.row(3) << 5, 5, 5;
  EXPECT_THROW(laplacian_smooth(m, 0.5, 1), Error);
}

TEST(Remesh, TargetAtMedianKeepsVertexCount) {
  const Mesh m = make_icosphere(1, 1.0);
  const Mesh r = remesh(m, median_edge_length(m));
  const double change = std::abs(double(r.vertex_count()) - m.vertex_count()) / m.vertex_count();
  EXPECT_LT(change, 0.2);
}

TEST(Remesh, HalfTargetDoublesFaces) {
  const Mesh m = make_icosphere(1, 1.0);
  const Mesh r = remesh(m, 0.5 * median_edge_length(m));
  EXPECT_GE(r.face_count(), 2 * m.face_count());
}

TEST(Remesh, MedianEdgeNearTargetAndTopologyKept) {
  for (const auto& f : testing::reconstruction_fixtures()) {
    for (double target : {0.05, 0.1, 0.2}) {
      const Mesh r = remesh(f.mesh, target);
      const double med = median_edge_length(r);
      EXPECT_GE(med, 0.5 * target) << f.name;
      EXPECT_LE(med, 2.0 * target) << f.name;
      EXPECT_EQ(euler_characteristic(r), 2) << f.name;
      EXPECT_EQ(connected_components(r), 1) << f.name;
      EXPECT_TRUE(r.positions.allFinite());
      EXPECT_TRUE(r.has_normals());
      EXPECT_NO_THROW(validate(r));
    }
  }
}

TEST(Remesh, TwoComponentsStayTwo) {
  const Mesh a = make_icosphere(2, 0.4);
  const Mesh b = transform(make_icosphere(2, 0.4), Similarity{1.0, Vec3d(1, 0, 0)});
  const Mesh r = remesh(concatenate(a, b), 0.1);
  EXPECT_EQ(connected_components(r), 2);
}

TEST(Remesh, RejectsNonPositiveTarget) {
  const Mesh m = make_icosphere(1, 1.0);
  EXPECT_THROW(remesh(m, 0.0), Error);
  EXPECT_THROW(remesh(m, -1.0), Error);
}

TEST(SplitLongEdges, BoundsEdgesAndKeepsVertices) {
  const Mesh m = make_icosphere(1, 1.0);
  const Mesh s = split_long_edges(m, 0.1);
  EXPECT_LE(edge_lengths(s).maxCoeff(), 0.1);
  EXPECT_EQ(s.positions.topRows(m.vertex_count()), m.positions);
  EXPECT_EQ(euler_characteristic(s), 2);
}

TEST(MeshIo, ObjQuadsAreFanTriangulated) {
  const fs::path dir = temp_dir("obj");
  const fs::path path = dir / "cube.obj";
  {
    std::ofstream out(path);
    out << "# cube\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
           "f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
  }
  const Mesh m = load_mesh(path);
  EXPECT_EQ(m.vertex_count(), 8);
  EXPECT_EQ(m.face_count(), 12);
  EXPECT_EQ(euler_characteristic(m), 2);
}

TEST(MeshIo, MissingFile) {
  try {
    load_mesh("/nonexistent/mesh.obj");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingFile);
  }
}

TEST(MeshIo, RoundTripsBothFormats) {
  const fs::path dir = temp_dir("roundtrip");
  Mesh m = compute_vertex_normals(make_icosphere(2, 1.0));
  m.colors = (m.positions.array() * 0.5 + 0.5).matrix();
  for (const char* name : {"ico.obj", "ico.glb"}) {
    save_mesh(m, dir / name);
    const Mesh back = load_mesh(dir / name);
    EXPECT_EQ(back.faces, m.faces) << name;
    EXPECT_LT((back.positions - m.positions).cwiseAbs().maxCoeff(), 1e-5) << name;
    ASSERT_TRUE(back.has_colors()) << name;
    EXPECT_LT((*back.colors - *m.colors).cwiseAbs().maxCoeff(), 1e-5) << name;
  }
}

TEST(MeshIo, UnsupportedExtension) {
  EXPECT_THROW(save_mesh(make_icosphere(0, 1.0), temp_dir("ext") / "m.stl"), Error);
}

TEST(MeshIo, MalformedGlb) {
  const fs::path path = temp_dir("bad") / "bad.glb";
  { std::ofstream(path) << "not a glb at all"; }
  try {
    load_mesh(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMalformed);
  }
}

TEST(Validate, CatchesBrokenMeshes) {
  Mesh m = single_triangle();
  m.faces(0, 2) = 7;
  EXPECT_THROW(validate(m), Error);
  m.faces(0, 2) = 1;
  EXPECT_THROW(validate(m), Error);
  Mesh n = single_triangle();
  n.normals = Mesh::Points::Constant(3, 3, 1.0);
  EXPECT_THROW(validate(n), Error);
}

}  // namespace
}  // namespace b3d
