#include "b3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace b3d {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kPrecondition: return "precondition failed";
    case ErrorKind::kMissingFile: return "missing file";
    case ErrorKind::kMalformed: return "malformed input";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kBackend: return "backend error";
    case ErrorKind::kTimeout: return "timeout";
    case ErrorKind::kNetwork: return "network error";
  }
  return "error";
}

Mesh transform(const Mesh& mesh, const Similarity& sim) {
  Mesh out = mesh;
  out.positions = sim.apply(mesh.positions);
  if (sim.scale < 0.0 && out.normals) *out.normals = -*out.normals;
  return out;
}

void validate(const Mesh& mesh) {
  const Eigen::Index n = mesh.vertex_count();
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    const auto face = mesh.faces.row(f);
    for (int k = 0; k < 3; ++k) {
      require(face(k) >= 0 && face(k) < n, ErrorKind::kMalformed,
              "face " + std::to_string(f) + " index out of range");
    }
    require(face(0) != face(1) && face(1) != face(2) && face(0) != face(2),
            ErrorKind::kMalformed,
            "face " + std::to_string(f) + " repeats a vertex");
  }
  if (mesh.normals) {
    require(mesh.normals->rows() == n, ErrorKind::kMalformed,
            "normal count differs from vertex count");
    for (Eigen::Index i = 0; i < n; ++i) {
      require(std::abs(mesh.normals->row(i).norm() - 1.0) <= 1e-4,
              ErrorKind::kMalformed,
              "normal " + std::to_string(i) + " is not unit length");
    }
  }
  if (mesh.colors) {
    require(mesh.colors->rows() == n, ErrorKind::kMalformed,
            "color count differs from vertex count");
  }
}

Mesh make_icosphere(int subdivisions, double radius) {
  require(subdivisions >= 0 && subdivisions <= 7, ErrorKind::kInvalidArgument,
          "icosphere subdivisions must be in [0, 7]");
  require(radius > 0.0, ErrorKind::kInvalidArgument,
          "icosphere radius must be positive");

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Vec3i> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int id = static_cast<int>(verts.size()) - 1;
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<Vec3i> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = midpoint(f[0], f[1]);
      const int bc = midpoint(f[1], f[2]);
      const int ca = midpoint(f[2], f[0]);
      next.emplace_back(f[0], ab, ca);
      next.emplace_back(f[1], bc, ab);
      next.emplace_back(f[2], ca, bc);
      next.emplace_back(ab, bc, ca);
    }
    faces = std::move(next);
  }

  Mesh mesh;
  mesh.positions.resize(static_cast<Eigen::Index>(verts.size()), 3);
  Mesh::Points normals(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    normals.row(i) = verts[i].transpose();
    mesh.positions.row(i) = radius * verts[i].transpose();
  }
  mesh.normals = std::move(normals);
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    mesh.faces.row(f) = faces[f].transpose();
  }
  return mesh;
}

Mesh::Points face_normals(const Mesh& mesh) {
  Mesh::Points out(mesh.face_count(), 3);
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    const Vec3d a = mesh.vertex(mesh.faces(f, 0));
    const Vec3d b = mesh.vertex(mesh.faces(f, 1));
    const Vec3d c = mesh.vertex(mesh.faces(f, 2));
    const Vec3d n = (b - a).cross(c - a);
    const double len = n.norm();
    out.row(f) = (len > 0.0 ? Vec3d(n / len) : Vec3d::Zero()).transpose();
  }
  return out;
}

Eigen::VectorXd face_areas(const Mesh& mesh) {
  Eigen::VectorXd out(mesh.face_count());
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    const Vec3d a = mesh.vertex(mesh.faces(f, 0));
    const Vec3d b = mesh.vertex(mesh.faces(f, 1));
    const Vec3d c = mesh.vertex(mesh.faces(f, 2));
    out(f) = 0.5 * (b - a).cross(c - a).norm();
  }
  return out;
}

double surface_area(const Mesh& mesh) {
  return mesh.face_count() > 0 ? face_areas(mesh).sum() : 0.0;
}

Mesh compute_vertex_normals(const Mesh& mesh) {
  require(mesh.face_count() > 0, ErrorKind::kPrecondition,
          "cannot compute normals of a mesh without faces");
  Mesh::Points accum = Mesh::Points::Zero(mesh.vertex_count(), 3);
  // Serial accumulation in face order keeps the sums reproducible.
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    const auto face = mesh.faces.row(f);
    const Vec3d a = mesh.vertex(face(0));
    const Vec3d b = mesh.vertex(face(1));
    const Vec3d c = mesh.vertex(face(2));
    const Vec3d area_normal = (b - a).cross(c - a);  // |.| = 2 * area
    for (int k = 0; k < 3; ++k) accum.row(face(k)) += area_normal.transpose();
  }
  for (Eigen::Index i = 0; i < accum.rows(); ++i) {
    const double len = accum.row(i).norm();
    if (len > 0.0) {
      accum.row(i) /= len;
    } else {
      accum.row(i) << 0.0, 0.0, 1.0;
    }
  }
  Mesh out = mesh;
  out.normals = std::move(accum);
  return out;
}

NormalizedMesh normalize_to_cube(const Mesh& mesh) {
  require(mesh.vertex_count() > 0, ErrorKind::kPrecondition,
          "cannot normalize an empty mesh");
  const Aabbd box = bounding_box(mesh);
  const double extent = box.max_extent();
  require(extent > 0.0 && std::isfinite(extent), ErrorKind::kPrecondition,
          "cannot normalize a mesh with zero extent");
  Similarity sim;
  sim.scale = 2.0 / extent;
  sim.translation = -sim.scale * box.center();
  return {transform(mesh, sim), sim};
}

std::vector<std::vector<int>> vertex_rings(const Mesh& mesh) {
  std::vector<std::vector<int>> rings(
      static_cast<std::size_t>(mesh.vertex_count()));
  const EdgeList edges = unique_edges(mesh.faces);
  for (Eigen::Index e = 0; e < edges.rows(); ++e) {
    rings[edges(e, 0)].push_back(edges(e, 1));
    rings[edges(e, 1)].push_back(edges(e, 0));
  }
  for (auto& ring : rings) std::sort(ring.begin(), ring.end());
  return rings;
}

Mesh laplacian_smooth(const Mesh& mesh, double weight, int iterations) {
  require(weight >= 0.0 && weight <= 1.0, ErrorKind::kInvalidArgument,
          "smoothing weight must be in [0, 1]");
  require(iterations >= 1, ErrorKind::kInvalidArgument,
          "smoothing iterations must be positive");
  const auto rings = vertex_rings(mesh);
  for (std::size_t i = 0; i < rings.size(); ++i) {
    require(!rings[i].empty(), ErrorKind::kPrecondition,
            "vertex " + std::to_string(i) + " has no neighbors");
  }

  Mesh out = mesh;
  Mesh::Points next = out.positions;
  for (int it = 0; it < iterations; ++it) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < out.vertex_count(); ++i) {
      const auto& ring = rings[static_cast<std::size_t>(i)];
      Eigen::RowVector3d avg = Eigen::RowVector3d::Zero();
      for (int j : ring) avg += out.positions.row(j);
      avg /= static_cast<double>(ring.size());
      next.row(i) = out.positions.row(i) + weight * (avg - out.positions.row(i));
    }
    out.positions.swap(next);
  }
  if (out.normals && out.face_count() > 0) out = compute_vertex_normals(out);
  return out;
}

Mesh concatenate(const Mesh& a, const Mesh& b) {
  Mesh out;
  out.positions.resize(a.vertex_count() + b.vertex_count(), 3);
  out.positions << a.positions, b.positions;
  out.faces.resize(a.face_count() + b.face_count(), 3);
  out.faces.topRows(a.face_count()) = a.faces;
  out.faces.bottomRows(b.face_count()) =
      b.faces.array() + static_cast<int>(a.vertex_count());
  if (a.normals && b.normals) {
    Mesh::Points n(out.vertex_count(), 3);
    n << *a.normals, *b.normals;
    out.normals = std::move(n);
  }
  if (a.colors && b.colors) {
    Mesh::Points c(out.vertex_count(), 3);
    c << *a.colors, *b.colors;
    out.colors = std::move(c);
  }
  return out;
}

EdgeList unique_edges(const Mesh::Faces& faces) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(faces.rows()) * 3);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      edges.push_back(std::minmax(faces(f, k), faces(f, (k + 1) % 3)));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  EdgeList out(static_cast<Eigen::Index>(edges.size()), 2);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    out(e, 0) = edges[e].first;
    out(e, 1) = edges[e].second;
  }
  return out;
}

Eigen::VectorXd edge_lengths(const Mesh& mesh) {
  const EdgeList edges = unique_edges(mesh.faces);
  Eigen::VectorXd out(edges.rows());
  for (Eigen::Index e = 0; e < edges.rows(); ++e) {
    out(e) = (mesh.positions.row(edges(e, 0)) - mesh.positions.row(edges(e, 1)))
                 .norm();
  }
  return out;
}

double median_edge_length(const Mesh& mesh) {
  Eigen::VectorXd len = edge_lengths(mesh);
  require(len.size() > 0, ErrorKind::kPrecondition, "mesh has no edges");
  std::vector<double> v(len.data(), len.data() + len.size());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

int euler_characteristic(const Mesh& mesh) {
  return static_cast<int>(mesh.vertex_count() -
                          unique_edges(mesh.faces).rows() + mesh.face_count());
}

int connected_components(const Mesh& mesh) {
  std::vector<int> parent(static_cast<std::size_t>(mesh.vertex_count()));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    const int r0 = find(mesh.faces(f, 0));
    parent[find(mesh.faces(f, 1))] = r0;
    parent[find(mesh.faces(f, 2))] = r0;
  }
  int count = 0;
  for (std::size_t i = 0; i < parent.size(); ++i) {
    if (find(static_cast<int>(i)) == static_cast<int>(i)) ++count;
  }
  return count;
}

bool is_edge_manifold(const Mesh& mesh) {
  std::vector<std::pair<int, int>> directed;
  directed.reserve(static_cast<std::size_t>(mesh.face_count()) * 3);
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) {
      directed.emplace_back(mesh.faces(f, k), mesh.faces(f, (k + 1) % 3));
    }
  }
  std::sort(directed.begin(), directed.end());
  // A directed edge used twice means either >2 faces on the edge or
  // inconsistent orientation.
  return std::adjacent_find(directed.begin(), directed.end()) == directed.end();
}

Mesh drop_unreferenced(const Mesh& mesh) {
  std::vector<int> remap(static_cast<std::size_t>(mesh.vertex_count()), -1);
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) remap[mesh.faces(f, k)] = 0;
  }
  int next = 0;
  for (auto& r : remap) {
    if (r == 0) r = next++;
  }
  Mesh out;
  out.positions.resize(next, 3);
  if (mesh.normals) out.normals = Mesh::Points(next, 3);
  if (mesh.colors) out.colors = Mesh::Points(next, 3);
  for (std::size_t i = 0; i < remap.size(); ++i) {
    if (remap[i] < 0) continue;
    out.positions.row(remap[i]) = mesh.positions.row(i);
    if (mesh.normals) out.normals->row(remap[i]) = mesh.normals->row(i);
    if (mesh.colors) out.colors->row(remap[i]) = mesh.colors->row(i);
  }
  out.faces.resize(mesh.face_count(), 3);
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) out.faces(f, k) = remap[mesh.faces(f, k)];
  }
  return out;
}

}  // namespace b3d
