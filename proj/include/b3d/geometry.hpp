#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <utility>
#include <vector>

#include "b3d/error.hpp"

namespace b3d {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

using Vec3d = Vec3<double>;
using Vec3i = Eigen::Vector3i;

// Indexed triangle mesh. Rows of `positions` are vertices, rows of `faces`
// are counter-clockwise (outward) vertex-index triples.
template <typename Scalar>
struct TriMesh {
  using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
  using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

  Points positions;
  Faces faces;
  std::optional<Points> normals;  // unit length, one per vertex
  std::optional<Points> colors;   // RGB in [0,1], one per vertex

  Eigen::Index vertex_count() const { return positions.rows(); }
  Eigen::Index face_count() const { return faces.rows(); }
  bool has_normals() const { return normals.has_value(); }
  bool has_colors() const { return colors.has_value(); }

  Vec3<Scalar> vertex(Eigen::Index i) const {
    return positions.row(i).transpose();
  }
};

using Mesh = TriMesh<double>;

template <typename Scalar>
struct Aabb {
  Vec3<Scalar> min = Vec3<Scalar>::Zero();
  Vec3<Scalar> max = Vec3<Scalar>::Zero();

  Vec3<Scalar> extent() const { return max - min; }
  Vec3<Scalar> center() const { return (min + max) / Scalar(2); }
  Scalar max_extent() const { return extent().maxCoeff(); }

  bool within(const Aabb& outer) const {
    return (min.array() >= outer.min.array()).all() &&
           (max.array() <= outer.max.array()).all();
  }
};

using Aabbd = Aabb<double>;

template <typename Derived>
Aabb<typename Derived::Scalar> bounding_box(
    const Eigen::MatrixBase<Derived>& points) {
  require(points.rows() > 0, ErrorKind::kPrecondition,
          "bounding box of an empty point set");
  Aabb<typename Derived::Scalar> box;
  box.min = points.colwise().minCoeff().transpose();
  box.max = points.colwise().maxCoeff().transpose();
  return box;
}

template <typename Scalar>
Aabb<Scalar> bounding_box(const TriMesh<Scalar>& mesh) {
  return bounding_box(mesh.positions);
}

// Uniform scale followed by translation: p' = scale * p + translation.
struct Similarity {
  double scale = 1.0;
  Vec3d translation = Vec3d::Zero();

  template <typename Derived>
  auto apply(const Eigen::MatrixBase<Derived>& rows) const {
    return ((scale * rows).rowwise() + translation.transpose()).eval();
  }

  Similarity inverse() const {
    return Similarity{1.0 / scale, -translation / scale};
  }
};

Mesh transform(const Mesh& mesh, const Similarity& sim);

// Throws kMalformed if an index is out of range, a face repeats an index,
// or a present normal is not unit length within 1e-4.
void validate(const Mesh& mesh);

Mesh make_icosphere(int subdivisions, double radius);

Mesh compute_vertex_normals(const Mesh& mesh);

Mesh::Points face_normals(const Mesh& mesh);
Eigen::VectorXd face_areas(const Mesh& mesh);
double surface_area(const Mesh& mesh);

struct NormalizedMesh {
  Mesh mesh;
  Similarity transform;
};

// Centers the bounding box at the origin and scales uniformly so the
// longest axis spans [-1, 1].
NormalizedMesh normalize_to_cube(const Mesh& mesh);

Mesh laplacian_smooth(const Mesh& mesh, double weight, int iterations);

struct RemeshOptions {
  int iterations = 5;
};

// Incremental isotropic remeshing: split edges longer than 4/3 target,
// collapse edges shorter than 4/5 target, flip toward valence 6, and
// relax tangentially. Output has recomputed normals and no colors.
Mesh remesh(const Mesh& mesh, double target_edge_length,
            const RemeshOptions& options = {});

// Conforming midpoint refinement until no edge exceeds max_edge_length.
// Positions of existing vertices are untouched.
Mesh split_long_edges(const Mesh& mesh, double max_edge_length);

// Appends b after a (for multi-component fixtures).
Mesh concatenate(const Mesh& a, const Mesh& b);

// --- topology helpers -------------------------------------------------------

using EdgeList = Eigen::Matrix<int, Eigen::Dynamic, 2, Eigen::RowMajor>;

// Unique undirected edges, each stored as (lo, hi), sorted.
EdgeList unique_edges(const Mesh::Faces& faces);

Eigen::VectorXd edge_lengths(const Mesh& mesh);
double median_edge_length(const Mesh& mesh);

// Sorted neighbor lists per vertex.
std::vector<std::vector<int>> vertex_rings(const Mesh& mesh);

int euler_characteristic(const Mesh& mesh);
int connected_components(const Mesh& mesh);
bool is_edge_manifold(const Mesh& mesh);

// Removes vertices no face references; attribute rows follow.
Mesh drop_unreferenced(const Mesh& mesh);

}  // namespace b3d
