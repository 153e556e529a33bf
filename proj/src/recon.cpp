#include "b3d/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <json.hpp>

#include "b3d/mesh_io.hpp"
#include "b3d/raster.hpp"

namespace b3d {
namespace {

constexpr int kBandRadius = 2;
// Fraction of the distance to the target silhouette covered per step;
// a full correction overshoots once neighbors are coupled.
constexpr double kSilhouetteGain = 0.5;
// |n . view_dir| below this counts as a silhouette (grazing) vertex.
constexpr double kGrazing = 0.5;

// Chebyshev dilation by `radius` pixels.
MaskPlane dilate(const MaskPlane& in, int radius) {
  const int h = static_cast<int>(in.rows()), w = static_cast<int>(in.cols());
  MaskPlane rows = MaskPlane::Constant(h, w, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!in(y, x)) continue;
      for (int dx = std::max(0, x - radius); dx <= std::min(w - 1, x + radius); ++dx) {
        rows(y, dx) = true;
      }
    }
  }
  MaskPlane out = MaskPlane::Constant(h, w, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!rows(y, x)) continue;
      for (int dy = std::max(0, y - radius); dy <= std::min(h - 1, y + radius); ++dy) {
        out(dy, x) = true;
      }
    }
  }
  return out;
}

struct PixelHit {
  double u = 0.0;
  double v = 0.0;
  int x = -1;
  int y = -1;
  bool inside = false;
};

PixelHit pixel_of(const Camera& cam, const Vec3d& p, int size) {
  const auto pix = project(cam, p);
  if (!pix) return {};
  const int x = static_cast<int>(std::floor(pix->x()));
  const int y = static_cast<int>(std::floor(pix->y()));
  return {pix->x(), pix->y(), x, y, x >= 0 && y >= 0 && x < size && y < size};
}

// Mask-weighted bilinear lookup of the target normal field; zero when no
// neighboring pixel is foreground.
Eigen::RowVector3d sample_target_normal(const ReconTargets& targets, std::size_t view,
                                        double u, double v) {
  const int size = targets.size;
  const double fx = u - 0.5, fy = v - 0.5;
  const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0, ay = fy - y0;
  Eigen::RowVector3d sum = Eigen::RowVector3d::Zero();
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int x = std::clamp(x0 + dx, 0, size - 1), y = std::clamp(y0 + dy, 0, size - 1);
      if (!targets.masks[view](y, x)) continue;
      const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
      sum += w * targets.normals[view].row(static_cast<Eigen::Index>(y) * size + x);
    }
  }
  const double len = sum.norm();
  return len > 0.0 ? Eigen::RowVector3d(sum / len) : Eigen::RowVector3d::Zero();
}

Mesh clamp_to_bound(Mesh mesh) {
  mesh.positions = mesh.positions.cwiseMax(-kReconBound).cwiseMin(kReconBound);
  return mesh;
}

constexpr int kSolverIterations = 200;
// Anchor weight of vertices outside the visual hull; keeps the normal
// solve from undoing the shrink.
constexpr double kHullAnchor = 100.0;
constexpr double kSolverTolerance = 1e-8;

Mesh::Points solve_normal_alignment(const Mesh::Points& anchor, const Eigen::VectorXd& anchor_weight,
                                    const Mesh::Faces& faces, const Mesh::Points& target_normal,
                                    const std::vector<char>& has_target, double h) {
  const Eigen::Index n = anchor.rows();
  const EdgeList edges = unique_edges(faces);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(3 * n + 36 * edges.rows()));
  for (Eigen::Index i = 0; i < 3 * n; ++i) triplets.emplace_back(i, i, anchor_weight(i / 3));
  for (Eigen::Index e = 0; e < edges.rows(); ++e) {
    const int i = edges(e, 0), j = edges(e, 1);
    // Edges reaching into unobserved regions stay unconstrained.
    if (!has_target[i] || !has_target[j]) continue;
    Eigen::RowVector3d t = target_normal.row(i) + target_normal.row(j);
    const double len = t.norm();
    if (len == 0.0) continue;
    t /= len;
    const Eigen::Matrix3d block = h * t.transpose() * t;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        triplets.emplace_back(3 * i + a, 3 * i + b, block(a, b));
        triplets.emplace_back(3 * j + a, 3 * j + b, block(a, b));
        triplets.emplace_back(3 * i + a, 3 * j + b, -block(a, b));
        triplets.emplace_back(3 * j + a, 3 * i + b, -block(a, b));
      }
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> system(3 * n, 3 * n);
  system.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(anchor.data(), 3 * n);
  const Eigen::VectorXd guess = rhs;
  for (Eigen::Index i = 0; i < 3 * n; ++i) rhs(i) *= anchor_weight(i / 3);
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double, Eigen::RowMajor>,
                           Eigen::Lower | Eigen::Upper>
      cg;
  cg.setMaxIterations(kSolverIterations);
  cg.setTolerance(kSolverTolerance);
  cg.compute(system);
  const Eigen::VectorXd x = cg.solveWithGuess(rhs, guess);
  Mesh::Points out(n, 3);
  Eigen::Map<Eigen::VectorXd>(out.data(), 3 * n) = x;
  return out;
}

}  // namespace

void validate(const ReconConfig& config) {
  require(config.steps >= 1, ErrorKind::kInvalidArgument, "steps must be >= 1");
  require(config.normal_step_size > 0.0 && config.silhouette_step_size > 0.0,
          ErrorKind::kInvalidArgument, "step sizes must be positive");
  require(config.laplacian_weight >= 0.0 && config.laplacian_weight <= 1.0,
          ErrorKind::kInvalidArgument, "laplacian weight must be in [0, 1]");
  require(config.remesh_interval >= 1, ErrorKind::kInvalidArgument,
          "remesh interval must be >= 1");
  require(config.target_edge_length > 0.0, ErrorKind::kInvalidArgument,
          "target edge length must be positive");
}

std::string RefineTrace::to_jsonl() const {
  std::string out;
  for (const Checkpoint& c : checkpoints) {
    const nlohmann::json j = {{"step", c.step},
                              {"residual_deg", c.residual_deg},
                              {"iou", c.iou},
                              {"vertices", c.vertices},
                              {"euler", c.euler}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

ReconTargets make_targets(const BundleImage& bundle, const std::vector<Camera>& rig) {
  validate(bundle);
  require(static_cast<int>(rig.size()) == bundle.view_count(), ErrorKind::kInvalidArgument,
          "rig and bundle disagree on the number of views");
  ReconTargets t;
  t.size = bundle.tile_size();
  for (int v = 0; v < bundle.view_count(); ++v) {
    const Camera cam = resized(rig[v], t.size);
    const ImagePlane& tile = bundle.normal_tiles[v];
    Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> n(
        static_cast<Eigen::Index>(t.size) * t.size, 3);
    for (int y = 0; y < t.size; ++y) {
      for (int x = 0; x < t.size; ++x) {
        Vec3d d = decode_normal(tile.at(x, y, 0), tile.at(x, y, 1), tile.at(x, y, 2));
        if (bundle.meta.normal_frame == NormalFrame::kCamera) d = to_world_normal(cam, d);
        n.row(static_cast<Eigen::Index>(y) * t.size + x) = d.transpose();
      }
    }
    t.cameras.push_back(cam);
    t.masks.push_back(bundle.masks[v]);
    t.silhouette.push_back(signed_distance(bundle.masks[v]));
    t.normals.push_back(std::move(n));
  }
  return t;
}

Mesh init_mesh(const ReconConfig& config, const BundleImage& bundle) {
  validate(config);
  validate(bundle);
  if (config.init.kind == MeshInit::Kind::kSphere) {
    return make_icosphere(config.init.sphere_subdivisions, kSphereInitRadius);
  }
  const Mesh coarse =
      config.init.coarse_mesh ? *config.init.coarse_mesh : load_mesh(config.init.coarse_path);
  require(coarse.face_count() > 0, ErrorKind::kPrecondition, "coarse mesh has no faces");
  return remesh(normalize_to_cube(coarse).mesh, config.target_edge_length);
}

ResidualStats measure_residual(const Mesh& mesh, const ReconTargets& targets) {
  ResidualStats out;
  double angle_sum = 0.0;
  long count = 0;
  for (std::size_t v = 0; v < targets.cameras.size(); ++v) {
    const GBuffer gb = rasterize(mesh, targets.cameras[v], targets.size);
    const MaskPlane& target = targets.masks[v];
    long inter = 0, uni = 0;
    for (int y = 0; y < gb.height; ++y) {
      for (int x = 0; x < gb.width; ++x) {
        const bool r = gb.covered(x, y), t = target(y, x);
        inter += r && t;
        uni += r || t;
        if (!(r && t)) continue;
        const auto face = mesh.faces.row(gb.face_id(y, x));
        const auto bary = gb.barycentrics.row(gb.pixel(x, y));
        Vec3d n = Vec3d::Zero();
        for (int k = 0; k < 3; ++k) n += bary(k) * mesh.normals->row(face(k)).transpose();
        const double len = n.norm();
        if (len == 0.0) continue;
        const Vec3d want = targets.normals[v].row(gb.pixel(x, y)).transpose();
        const double c = std::clamp(n.dot(want) / len, -1.0, 1.0);
        angle_sum += std::acos(c);
        ++count;
      }
    }
    out.iou.push_back(uni > 0 ? static_cast<double>(inter) / uni : 1.0);
  }
  out.residual_deg = count > 0 ? angle_sum / count * 180.0 / std::numbers::pi : 0.0;
  return out;
}

Mesh refine_step(const Mesh& mesh_in, const ReconTargets& targets,
                 const ReconConfig& config) {
  require(mesh_in.face_count() > 0, ErrorKind::kPrecondition, "cannot refine an empty mesh");
  // A single step tolerates zero step sizes; full runs require positive ones.
  require(config.normal_step_size >= 0.0 && config.silhouette_step_size >= 0.0,
          ErrorKind::kInvalidArgument, "step sizes must be non-negative");
  require(config.laplacian_weight >= 0.0 && config.laplacian_weight <= 1.0,
          ErrorKind::kInvalidArgument, "laplacian weight must be in [0, 1]");
  require(config.target_edge_length > 0.0, ErrorKind::kInvalidArgument,
          "target edge length must be positive");
  require(!targets.cameras.empty(), ErrorKind::kInvalidArgument, "no target views");
  const Mesh mesh = mesh_in.has_normals() ? mesh_in : compute_vertex_normals(mesh_in);
  const Eigen::Index n = mesh.vertex_count();
  const int size = targets.size;
  const auto& normals = *mesh.normals;

  Mesh::Points target_sum = Mesh::Points::Zero(n, 3);
  Eigen::VectorXd weight_sum = Eigen::VectorXd::Zero(n);
  // Largest world-space distance to the target silhouette over views; a
  // shrinking vertex moves towards the silhouette of its worst view.
  Eigen::VectorXd shrink = Eigen::VectorXd::Zero(n);
  Mesh::Points shrink_dir = Mesh::Points::Zero(n, 3);
  Eigen::VectorXd grow = Eigen::VectorXd::Zero(n);
  bool any_visible = false;

  // Views are accumulated in rig order so the sums are reproducible.
  for (std::size_t v = 0; v < targets.cameras.size(); ++v) {
    const Camera& cam = targets.cameras[v];
    const MaskPlane& target = targets.masks[v];
    const GBuffer gb = rasterize(mesh, cam, size);
    const VertexVisibility vis = vertex_visibility(mesh, cam, gb);

    const MaskPlane band = dilate(gb.mask, kBandRadius) && !gb.mask && target;
    const MaskPlane near_band = dilate(band, kBandRadius);
    const DistancePlane rendered = signed_distance(gb.mask);

#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3d p = mesh.vertex(i);
      const PixelHit hit = pixel_of(cam, p, size);
      if (!hit.inside) continue;
      const Vec3d view_dir = (p - cam.position).normalized();
      const double facing = normals.row(i).dot(view_dir.transpose());
      const double to_world = cam.depth(p) / cam.intrinsics.focal;
      const double sd =
          kSilhouetteGain * sample_bilinear(targets.silhouette[v], hit.u, hit.v) * to_world;
      if (near_band(hit.y, hit.x) && std::abs(facing) < kGrazing) {
        // How far the target outline lies beyond the rendered one here.
        const double gap = kSilhouetteGain * to_world *
                           (sample_bilinear(rendered, hit.u, hit.v) -
                            sample_bilinear(targets.silhouette[v], hit.u, hit.v));
        grow(i) = std::max(grow(i), gap);
      }
      // Outside the target silhouette means outside the visual hull, occluded or not.
      if (sd > shrink(i)) {
        const DistancePlane& field = targets.silhouette[v];
        const double gx = sample_bilinear(field, hit.u + 0.5, hit.v) -
                          sample_bilinear(field, hit.u - 0.5, hit.v);
        const double gy = sample_bilinear(field, hit.u, hit.v + 0.5) -
                          sample_bilinear(field, hit.u, hit.v - 0.5);
        // Pixel x follows the camera's right axis, pixel y its down axis.
        const Eigen::RowVector3d uphill = gx * cam.rotation.row(0) - gy * cam.rotation.row(1);
        const double len = uphill.norm();
        if (len > 0.0) {
          shrink(i) = sd;
          shrink_dir.row(i) = -uphill / len;
        }
      }
      if (!target(hit.y, hit.x)) continue;
      if (!vis.visible[i]) continue;
      const double w = std::max(0.0, -facing);
      target_sum.row(i) += w * sample_target_normal(targets, v, hit.u, hit.v);
      weight_sum(i) += w;
    }
    any_visible |= std::any_of(vis.visible.begin(), vis.visible.end(),
                               [](char c) { return c != 0; });
  }
  require(any_visible, ErrorKind::kPrecondition,
          "no vertex is visible in any view; rig and bundle do not match");

  std::vector<char> has_target(static_cast<std::size_t>(n), 0);
  Mesh::Points target_normal = Mesh::Points::Zero(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double len = target_sum.row(i).norm();
    if (weight_sum(i) > 0.0 && len > 0.0) {
      target_normal.row(i) = target_sum.row(i) / len;
      has_target[i] = 1;
    }
  }

  // Silhouette force from the pre-step normals.
  Mesh::Points pos = mesh.positions;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (shrink(i) > 0.0) {
      pos.row(i) += std::min(config.silhouette_step_size, shrink(i)) * shrink_dir.row(i);
    } else {
      pos.row(i) += std::min(config.silhouette_step_size, grow(i)) * normals.row(i);
    }
  }

  // Normal alignment, one backward-Euler step of the flow on
  //   E = sum over edges (t_ij . (x_i - x_j))^2
  // with time step eta_n / L^2, L being the target edge length.
  if (config.normal_step_size > 0.0) {
    Eigen::VectorXd anchor_weight = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (shrink(i) > 0.0) anchor_weight(i) = kHullAnchor;
    }
    pos = solve_normal_alignment(pos, anchor_weight, mesh.faces, target_normal, has_target,
                                 config.normal_step_size /
                                     (config.target_edge_length * config.target_edge_length));
  }

  Mesh out = mesh;
  out.positions = pos;
  out.positions = out.positions.cwiseMax(-kReconBound).cwiseMin(kReconBound);
  if (config.laplacian_weight > 0.0) {
    // Only the tangential part of the umbrella move is kept: its normal part
    // shrinks the surface every step.
    const Mesh::Points before = out.positions;
    out = laplacian_smooth(out, config.laplacian_weight, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::RowVector3d d = out.positions.row(i) - before.row(i);
      out.positions.row(i) = before.row(i) + d - d.dot(normals.row(i)) * normals.row(i);
    }
  }
  return compute_vertex_normals(clamp_to_bound(std::move(out)));
}

Mesh refine_step(const Mesh& mesh, const BundleImage& bundle,
                 const std::vector<Camera>& rig, const ReconConfig& config) {
  return refine_step(mesh, make_targets(bundle, rig), config);
}

ReconResult reconstruct(const BundleImage& bundle, const ReconConfig& config) {
  validate(config);
  validate(bundle);
  for (int v = 0; v < bundle.view_count(); ++v) {
    require(bundle.masks[v].any(), ErrorKind::kPrecondition,
            "bundle view " + std::to_string(v) + " has no foreground pixels");
  }
  const ReconTargets targets = make_targets(bundle, build_rig(bundle.meta.rig));

  ReconResult result;
  Mesh mesh = init_mesh(config, bundle);
  if (!mesh.has_normals()) mesh = compute_vertex_normals(mesh);

  auto record = [&](int step) {
    const ResidualStats stats = measure_residual(mesh, targets);
    result.trace.checkpoints.push_back(
        {step, stats.residual_deg, stats.iou, static_cast<int>(mesh.vertex_count()),
         euler_characteristic(mesh)});
  };
  record(0);
  for (int step = 1; step <= config.steps; ++step) {
    // Remeshing opens every interval so each checkpoint sees a refined mesh.
    if (step > 1 && (step - 1) % config.remesh_interval == 0) {
      mesh = compute_vertex_normals(clamp_to_bound(remesh(mesh, config.target_edge_length)));
    }
    mesh = refine_step(mesh, targets, config);
    if (step % kTraceInterval == 0 || step == config.steps) record(step);
  }
  result.mesh = std::move(mesh);
  return result;
}

}  // namespace b3d
