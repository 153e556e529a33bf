#include "b3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "b3d/kdtree.hpp"
#include "b3d/raster.hpp"

namespace b3d {

void validate(const MetricsConfig& config) {
  require(config.sample_count > 0, ErrorKind::kInvalidArgument,
          "sample count must be positive");
  require(config.fs_threshold > 0.0, ErrorKind::kInvalidArgument,
          "f-score threshold must be positive");
  require(config.psnr_cap > 0.0, ErrorKind::kInvalidArgument, "psnr cap must be positive");
}

PointSet sample_surface(const Mesh& mesh, int count, std::uint64_t seed) {
  require(count > 0, ErrorKind::kInvalidArgument, "sample count must be positive");
  require(mesh.face_count() > 0, ErrorKind::kPrecondition, "mesh has no faces");
  const Eigen::VectorXd areas = face_areas(mesh);
  std::vector<double> cdf(static_cast<std::size_t>(areas.size()));
  double total = 0.0;
  for (Eigen::Index f = 0; f < areas.size(); ++f) {
    total += areas(f);
    cdf[f] = total;
  }
  require(total > 0.0 && std::isfinite(total), ErrorKind::kPrecondition,
          "mesh has zero surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointSet out(count, 3);
  for (int s = 0; s < count; ++s) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    if (it == cdf.end()) --it;
    const auto f = static_cast<Eigen::Index>(it - cdf.begin());
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    const Vec3d a = mesh.vertex(mesh.faces(f, 0));
    const Vec3d b = mesh.vertex(mesh.faces(f, 1));
    const Vec3d c = mesh.vertex(mesh.faces(f, 2));
    out.row(s) = ((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c).transpose();
  }
  return out;
}

Eigen::VectorXd nearest_distances(const PointSet& query, const PointSet& reference) {
  require(query.rows() > 0 && reference.rows() > 0, ErrorKind::kPrecondition,
          "point sets must be non-empty");
  const KdTree3<double> tree(reference);
  Eigen::VectorXd out(query.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    out(i) = std::sqrt(tree.nearest(query.row(i)).squared_distance);
  }
  return out;
}

namespace {

// Left-to-right summation; Eigen's sum() may reorder.
double ordered_mean(const Eigen::VectorXd& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v(i);
  return s / static_cast<double>(v.size());
}

double fraction_within(const Eigen::VectorXd& d, double tau) {
  return static_cast<double>((d.array() <= tau).count()) / static_cast<double>(d.size());
}

}  // namespace

double chamfer(const PointSet& a, const PointSet& b) {
  return ordered_mean(nearest_distances(a, b)) + ordered_mean(nearest_distances(b, a));
}

double fscore(const PointSet& a, const PointSet& b, double tau) {
  require(tau > 0.0, ErrorKind::kInvalidArgument, "f-score threshold must be positive");
  const double precision = fraction_within(nearest_distances(a, b), tau);
  const double recall = fraction_within(nearest_distances(b, a), tau);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

void require_same_shape(const ImagePlane& a, const ImagePlane& b) {
  validate(a);
  validate(b);
  require(a.width == b.width && a.height == b.height, ErrorKind::kInvalidArgument,
          "images must have equal dimensions");
}

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Plane luma(const ImagePlane& rgb) {
  Plane y(rgb.height, rgb.width);
  for (int r = 0; r < rgb.height; ++r) {
    for (int c = 0; c < rgb.width; ++c) {
      y(r, c) = (0.299 * rgb.at(c, r, 0) + 0.587 * rgb.at(c, r, 1) +
                 0.114 * rgb.at(c, r, 2)) / 255.0;
    }
  }
  return y;
}

// Separable "valid" Gaussian filter.
Plane filter_valid(const Plane& in, const Eigen::VectorXd& kernel) {
  const Eigen::Index k = kernel.size();
  const Eigen::Index h = in.rows(), w = in.cols();
  Plane horiz(h, w - k + 1);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c + k <= w; ++c) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) s += kernel(i) * in(r, c + i);
      horiz(r, c) = s;
    }
  }
  Plane out(h - k + 1, w - k + 1);
  for (Eigen::Index r = 0; r + k <= h; ++r) {
    for (Eigen::Index c = 0; c < horiz.cols(); ++c) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) s += kernel(i) * horiz(r + i, c);
      out(r, c) = s;
    }
  }
  return out;
}

}  // namespace

double psnr(const ImagePlane& a_in, const ImagePlane& b_in, double cap) {
  require_same_shape(a_in, b_in);
  const ImagePlane a = flatten_over_white(a_in);
  const ImagePlane b = flatten_over_white(b_in);
  require(!a.data.empty(), ErrorKind::kInvalidArgument, "images are empty");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = (static_cast<double>(a.data[i]) - b.data[i]) / 255.0;
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(a.data.size());
  if (mse == 0.0) return cap;
  return std::min(cap, -10.0 * std::log10(mse));
}

double ssim(const ImagePlane& a_in, const ImagePlane& b_in) {
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  require_same_shape(a_in, b_in);
  require(a_in.width >= kWindow && a_in.height >= kWindow, ErrorKind::kInvalidArgument,
          "ssim needs images of at least 11x11 pixels");

  Eigen::VectorXd kernel(kWindow);
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - (kWindow - 1) / 2.0;
    kernel(i) = std::exp(-x * x / (2.0 * kSigma * kSigma));
  }
  kernel /= kernel.sum();

  const Plane x = luma(flatten_over_white(a_in));
  const Plane y = luma(flatten_over_white(b_in));
  const Plane mx = filter_valid(x, kernel);
  const Plane my = filter_valid(y, kernel);
  const Plane sxx = filter_valid(x * x, kernel) - mx * mx;
  const Plane syy = filter_valid(y * y, kernel) - my * my;
  const Plane sxy = filter_valid(x * y, kernel) - mx * my;
  const Plane map = ((2.0 * mx * my + kC1) * (2.0 * sxy + kC2)) /
                    ((mx * mx + my * my + kC1) * (sxx + syy + kC2));
  double s = 0.0;
  for (Eigen::Index r = 0; r < map.rows(); ++r) {
    for (Eigen::Index c = 0; c < map.cols(); ++c) s += map(r, c);
  }
  return s / static_cast<double>(map.size());
}

nlohmann::json MetricsReport::to_json() const {
  using nlohmann::json;
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"cd", cd},
          {"fs", fs},
          {"psnr", {{"mean", opt(psnr_mean)}, {"per_view", psnr_per_view}}},
          {"ssim", {{"mean", opt(ssim_mean)}, {"per_view", ssim_per_view}}},
          {"config",
           {{"sample_count", config.sample_count},
            {"fs_threshold", config.fs_threshold},
            {"sampling_seed", config.sampling_seed},
            {"psnr_cap", config.psnr_cap}}},
          {"meshes", {{"generated", generated_id}, {"gt", gt_id}}},
          {"variant", kChamferVariant}};
}

MetricsReport evaluate_pair(const Mesh& generated, const Mesh& gt,
                            const std::optional<ReferenceViews>& views,
                            const MetricsConfig& config) {
  validate(config);
  validate(generated);
  validate(gt);
  const Mesh gen_n = normalize_to_cube(generated).mesh;
  const Mesh gt_n = normalize_to_cube(gt).mesh;
  const PointSet a = sample_surface(gen_n, config.sample_count, config.sampling_seed);
  const PointSet b = sample_surface(gt_n, config.sample_count, config.sampling_seed);

  MetricsReport report;
  report.config = config;
  report.cd = chamfer(a, b);
  report.fs = fscore(a, b, config.fs_threshold);

  if (views) {
    require(views->images.size() == views->cameras.size() && !views->images.empty(),
            ErrorKind::kInvalidArgument, "reference views need one camera per image");
    const Mesh shaded = gen_n.has_normals() ? gen_n : compute_vertex_normals(gen_n);
    double psum = 0.0, ssum = 0.0;
    for (std::size_t v = 0; v < views->images.size(); ++v) {
      const ImagePlane& ref = views->images[v];
      require(ref.width == ref.height, ErrorKind::kInvalidArgument,
              "reference views must be square");
      const ImagePlane render = render_color_tile(shaded, views->cameras[v], ref.width);
      report.psnr_per_view.push_back(psnr(render, ref, config.psnr_cap));
      report.ssim_per_view.push_back(ssim(render, ref));
      psum += report.psnr_per_view.back();
      ssum += report.ssim_per_view.back();
    }
    report.psnr_mean = psum / static_cast<double>(views->images.size());
    report.ssim_mean = ssum / static_cast<double>(views->images.size());
  }
  return report;
}

}  // namespace b3d
