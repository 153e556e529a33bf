#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "b3d/camera_rig.hpp"
#include "b3d/geometry.hpp"
#include "b3d/image.hpp"

namespace b3d {

using PointSet = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct MetricsConfig {
  int sample_count = 16384;
  double fs_threshold = 0.1;
  std::uint64_t sampling_seed = 0;
  double psnr_cap = 99.0;
};

void validate(const MetricsConfig& config);

// Area-weighted triangle choice, then uniform barycentric sampling.
PointSet sample_surface(const Mesh& mesh, int count, std::uint64_t seed);

// Distance from each query point to its nearest neighbor in `reference`.
Eigen::VectorXd nearest_distances(const PointSet& query, const PointSet& reference);

// Sum of the two directed mean nearest-neighbor Euclidean distances.
double chamfer(const PointSet& a, const PointSet& b);

// Harmonic mean of precision (a within tau of b) and recall (b within tau
// of a); 0 when both are 0.
double fscore(const PointSet& a, const PointSet& b, double tau);

// On [0,1]-scaled RGB (RGBA is composited over white first).
double psnr(const ImagePlane& a, const ImagePlane& b, double cap = 99.0);

// Rec.601 luma, 11x11 Gaussian window (sigma 1.5), k1 0.01, k2 0.03, mean over
// all windows that fit inside the image.
double ssim(const ImagePlane& a, const ImagePlane& b);

struct ReferenceViews {
  std::vector<ImagePlane> images;
  std::vector<Camera> cameras;
};

inline constexpr const char* kChamferVariant = "sum-of-means-L2";

struct MetricsReport {
  double cd = 0.0;
  double fs = 0.0;
  std::optional<double> psnr_mean;
  std::optional<double> ssim_mean;
  std::vector<double> psnr_per_view;
  std::vector<double> ssim_per_view;
  MetricsConfig config;
  std::string generated_id;
  std::string gt_id;

  nlohmann::json to_json() const;
};

// Both meshes are normalized to [-1,1]^3 independently before sampling. With
// reference views, the normalized generated mesh is rendered from each
// camera and compared over a white background.
MetricsReport evaluate_pair(const Mesh& generated, const Mesh& gt,
                            const std::optional<ReferenceViews>& views,
                            const MetricsConfig& config);

}  // namespace b3d
