#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include <json.hpp>

#include "b3d/geometry.hpp"

namespace b3d {

// Fixed multi-view rig: cameras on a sphere around the origin, all looking
// at it with +Y up. Azimuth 0 sits on +Z and increases toward +X.
struct CameraRigSpec {
  double distance = 4.5;
  double fov_vertical_deg = 30.0;
  double elevation_deg = 5.0;
  std::vector<double> azimuths_deg = {0.0, 90.0, 180.0, 270.0};
  int image_size = 512;

  bool operator==(const CameraRigSpec&) const = default;
};

// Throws kInvalidArgument on out-of-range fields.
void validate(const CameraRigSpec& spec);

nlohmann::json to_json(const CameraRigSpec& spec);
CameraRigSpec rig_from_json(const nlohmann::json& j);

struct Intrinsics {
  double focal = 1.0;  // pixels
  Eigen::Vector2d principal = Eigen::Vector2d::Zero();
};

// Pinhole camera. Camera space: x right, y up, z toward the viewer, so
// visible points have negative z. Pixels: x right, y down, image spanning
// [0, size] with pixel (i, j) centered at (i + 0.5, j + 0.5).
struct Camera {
  Vec3d position = Vec3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Intrinsics intrinsics;

  Vec3d to_camera(const Vec3d& world) const {
    return rotation * (world - position);
  }
  // Distance in front of the camera along the optical axis.
  double depth(const Vec3d& world) const { return -to_camera(world).z(); }
};

std::vector<Camera> build_rig(const CameraRigSpec& spec);

// Camera looking at `target` from `eye` with the given up hint.
Camera look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up,
               double fov_vertical_deg, int image_size);

inline constexpr double kMinProjectionDepth = 1e-6;

std::optional<Eigen::Vector2d> project(const Camera& camera, const Vec3d& point);

Vec3d to_camera_normal(const Camera& camera, const Vec3d& world_normal);
Vec3d to_world_normal(const Camera& camera, const Vec3d& camera_normal);

}  // namespace b3d
