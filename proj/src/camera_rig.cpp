#include "b3d/camera_rig.hpp"

#include <cmath>
#include <numbers>

namespace b3d {
namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

void validate(const CameraRigSpec& spec) {
  require(spec.distance > 0.0 && std::isfinite(spec.distance),
          ErrorKind::kInvalidArgument, "rig distance must be positive");
  require(spec.fov_vertical_deg > 0.0 && spec.fov_vertical_deg < 180.0,
          ErrorKind::kInvalidArgument, "rig fov must be in (0, 180)");
  require(std::isfinite(spec.elevation_deg) && std::abs(spec.elevation_deg) < 90.0,
          ErrorKind::kInvalidArgument, "rig elevation must be in (-90, 90)");
  require(spec.image_size > 0, ErrorKind::kInvalidArgument,
          "rig image size must be positive");
  require(!spec.azimuths_deg.empty(), ErrorKind::kInvalidArgument,
          "rig needs at least one azimuth");
  for (double a : spec.azimuths_deg) {
    require(a >= 0.0 && a < 360.0, ErrorKind::kInvalidArgument,
            "rig azimuths must be in [0, 360)");
  }
}

nlohmann::json to_json(const CameraRigSpec& spec) {
  return {{"distance", spec.distance},
          {"fov_vertical_deg", spec.fov_vertical_deg},
          {"elevation_deg", spec.elevation_deg},
          {"azimuths_deg", spec.azimuths_deg},
          {"image_size", spec.image_size}};
}

CameraRigSpec rig_from_json(const nlohmann::json& j) {
  CameraRigSpec spec;
  try {
    spec.distance = j.value("distance", spec.distance);
    spec.fov_vertical_deg = j.value("fov_vertical_deg", spec.fov_vertical_deg);
    spec.elevation_deg = j.value("elevation_deg", spec.elevation_deg);
    spec.azimuths_deg = j.value("azimuths_deg", spec.azimuths_deg);
    spec.image_size = j.value("image_size", spec.image_size);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kMalformed, std::string("rig json: ") + e.what());
  }
  validate(spec);
  return spec;
}

Camera look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up,
               double fov_vertical_deg, int image_size) {
  const Vec3d z = (eye - target).normalized();
  const Vec3d x = up.cross(z).normalized();
  const Vec3d y = z.cross(x);
  Camera cam;
  cam.position = eye;
  cam.rotation.row(0) = x.transpose();
  cam.rotation.row(1) = y.transpose();
  cam.rotation.row(2) = z.transpose();
  cam.intrinsics.focal = (image_size / 2.0) / std::tan(radians(fov_vertical_deg) / 2.0);
  cam.intrinsics.principal = Eigen::Vector2d::Constant(image_size / 2.0);
  return cam;
}

std::vector<Camera> build_rig(const CameraRigSpec& spec) {
  validate(spec);
  std::vector<Camera> cams;
  cams.reserve(spec.azimuths_deg.size());
  const double el = radians(spec.elevation_deg);
  for (double az_deg : spec.azimuths_deg) {
    const double az = radians(az_deg);
    const Vec3d eye = spec.distance * Vec3d(std::cos(el) * std::sin(az), std::sin(el),
                                            std::cos(el) * std::cos(az));
    cams.push_back(look_at(eye, Vec3d::Zero(), Vec3d::UnitY(), spec.fov_vertical_deg,
                           spec.image_size));
  }
  return cams;
}

std::optional<Eigen::Vector2d> project(const Camera& camera, const Vec3d& point) {
  const Vec3d q = camera.to_camera(point);
  const double depth = -q.z();
  if (depth <= kMinProjectionDepth) return std::nullopt;
  const double f = camera.intrinsics.focal;
  return Eigen::Vector2d(camera.intrinsics.principal.x() + f * q.x() / depth,
                         camera.intrinsics.principal.y() - f * q.y() / depth);
}

Vec3d to_camera_normal(const Camera& camera, const Vec3d& world_normal) {
  const double len = world_normal.norm();
  require(len > 0.0, ErrorKind::kInvalidArgument, "normal has zero length");
  return camera.rotation * (world_normal / len);
}

Vec3d to_world_normal(const Camera& camera, const Vec3d& camera_normal) {
  const double len = camera_normal.norm();
  require(len > 0.0, ErrorKind::kInvalidArgument, "normal has zero length");
  return camera.rotation.transpose() * (camera_normal / len);
}

}  // namespace b3d
