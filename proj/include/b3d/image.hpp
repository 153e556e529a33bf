#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "b3d/io.hpp"

namespace b3d {

using MaskPlane = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-major interleaved 8-bit image with 3 (RGB) or 4 (RGBA) channels.
struct ImagePlane {
  int width = 0;
  int height = 0;
  int channels = 4;
  std::vector<std::uint8_t> data;

  ImagePlane() = default;
  ImagePlane(int w, int h, int c, std::uint8_t fill = 0);

  bool has_alpha() const { return channels == 4; }

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const ImagePlane&) const = default;
};

// Throws kMalformed when width/height/channels do not match the data size.
void validate(const ImagePlane& image);

using DistancePlane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Exact Euclidean distance (pixels) from each pixel center to the nearest
// pixel where `mask` is true; +inf everywhere when the mask is empty.
DistancePlane distance_to(const MaskPlane& mask);

// Signed distance to the mask boundary, positive outside. Pixel centers sit
// half a pixel from the boundary, so bilinear sampling crosses zero on it.
DistancePlane signed_distance(const MaskPlane& mask);

// Bilinear lookup at continuous pixel coordinates (centers at +0.5),
// clamped at the borders.
double sample_bilinear(const DistancePlane& plane, double x, double y);

// Alpha-composites onto white and drops the alpha channel. RGB input is
// returned unchanged.
ImagePlane flatten_over_white(const ImagePlane& image);

ImagePlane crop(const ImagePlane& image, int x0, int y0, int w, int h);
void paste(ImagePlane& dst, const ImagePlane& src, int x0, int y0);

Bytes encode_png(const ImagePlane& image);
ImagePlane decode_png(std::span<const std::uint8_t> bytes);

ImagePlane read_png(const std::filesystem::path& path);
void write_png(const ImagePlane& image, const std::filesystem::path& path);

}  // namespace b3d
