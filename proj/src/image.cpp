#include "b3d/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "b3d/error.hpp"

namespace b3d {

ImagePlane::ImagePlane(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {
  require(w >= 0 && h >= 0 && (c == 3 || c == 4), ErrorKind::kInvalidArgument,
          "image must have non-negative size and 3 or 4 channels");
}

void validate(const ImagePlane& image) {
  require(image.channels == 3 || image.channels == 4, ErrorKind::kMalformed,
          "image must have 3 or 4 channels");
  require(image.width >= 0 && image.height >= 0 &&
              image.data.size() == static_cast<std::size_t>(image.width) *
                                       image.height * image.channels,
          ErrorKind::kMalformed, "image data size does not match dimensions");
}

ImagePlane flatten_over_white(const ImagePlane& image) {
  if (!image.has_alpha()) return image;
  ImagePlane out(image.width, image.height, 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const int a = image.at(x, y, 3);
      for (int c = 0; c < 3; ++c) {
        const int v = image.at(x, y, c) * a + 255 * (255 - a);
        out.at(x, y, c) = static_cast<std::uint8_t>((v + 127) / 255);
      }
    }
  }
  return out;
}

ImagePlane crop(const ImagePlane& image, int x0, int y0, int w, int h) {
  require(x0 >= 0 && y0 >= 0 && x0 + w <= image.width && y0 + h <= image.height,
          ErrorKind::kInvalidArgument, "crop window outside the image");
  ImagePlane out(w, h, image.channels);
  const std::size_t row = static_cast<std::size_t>(w) * image.channels;
  for (int y = 0; y < h; ++y) {
    const auto* src = &image.data[(static_cast<std::size_t>(y0 + y) * image.width + x0) *
                                  image.channels];
    std::copy(src, src + row, &out.data[static_cast<std::size_t>(y) * row]);
  }
  return out;
}

void paste(ImagePlane& dst, const ImagePlane& src, int x0, int y0) {
  require(src.channels == dst.channels, ErrorKind::kInvalidArgument,
          "paste requires matching channel counts");
  require(x0 >= 0 && y0 >= 0 && x0 + src.width <= dst.width &&
              y0 + src.height <= dst.height,
          ErrorKind::kInvalidArgument, "paste window outside the image");
  const std::size_t row = static_cast<std::size_t>(src.width) * src.channels;
  for (int y = 0; y < src.height; ++y) {
    std::copy(&src.data[static_cast<std::size_t>(y) * row],
              &src.data[static_cast<std::size_t>(y) * row] + row,
              &dst.data[(static_cast<std::size_t>(y0 + y) * dst.width + x0) *
                        dst.channels]);
  }
}

Bytes encode_png(const ImagePlane& image) {
  validate(image);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.has_alpha() ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  require(png_image_write_to_memory(&png, nullptr, &size, 0, image.data.data(), 0,
                                    nullptr) != 0,
          ErrorKind::kIo, std::string("png encode failed: ") + png.message);
  Bytes out(size);
  require(png_image_write_to_memory(&png, out.data(), &size, 0, image.data.data(),
                                    0, nullptr) != 0,
          ErrorKind::kIo, std::string("png encode failed: ") + png.message);
  out.resize(size);
  return out;
}

ImagePlane decode_png(std::span<const std::uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()) == 0) {
    fail(ErrorKind::kMalformed, std::string("not a png: ") + png.message);
  }
  const bool alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  png.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  ImagePlane out(static_cast<int>(png.width), static_cast<int>(png.height),
                 alpha ? 4 : 3);
  if (png_image_finish_read(&png, nullptr, out.data.data(), 0, nullptr) == 0) {
    png_image_free(&png);
    fail(ErrorKind::kMalformed, std::string("png decode failed: ") + png.message);
  }
  return out;
}

ImagePlane read_png(const std::filesystem::path& path) {
  return decode_png(read_file(path));
}

void write_png(const ImagePlane& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_png(image));
}

namespace {

// One-dimensional squared distance transform of a sampled function
// (lower envelope of parabolas).
void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  const double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    double s = -inf;
    while (k >= 0) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -inf : s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), inf);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

DistancePlane distance_to(const MaskPlane& mask) {
  const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
  const double inf = std::numeric_limits<double>::infinity();
  DistancePlane sq(h, w);
  const int n = std::max(h, w);
  std::vector<double> f, d;
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  f.resize(static_cast<std::size_t>(h));
  d.resize(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = mask(y, x) ? 0.0 : inf;
    distance_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq(y, x) = d[y];
  }
  f.resize(static_cast<std::size_t>(w));
  d.resize(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = sq(y, x);
    distance_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) sq(y, x) = d[x];
  }
  return sq.sqrt();
}

DistancePlane signed_distance(const MaskPlane& mask) {
  const DistancePlane outside = distance_to(mask);
  const DistancePlane inside = distance_to(!mask);
  DistancePlane out(mask.rows(), mask.cols());
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    for (Eigen::Index x = 0; x < mask.cols(); ++x) {
      out(y, x) = mask(y, x) ? 0.5 - inside(y, x) : outside(y, x) - 0.5;
    }
  }
  return out;
}

double sample_bilinear(const DistancePlane& plane, double x, double y) {
  const auto w = plane.cols(), h = plane.rows();
  const double u = std::clamp(x - 0.5, 0.0, static_cast<double>(w - 1));
  const double t = std::clamp(y - 0.5, 0.0, static_cast<double>(h - 1));
  const auto x0 = static_cast<Eigen::Index>(std::floor(u));
  const auto y0 = static_cast<Eigen::Index>(std::floor(t));
  const auto x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = u - x0, fy = t - y0;
  return (1 - fy) * ((1 - fx) * plane(y0, x0) + fx * plane(y0, x1)) +
         fy * ((1 - fx) * plane(y1, x0) + fx * plane(y1, x1));
}

}  // namespace b3d
