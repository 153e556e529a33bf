#include "b3d/bundle.hpp"

#include <cmath>

#include "b3d/raster.hpp"

namespace b3d {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* frame_name(NormalFrame frame) {
  return frame == NormalFrame::kCamera ? "camera" : "world";
}

MaskPlane alpha_mask(const ImagePlane& tile) {
  MaskPlane mask(tile.height, tile.width);
  for (int y = 0; y < tile.height; ++y) {
    for (int x = 0; x < tile.width; ++x) mask(y, x) = tile.at(x, y, 3) >= 128;
  }
  return mask;
}

MaskPlane normal_magnitude_mask(const ImagePlane& tile) {
  MaskPlane mask(tile.height, tile.width);
  for (int y = 0; y < tile.height; ++y) {
    for (int x = 0; x < tile.width; ++x) {
      const double m =
          decode_normal_raw(tile.at(x, y, 0), tile.at(x, y, 1), tile.at(x, y, 2)).norm();
      mask(y, x) = m >= kMaskMinMagnitude && m <= kMaskMaxMagnitude;
    }
  }
  return mask;
}

ImagePlane with_alpha(const ImagePlane& rgb, const MaskPlane& mask) {
  ImagePlane out(rgb.width, rgb.height, 4);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb.at(x, y, c);
      out.at(x, y, 3) = mask(y, x) ? 255 : 0;
    }
  }
  return out;
}

}  // namespace

json to_json(const BundleMeta& meta) {
  return {{"layout_version", meta.layout_version},
          {"caption", meta.caption},
          {"seed", meta.seed},
          {"rig", to_json(meta.rig)},
          {"normal_frame", frame_name(meta.normal_frame)}};
}

BundleMeta bundle_meta_from_json(const json& j) {
  BundleMeta meta;
  try {
    meta.layout_version = j.value("layout_version", kBundleLayoutVersion);
    meta.caption = j.value("caption", std::string{});
    meta.seed = j.value("seed", std::int64_t{0});
    if (j.contains("rig")) meta.rig = rig_from_json(j["rig"]);
    const std::string frame = j.value("normal_frame", std::string("camera"));
    require(frame == "camera" || frame == "world", ErrorKind::kMalformed,
            "normal_frame must be 'camera' or 'world'");
    meta.normal_frame = frame == "camera" ? NormalFrame::kCamera : NormalFrame::kWorld;
  } catch (const json::exception& e) {
    fail(ErrorKind::kMalformed, std::string("bundle metadata: ") + e.what());
  }
  require(meta.layout_version == kBundleLayoutVersion, ErrorKind::kUnsupported,
          "unsupported bundle layout version " + std::to_string(meta.layout_version));
  return meta;
}

bool BundleImage::operator==(const BundleImage& other) const {
  if (rgb_tiles != other.rgb_tiles || normal_tiles != other.normal_tiles ||
      !(meta == other.meta) || masks.size() != other.masks.size()) {
    return false;
  }
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].rows() != other.masks[i].rows() ||
        masks[i].cols() != other.masks[i].cols() || (masks[i] != other.masks[i]).any()) {
      return false;
    }
  }
  return true;
}

void validate(const BundleImage& bundle) {
  require(bundle.rgb_tiles.size() == kBundleViews &&
              bundle.normal_tiles.size() == kBundleViews &&
              bundle.masks.size() == kBundleViews,
          ErrorKind::kMalformed, "bundle needs four views");
  const int s = bundle.tile_size();
  require(s > 0, ErrorKind::kMalformed, "bundle tiles are empty");
  for (int v = 0; v < kBundleViews; ++v) {
    for (const ImagePlane* tile : {&bundle.rgb_tiles[v], &bundle.normal_tiles[v]}) {
      validate(*tile);
      require(tile->width == s && tile->height == s, ErrorKind::kMalformed,
              "bundle tiles must be square and equal-sized");
    }
    require(bundle.masks[v].rows() == s && bundle.masks[v].cols() == s,
            ErrorKind::kMalformed, "bundle mask size does not match tiles");
  }
}

ImagePlane compose(const BundleImage& bundle) {
  validate(bundle);
  const int s = bundle.tile_size();
  ImagePlane flat(kBundleViews * s, 2 * s, 4, 0);
  for (int v = 0; v < kBundleViews; ++v) {
    const auto as_rgba = [&](const ImagePlane& tile) {
      return tile.has_alpha() ? tile : with_alpha(tile, bundle.masks[v]);
    };
    paste(flat, as_rgba(bundle.rgb_tiles[v]), v * s, 0);
    paste(flat, as_rgba(bundle.normal_tiles[v]), v * s, s);
  }
  return flat;
}

BundleImage decompose(const ImagePlane& flat, const BundleMeta& meta) {
  validate(flat);
  require(flat.height > 0 && flat.width == 2 * flat.height && flat.height % 2 == 0,
          ErrorKind::kMalformed,
          "bundle image must be twice as wide as tall with an even height");
  const int s = flat.height / 2;
  BundleImage bundle;
  bundle.meta = meta;
  bool any_foreground = false;
  for (int v = 0; v < kBundleViews; ++v) {
    ImagePlane rgb = crop(flat, v * s, 0, s, s);
    ImagePlane nrm = crop(flat, v * s, s, s, s);
    MaskPlane mask;
    if (flat.has_alpha()) {
      mask = alpha_mask(nrm);
    } else {
      mask = normal_magnitude_mask(nrm);
      rgb = with_alpha(rgb, mask);
      nrm = with_alpha(nrm, mask);
    }
    any_foreground |= mask.any();
    bundle.rgb_tiles.push_back(std::move(rgb));
    bundle.normal_tiles.push_back(std::move(nrm));
    bundle.masks.push_back(std::move(mask));
  }
  require(any_foreground, ErrorKind::kPrecondition, "bundle has no foreground pixels");
  return bundle;
}

BundleImage render_bundle(const Mesh& mesh_in, const CameraRigSpec& spec) {
  validate(spec);
  require(static_cast<int>(spec.azimuths_deg.size()) == kBundleViews,
          ErrorKind::kInvalidArgument, "bundle rigs have exactly four views");
  const Aabbd box = bounding_box(mesh_in);
  const Aabbd cube{Vec3d::Constant(-1.01), Vec3d::Constant(1.01)};
  require(box.within(cube), ErrorKind::kPrecondition,
          "mesh must be normalized into [-1, 1]^3 before rendering a bundle");
  const Mesh mesh = mesh_in.has_normals() ? mesh_in : compute_vertex_normals(mesh_in);

  BundleImage bundle;
  bundle.meta.rig = spec;
  for (const Camera& cam : build_rig(spec)) {
    const GBuffer gb = rasterize(mesh, cam, spec.image_size);
    bundle.rgb_tiles.push_back(render_color_tile(mesh, gb));
    bundle.normal_tiles.push_back(render_normal_tile(mesh, cam, gb));
    bundle.masks.push_back(gb.mask);
  }
  return bundle;
}

int front_view_index(const CameraRigSpec& spec) {
  for (std::size_t i = 0; i < spec.azimuths_deg.size(); ++i) {
    if (spec.azimuths_deg[i] == 0.0) return static_cast<int>(i);
  }
  return 0;
}

ImagePlane fit_to_tile(const ImagePlane& image, int size) {
  validate(image);
  require(image.width > 0 && image.height > 0, ErrorKind::kInvalidArgument,
          "cannot fit an empty image");
  const double scale = std::min(static_cast<double>(size) / image.width,
                                static_cast<double>(size) / image.height);
  const int w = std::clamp(static_cast<int>(std::lround(image.width * scale)), 1, size);
  const int h = std::clamp(static_cast<int>(std::lround(image.height * scale)), 1, size);
  const int ox = (size - w) / 2;
  const int oy = (size - h) / 2;
  ImagePlane out(size, size, 4, 0);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(image.height - 1, static_cast<int>((y + 0.5) / scale));
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(image.width - 1, static_cast<int>((x + 0.5) / scale));
      for (int c = 0; c < 3; ++c) out.at(ox + x, oy + y, c) = image.at(sx, sy, c);
      out.at(ox + x, oy + y, 3) = image.has_alpha() ? image.at(sx, sy, 3) : 255;
    }
  }
  return out;
}

BundleImage replace_front_rgb(const BundleImage& bundle, const ImagePlane& image) {
  validate(bundle);
  BundleImage out = bundle;
  out.rgb_tiles[front_view_index(bundle.meta.rig)] = fit_to_tile(image, bundle.tile_size());
  return out;
}

fs::path sidecar_path(const fs::path& png_path) {
  fs::path p = png_path;
  p.replace_extension(".meta.json");
  return p;
}

LoadedBundle read_bundle(const fs::path& path) {
  const ImagePlane flat = read_png(path);
  LoadedBundle out;
  BundleMeta meta;
  std::error_code ec;
  const fs::path side = sidecar_path(path);
  if (fs::is_regular_file(side, ec)) {
    json j;
    try {
      j = json::parse(read_text(side));
    } catch (const json::exception& e) {
      fail(ErrorKind::kMalformed, std::string("bundle sidecar: ") + e.what());
    }
    meta = bundle_meta_from_json(j);
  } else {
    out.sidecar_missing = true;
  }
  out.bundle = decompose(flat, meta);
  return out;
}

void write_bundle(const BundleImage& bundle, const fs::path& path) {
  const ImagePlane flat = compose(bundle);
  write_png(flat, path);
  write_text_atomic(sidecar_path(path), to_json(bundle.meta).dump(2) + "\n");
}

}  // namespace b3d
