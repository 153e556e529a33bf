#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "b3d/bundle.hpp"
#include "b3d/raster.hpp"
#include "support/fixtures.hpp"

namespace b3d {
namespace {

namespace fs = std::filesystem;

CameraRigSpec small_rig(int size = 64) {
  CameraRigSpec spec;
  spec.image_size = size;
  return spec;
}

BundleImage sphere_bundle(int size = 64) {
  return render_bundle(make_icosphere(3, 0.9), small_rig(size));
}

ImagePlane drop_alpha_over_white(const ImagePlane& rgba) {
  const ImagePlane flat = flatten_over_white(rgba);
  ImagePlane out(flat.width, flat.height, 3);
  for (int y = 0; y < flat.height; ++y) {
    for (int x = 0; x < flat.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = flat.at(x, y, c);
    }
  }
  return out;
}

TEST(Compose, LayoutIsTwoRowsByFourColumns) {
  BundleImage b = sphere_bundle(32);
  for (int v = 0; v < 4; ++v) {
    b.rgb_tiles[v] = ImagePlane(32, 32, 4, static_cast<std::uint8_t>(10 + v));
    b.normal_tiles[v] = ImagePlane(32, 32, 4, static_cast<std::uint8_t>(100 + v));
  }
  const ImagePlane flat = compose(b);
  EXPECT_EQ(flat.width, 128);
  EXPECT_EQ(flat.height, 64);
  EXPECT_EQ(flat.at(2 * 32 + 5, 5, 0), 12);  // row 0, column 2: azimuth 180 RGB
  EXPECT_EQ(flat.at(3 * 32 + 1, 40, 0), 103);
}

TEST(Compose, DefaultRigGivesFullResolution) {
  BundleImage b = sphere_bundle(16);
  for (auto* tiles : {&b.rgb_tiles, &b.normal_tiles}) {
    for (auto& t : *tiles) t = ImagePlane(512, 512, 4, 0);
  }
  for (auto& m : b.masks) m = MaskPlane::Constant(512, 512, false);
  const ImagePlane flat = compose(b);
  EXPECT_EQ(flat.width, 2048);
  EXPECT_EQ(flat.height, 1024);
}

TEST(Compose, DecomposeInvertsBitwise) {
  for (const auto& f : testing::reconstruction_fixtures()) {
    const BundleImage b = render_bundle(f.mesh, small_rig());
    EXPECT_EQ(decompose(compose(b), b.meta), b) << f.name;
    EXPECT_EQ(compose(decompose(compose(b), b.meta)), compose(b));
  }
}

TEST(Compose, MismatchedTilesAreRejected) {
  BundleImage b = sphere_bundle(32);
  b.rgb_tiles[1] = ImagePlane(16, 16, 4);
  EXPECT_THROW(compose(b), Error);
}

TEST(Decompose, BadAspectIsRejected) {
  EXPECT_THROW(decompose(ImagePlane(513, 256, 4, 255), BundleMeta{}), Error);
  EXPECT_THROW(decompose(ImagePlane(128, 128, 4, 255), BundleMeta{}), Error);
}

TEST(Decompose, AllBackgroundIsRejected) {
  try {
    decompose(ImagePlane(128, 64, 4, 0), BundleMeta{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(Decompose, RgbOnlyMasksFromNormalMagnitude) {
  const BundleImage b = sphere_bundle(128);
  const BundleImage rgb_only = decompose(drop_alpha_over_white(compose(b)), b.meta);
  for (int v = 0; v < 4; ++v) {
    const double disagree = (rgb_only.masks[v] != b.masks[v]).count();
    EXPECT_LE(disagree / b.masks[v].size(), 0.01) << v;
    EXPECT_EQ(rgb_only.normal_tiles[v].channels, 4);
  }
}

TEST(Decompose, BlackBackgroundAlsoReadsAsBackground) {
  ImagePlane flat(128, 64, 3, 0);
  // One foreground normal pixel pointing at the camera.
  flat.at(10, 40, 0) = 128;
  flat.at(10, 40, 1) = 128;
  flat.at(10, 40, 2) = 255;
  const BundleImage b = decompose(flat, BundleMeta{});
  EXPECT_EQ(b.masks[0].count(), 1);
  EXPECT_TRUE(b.masks[0](8, 10));
}

TEST(RenderBundle, SphereDiscsHaveEqualArea) {
  const BundleImage b = sphere_bundle(128);
  const double area0 = b.masks[0].count();
  for (int v = 1; v < 4; ++v) {
    EXPECT_NEAR(b.masks[v].count() / area0, 1.0, 0.02) << v;
  }
}

TEST(RenderBundle, MasksEqualRasterCoverage) {
  const Mesh m = testing::blob(3, 4);
  const CameraRigSpec spec = small_rig(96);
  const BundleImage b = render_bundle(m, spec);
  const auto rig = build_rig(spec);
  for (int v = 0; v < 4; ++v) {
    const GBuffer gb = rasterize(m, rig[v], 96);
    EXPECT_FALSE((b.masks[v] != gb.mask).any()) << v;
    for (int y = 0; y < 96; ++y) {
      for (int x = 0; x < 96; ++x) {
        EXPECT_EQ(b.rgb_tiles[v].at(x, y, 3) == 255, b.masks[v](y, x));
        EXPECT_EQ(b.normal_tiles[v].at(x, y, 3) == 255, b.masks[v](y, x));
      }
    }
  }
}

TEST(RenderBundle, DecodedNormalsAreUnit) {
  for (const auto& f : testing::reconstruction_fixtures()) {
    const BundleImage b = render_bundle(f.mesh, small_rig(96));
    for (int v = 0; v < 4; ++v) {
      const ImagePlane& t = b.normal_tiles[v];
      for (int y = 0; y < t.height; ++y) {
        for (int x = 0; x < t.width; ++x) {
          if (!b.masks[v](y, x)) continue;
          const double len = decode_normal_raw(t.at(x, y, 0), t.at(x, y, 1), t.at(x, y, 2)).norm();
          ASSERT_NEAR(len, 1.0, 0.05) << f.name;
        }
      }
    }
  }
}

TEST(RenderBundle, MirrorSymmetricSideViews) {
  // The ellipsoid is symmetric about X = 0, so the side views mirror each
  // other with the normal x component negated.
  const BundleImage b = render_bundle(testing::ellipsoid(4), small_rig(96));
  const ImagePlane& right = b.normal_tiles[1];
  const ImagePlane& left = b.normal_tiles[3];
  int compared = 0;
  for (int y = 0; y < 96; ++y) {
    for (int x = 0; x < 96; ++x) {
      const int mx = 95 - x;
      if (!b.masks[1](y, x) || !b.masks[3](y, mx)) continue;
      ++compared;
      EXPECT_NEAR(right.at(x, y, 0), 255 - left.at(mx, y, 0), 1) << x << "," << y;
      EXPECT_NEAR(right.at(x, y, 1), left.at(mx, y, 1), 1);
      EXPECT_NEAR(right.at(x, y, 2), left.at(mx, y, 2), 1);
    }
  }
  EXPECT_GT(compared, 1000);
}

TEST(RenderBundle, UnnormalizedMeshIsRejected) {
  const Mesh m = transform(make_icosphere(2, 1.0), Similarity{2.0, Vec3d::Constant(2.0)});
  try {
    render_bundle(m, small_rig());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(ReplaceFront, SameTileIsIdentity) {
  const BundleImage b = sphere_bundle();
  EXPECT_EQ(replace_front_rgb(b, b.rgb_tiles[front_view_index(b.meta.rig)]), b);
}

TEST(ReplaceFront, UpscalesCentersAndKeepsOtherTiles) {
  const BundleImage b = sphere_bundle(64);
  ImagePlane input(32, 16, 3);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 32; ++x) {
      input.at(x, y, 0) = static_cast<std::uint8_t>(x);
      input.at(x, y, 1) = static_cast<std::uint8_t>(y);
      input.at(x, y, 2) = 7;
    }
  }
  const BundleImage r = replace_front_rgb(b, input);
  const ImagePlane& t = r.rgb_tiles[0];
  // 2x nearest-neighbor upscale to 64x32, padded by 16 rows above and below.
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool inside = y >= 16 && y < 48;
      ASSERT_EQ(t.at(x, y, 3), inside ? 255 : 0) << x << "," << y;
      if (!inside) continue;
      ASSERT_EQ(t.at(x, y, 0), x / 2);
      ASSERT_EQ(t.at(x, y, 1), (y - 16) / 2);
    }
  }
  for (int v = 1; v < 4; ++v) EXPECT_EQ(r.rgb_tiles[v], b.rgb_tiles[v]);
  EXPECT_EQ(r.normal_tiles, b.normal_tiles);
  EXPECT_EQ(r.meta, b.meta);
}

TEST(BundleFiles, WriteReadIdentityWithMetadata) {
  const fs::path dir = fs::temp_directory_path() / "b3d_bundle_files";
  fs::remove_all(dir);
  fs::create_directories(dir);
  BundleImage b = sphere_bundle();
  b.meta.caption = "a small \"grey\" sphere, ünïcode";
  b.meta.seed = -42;
  b.meta.rig.distance = 4.0;
  write_bundle(b, dir / "b.png");
  EXPECT_TRUE(fs::exists(dir / "b.meta.json"));
  const LoadedBundle back = read_bundle(dir / "b.png");
  EXPECT_FALSE(back.sidecar_missing);
  EXPECT_EQ(back.bundle, b);

  fs::remove(dir / "b.meta.json");
  const LoadedBundle bare = read_bundle(dir / "b.png");
  EXPECT_TRUE(bare.sidecar_missing);
  EXPECT_EQ(bare.bundle.meta, BundleMeta{});
}

TEST(BundleMetaJson, RejectsUnknownLayout) {
  nlohmann::json j = to_json(BundleMeta{});
  j["layout_version"] = 2;
  EXPECT_THROW(bundle_meta_from_json(j), Error);
  j["layout_version"] = 1;
  j["normal_frame"] = "screen";
  EXPECT_THROW(bundle_meta_from_json(j), Error);
}

}  // namespace
}  // namespace b3d
