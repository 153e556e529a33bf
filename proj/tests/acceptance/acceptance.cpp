// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "b3d/bundle.hpp"
#include "b3d/cli.hpp"
#include "b3d/diffusion.hpp"
#include "b3d/io.hpp"
#include "b3d/mesh_io.hpp"
#include "b3d/metrics.hpp"
#include "b3d/parallel.hpp"
#include "b3d/raster.hpp"
#include "b3d/recon.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace b3d {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const char* name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.check(false, std::string("exception: ") + e.what());
  }
  std::printf("%s %d %s (%.1fs)%s\n", o.pass ? "PASS" : "FAIL", id, name, seconds_since(t0),
              o.detail.str().c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string bits(double v) {
  char buf[sizeof v];
  std::memcpy(buf, &v, sizeof v);
  return {buf, sizeof v};
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  return run_cli(args, out, err);
}

void metric_oracle(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20261018);
  std::uniform_int_distribution<int> size(1, 512);
  std::uniform_real_distribution<double> tau(0.01, 0.5);
  double worst_cd = 0, worst_fs = 0;
  for (int i = 0; i < 50; ++i) {
    const PointSet a = testing::random_cloud(size(rng), rng());
    const PointSet b = testing::random_cloud(size(rng), rng());
    const double t = tau(rng);
    worst_cd = std::max(worst_cd, std::abs(chamfer(a, b) - testing::oracle_chamfer(a, b)));
    worst_fs = std::max(worst_fs, std::abs(fscore(a, b, t) - testing::oracle_fscore(a, b, t)));
  }
  const double dt = seconds_since(t0);
  o.detail << " max|dcd|=" << worst_cd << " max|dfs|=" << worst_fs;
  o.check(worst_cd <= 1e-9, "chamfer within 1e-9");
  o.check(worst_fs <= 1e-9, "fscore within 1e-9");
  o.check(dt < 10.0, "runtime < 10 s");
}

void raster_oracle(Outcome& o) {
  const auto t0 = Clock::now();
  const auto cams = build_rig(CameraRigSpec{});
  int mismatched = 0;
  for (int i = 0; i < 20; ++i) {
    const Mesh m = testing::random_triangle_soup(10 * (i + 1), 1000 + i);
    const Camera& cam = cams[static_cast<std::size_t>(i) % cams.size()];
    const GBuffer g = rasterize(m, cam, 64);
    const std::vector<int> want = testing::oracle_face_ids(m, cam, 64);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) mismatched += g.face_id(y, x) != want[y * 64 + x];
    }
  }
  const double dt = seconds_since(t0);
  o.detail << " mismatched_pixels=" << mismatched;
  o.check(mismatched == 0, "face ids identical");
  o.check(dt < 30.0, "runtime < 30 s");
}

void codec_round_trips(Outcome& o) {
  CameraRigSpec spec;
  spec.image_size = 128;
  BundleImage b = render_bundle(testing::blob(7, 4), spec);
  b.meta.caption = "a seeded blob";
  b.meta.seed = 42;
  o.check(decompose(compose(b), b.meta) == b, "compose/decompose identity");

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3d n = Vec3d(g(rng), g(rng), g(rng)).normalized();
    const auto c = encode_normal(n);
    worst = std::max(worst, (decode_normal_raw(c[0], c[1], c[2]) - n).cwiseAbs().maxCoeff());
  }
  o.detail << " max_normal_err=" << worst;
  o.check(worst <= 1.0 / 255.0, "normals within 1/255");

  const fs::path path = fs::temp_directory_path() / "b3d_acceptance_bundle.png";
  write_bundle(b, path);
  const LoadedBundle back = read_bundle(path);
  o.check(back.bundle == b, "write/read identity");
  o.check(back.bundle.meta == b.meta, "metadata identity");
  fs::remove(path);
  fs::remove(sidecar_path(path));
}

struct FixtureRuns {
  std::string name;
  double cd_init = 0, cd_sphere = 0, cd_coarse = 0;
  double res_init = 0, res_50 = 0, res_100 = 0;
  double secs_50 = 0, secs_100 = 0;
  std::string trace_100;
};

double cd_to(const Mesh& m, const Mesh& gt) {
  return evaluate_pair(m, gt, std::nullopt, MetricsConfig{}).cd;
}

std::vector<FixtureRuns> run_fixtures() {
  std::vector<FixtureRuns> out;
  for (const auto& [name, gt] : testing::reconstruction_fixtures()) {
    FixtureRuns r;
    r.name = name;
    const BundleImage bundle = render_bundle(gt, CameraRigSpec{});

    ReconConfig cfg;
    r.cd_init = cd_to(init_mesh(cfg, bundle), gt);

    auto t0 = Clock::now();
    const ReconResult s50 = reconstruct(bundle, cfg);
    r.secs_50 = seconds_since(t0);
    r.cd_sphere = cd_to(s50.mesh, gt);
    r.res_init = s50.trace.checkpoints.front().residual_deg;
    r.res_50 = s50.trace.checkpoints.back().residual_deg;

    cfg.steps = 100;
    t0 = Clock::now();
    const ReconResult s100 = reconstruct(bundle, cfg);
    r.secs_100 = seconds_since(t0);
    r.res_100 = s100.trace.checkpoints.back().residual_deg;
    r.trace_100 = s100.trace.to_jsonl();

    cfg.steps = 50;
    cfg.init = MeshInit::coarse(testing::decimate(gt));
    r.cd_coarse = cd_to(reconstruct(bundle, cfg).mesh, gt);
    out.push_back(std::move(r));
  }
  return out;
}

void reconstruction_round_trip(Outcome& o, const std::vector<FixtureRuns>& runs) {
  o.check(runs.size() >= 3, "at least 3 fixtures");
  for (const auto& r : runs) {
    o.detail << " " << r.name << ":cd " << r.cd_sphere << "/" << r.cd_init << " res "
             << r.res_50 << "/" << r.res_init << " " << r.secs_50 << "s";
    o.check(r.cd_sphere <= 0.5 * r.cd_init, r.name + " cd halved");
    o.check(r.res_50 <= r.res_init, r.name + " residual not increased");
    o.check(r.secs_50 <= 120.0, r.name + " runtime <= 120 s");
  }
}

void steps_ablation(Outcome& o, const std::vector<FixtureRuns>& runs) {
  for (const auto& r : runs) {
    o.detail << " " << r.name << ":" << r.res_100 << "<=" << r.res_50;
    o.check(r.res_100 <= r.res_50, r.name + " 100-step residual");
    // The 100-step trace records step 50 and step 100.
    double at50 = NAN, at100 = NAN;
    std::istringstream lines(r.trace_100);
    for (std::string line; std::getline(lines, line);) {
      const auto j = nlohmann::json::parse(line);
      if (j.at("step") == 50) at50 = j.at("residual_deg");
      if (j.at("step") == 100) at100 = j.at("residual_deg");
    }
    o.check(at100 <= at50, r.name + " trace shows the drop");
  }
}

void init_ablation(Outcome& o, const std::vector<FixtureRuns>& runs) {
  for (const auto& r : runs) {
    o.detail << " " << r.name << ":" << r.cd_coarse << "<=" << r.cd_sphere;
    o.check(r.cd_coarse <= r.cd_sphere, r.name + " coarse init");
  }
}

void schedule_math(Outcome& o) {
  for (int k = 1; k <= 100; ++k) {
    for (int t = 1; t <= 60; ++t) {
      ControlSchedule s{ControlType::kTile, 0.5, k / 100.0, t};
      const auto steps = active_steps(s);
      if (static_cast<int>(steps.size()) != k * t / 100 + 1) {
        o.check(false, "cardinality k=" + std::to_string(k) + " T=" + std::to_string(t));
        return;
      }
      for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i] != static_cast<int>(i) || steps[i] > t) {
          o.check(false, "steps are 0..floor(l2*T)");
          return;
        }
      }
      if (k > 1) {
        ControlSchedule lower = s;
        lower.lambda2 = (k - 1) / 100.0;
        o.check(active_steps(lower).size() <= steps.size(), "monotone in lambda2");
      }
    }
  }
  o.check(active_steps({ControlType::kTile, 0.5, 0.0, 30}).empty(), "lambda2 = 0 is empty");
  o.check(active_steps({ControlType::kTile, 0.5, 1.0, 30}).size() == 31, "lambda2 = 1 is all");

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  Eigen::ArrayXXd base(16, 16), control(16, 16);
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    base(i) = u(rng);
    control(i) = u(rng);
  }
  const Eigen::ArrayXXd zero = Eigen::ArrayXXd::Zero(16, 16);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng) / 10, b = u(rng) / 10;
    const Eigen::ArrayXXd lhs = combine_features(base, control, a) + combine_features(zero, control, b);
    worst = std::max(worst, (lhs - combine_features(base, control, a + b)).abs().maxCoeff());
  }
  o.detail << " linearity_err=" << worst;
  o.check(worst <= 1e-12, "linear in lambda1");
  o.check((combine_features(base, control, 0.0) == base).all(), "lambda1 = 0 is identity");

  const ControlSchedule e = enhance_schedule(), d = edit_schedule(ControlType::kNormal);
  o.check(e.lambda1 == 0.6 && e.lambda2 == 0.3, "enhance defaults 0.6/0.3");
  o.check(d.lambda1 == 0.3 && d.lambda2 == 0.5, "edit defaults 0.3/0.5");
}

void pipeline_integration(Outcome& o) {
  const fs::path dir = fs::temp_directory_path() / "b3d_acceptance_pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Mesh gt = testing::ellipsoid(5);
  save_mesh(gt, dir / "gt.obj");
  write_file_atomic(dir / "generate.png", encode_png(compose(render_bundle(gt, CameraRigSpec{}))));
  const auto p = [&](const char* name) { return (dir / name).string(); };

  StubServer stub{StubOptions(dir)};
  o.check(cli({"pipeline", "--prompt", "an ellipsoid", "--endpoint", stub.url(), "--out",
               p("gen.glb")}) == kExitOk,
          "pipeline exit 0");
  o.check(cli({"enhance", "--mesh", p("gt.obj"), "--caption", "an ellipsoid", "--endpoint",
               stub.url(), "--out", p("enh.glb")}) == kExitOk,
          "enhance exit 0");
  for (const char* out : {"gen", "enh"}) {
    const std::string glb = p(out) + std::string(".glb"), rep = p(out) + std::string(".json");
    o.check(fs::exists(glb) && load_mesh(glb).face_count() > 0, std::string(out) + " valid glb");
    o.check(cli({"evaluate", "--gen", glb, "--gt", p("gt.obj"), "--report", rep}) == kExitOk,
            std::string(out) + " evaluate exit 0");
    const auto j = nlohmann::json::parse(read_text(rep));
    const double cd = j.at("cd"), f = j.at("fs");
    o.detail << " " << out << ":cd=" << cd << " fs=" << f;
    o.check(f > 0 && std::isfinite(cd), std::string(out) + " fs > 0, finite cd");
  }
  stub.stop();

  StubOptions failing(dir);
  failing.forced_status = 500;
  StubServer broken{failing};
  const auto before = std::distance(fs::directory_iterator(dir), fs::directory_iterator{});
  o.check(cli({"pipeline", "--prompt", "x", "--endpoint", broken.url(), "--out", p("f1.glb")}) ==
              kExitBackend,
          "pipeline HTTP 500 exit 4");
  o.check(cli({"enhance", "--mesh", p("gt.obj"), "--caption", "x", "--endpoint", broken.url(),
               "--out", p("f2.glb")}) == kExitBackend,
          "enhance HTTP 500 exit 4");
  broken.stop();
  o.check(cli({"pipeline", "--prompt", "x", "--endpoint", broken.url(), "--out", p("f3.glb")}) ==
              kExitBackend,
          "unreachable backend exit 4");
  const auto after = std::distance(fs::directory_iterator(dir), fs::directory_iterator{});
  o.check(before == after, "no partial files");
  fs::remove_all(dir);
}

std::string recon_fingerprint(const BundleImage& bundle) {
  const ReconResult r = reconstruct(bundle, ReconConfig{});
  const Bytes glb = encode_glb(r.mesh);
  return std::string(glb.begin(), glb.end()) + r.trace.to_jsonl();
}

std::string metrics_fingerprint(const Mesh& a, const Mesh& b, const ReferenceViews& views) {
  const PointSet pa = sample_surface(a, 4096, 1), pb = sample_surface(b, 4096, 2);
  std::string s(reinterpret_cast<const char*>(pa.data()), pa.size() * sizeof(double));
  s += bits(chamfer(pa, pb)) + bits(fscore(pa, pb, 0.1));
  const Eigen::VectorXd nn = nearest_distances(pa, pb);
  s.append(reinterpret_cast<const char*>(nn.data()), nn.size() * sizeof(double));
  s += bits(psnr(views.images[0], views.images[1])) + bits(ssim(views.images[0], views.images[1]));
  s += evaluate_pair(a, b, views, MetricsConfig{}).to_json().dump();
  return s;
}

void determinism(Outcome& o) {
  CameraRigSpec spec;
  spec.image_size = 256;
  const Mesh gt = testing::blob(11, 4);
  const BundleImage bundle = render_bundle(gt, spec);
  const Mesh other = testing::rounded_box(4);
  ReferenceViews views{bundle.rgb_tiles, build_rig(spec)};

  std::vector<std::string> recon, metrics;
  for (const int threads : {0, 0, 0, 1, 4}) {
    set_thread_count(threads);
    recon.push_back(recon_fingerprint(bundle));
    metrics.push_back(metrics_fingerprint(gt, other, views));
  }
  set_thread_count(0);
  bool recon_same = true, metrics_same = true;
  for (std::size_t i = 1; i < recon.size(); ++i) {
    recon_same = recon_same && recon[i] == recon[0];
    metrics_same = metrics_same && metrics[i] == metrics[0];
  }
  o.check(recon_same, "reconstruct byte-identical");
  o.check(metrics_same, "metric ops byte-identical");
}

}  // namespace
}  // namespace b3d

int main() {
  using namespace b3d;
  report(1, "metric oracle equivalence", metric_oracle);
  report(2, "rasterizer oracle", raster_oracle);
  report(3, "codec round-trips", codec_round_trips);

  std::vector<FixtureRuns> runs;
  try {
    runs = run_fixtures();
  } catch (const std::exception& e) {
    std::printf("reconstruction fixtures threw: %s\n", e.what());
  }
  report(4, "reconstruction round-trip", [&](Outcome& o) { reconstruction_round_trip(o, runs); });
  report(5, "steps ablation direction", [&](Outcome& o) { steps_ablation(o, runs); });
  report(6, "init ablation direction", [&](Outcome& o) { init_ablation(o, runs); });
  report(7, "schedule math", schedule_math);
  report(8, "pipeline integration", pipeline_integration);
  report(9, "determinism", determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
