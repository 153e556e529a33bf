#include "b3d/cli.hpp"

#include <algorithm>
#include <csignal>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "b3d/bundle.hpp"
#include "b3d/diffusion.hpp"
#include "b3d/image.hpp"
#include "b3d/mesh_io.hpp"
#include "b3d/metrics.hpp"
#include "b3d/parallel.hpp"
#include "b3d/recon.hpp"
#include "b3d/texturing.hpp"

namespace b3d {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return kExitBadArguments;
    case ErrorKind::kMissingFile:
    case ErrorKind::kMalformed:
    case ErrorKind::kUnsupported:
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kBackend:
    case ErrorKind::kTimeout:
    case ErrorKind::kNetwork: return kExitBackend;
    case ErrorKind::kPrecondition: return kExitPrecondition;
  }
  return kExitIo;
}

namespace {

struct RigOption {
  std::string value;

  // Inline JSON when it starts with '{', else a path to a JSON file.
  CameraRigSpec resolve() const {
    if (value.empty()) return {};
    const bool inline_json = value.front() == '{';
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(inline_json ? value : read_text(value));
    } catch (const nlohmann::json::exception& e) {
      fail(inline_json ? ErrorKind::kInvalidArgument : ErrorKind::kMalformed,
           std::string("bad rig JSON: ") + e.what());
    }
    CameraRigSpec spec = rig_from_json(j);
    validate(spec);
    return spec;
  }
};

MeshInit parse_init(const std::string& text) {
  if (text == "sphere") return MeshInit::sphere();
  const std::string prefix = "coarse:";
  require(text.rfind(prefix, 0) == 0 && text.size() > prefix.size(),
          ErrorKind::kInvalidArgument, "--init must be 'sphere' or 'coarse:PATH'");
  return MeshInit::coarse(fs::path(text.substr(prefix.size())));
}

std::vector<ControlSchedule> parse_controls(const std::vector<std::string>& specs) {
  std::vector<ControlSchedule> out;
  for (const auto& s : specs) out.push_back(parse_control(s));
  return out;
}

std::string resolve_endpoint(const std::string& flag) {
  if (!flag.empty()) return flag;
  const auto env = backend_url_from_env();
  require(env.has_value(), ErrorKind::kInvalidArgument,
          std::string("no endpoint: pass --endpoint or set ") + kBackendUrlVariable);
  return *env;
}

void reconstruct_and_export(const BundleImage& bundle, const ReconConfig& config,
                            const fs::path& out, const std::optional<fs::path>& trace,
                            std::ostream& log) {
  const ReconResult result = reconstruct(bundle, config);
  const Mesh colored = project_colors(result.mesh, bundle, bundle.meta.rig);
  if (trace) write_text_atomic(*trace, result.trace.to_jsonl());
  bake_and_export(colored, out);
  const Checkpoint& last = result.trace.checkpoints.back();
  log << "wrote " << out.string() << " (" << colored.vertex_count() << " vertices, residual "
      << std::fixed << std::setprecision(3) << last.residual_deg << " deg)\n";
}

BundleImage decode_response(const Bytes& png, const BundleMeta& meta) {
  BundleImage bundle = decompose(decode_png(png), meta);
  bundle.meta.rig.image_size = bundle.tile_size();
  return bundle;
}

ReferenceViews load_views(const fs::path& dir) {
  ReferenceViews views;
  const CameraRigSpec spec = RigOption{(dir / "rig.json").string()}.resolve();
  for (std::size_t v = 0; v < spec.azimuths_deg.size(); ++v) {
    views.images.push_back(read_png(dir / ("view_" + std::to_string(v) + ".png")));
  }
  CameraRigSpec sized = spec;
  sized.image_size = views.images.front().width;
  views.cameras = build_rig(sized);
  return views;
}

StubServer* g_stub = nullptr;

void stop_stub(int) {
  if (g_stub != nullptr) g_stub->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"4-view bundle images, reconstruction, texturing and evaluation", "bundle3d"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  // render-bundle
  auto* render = app.add_subcommand("render-bundle", "Render a mesh into a bundle image");
  fs::path render_mesh, render_out;
  RigOption render_rig;
  render->add_option("--mesh", render_mesh, "Input mesh (.obj/.glb)")->required();
  render->add_option("--out", render_out, "Output bundle PNG (sidecar JSON written next to it)")
      ->required();
  render->add_option("--rig", render_rig.value, "Camera rig as inline JSON or a JSON file");

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "Reconstruct a colored mesh from a bundle");
  fs::path recon_bundle, recon_out;
  int recon_steps = 50;
  std::string recon_init = "sphere";
  std::optional<fs::path> recon_trace;
  recon->add_option("--bundle", recon_bundle, "Bundle PNG")->required();
  recon->add_option("--out", recon_out, "Output .glb")->required();
  recon->add_option("--steps", recon_steps, "Refinement steps")->check(CLI::PositiveNumber);
  recon->add_option("--init", recon_init, "'sphere' or 'coarse:PATH'");
  recon->add_option("--trace", recon_trace, "Write the refinement trace as JSONL");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Compare a generated mesh with ground truth");
  fs::path eval_gen, eval_gt, eval_report;
  std::optional<fs::path> eval_views;
  eval->add_option("--gen", eval_gen, "Generated mesh")->required();
  eval->add_option("--gt", eval_gt, "Ground-truth mesh")->required();
  eval->add_option("--views", eval_views,
                   "Directory with rig.json and view_<k>.png reference images");
  eval->add_option("--report", eval_report, "Output JSON report")->required();

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Generate a bundle remotely and reconstruct it");
  std::string pipe_prompt, pipe_endpoint;
  std::optional<fs::path> pipe_image, pipe_coarse, pipe_bundle_out;
  fs::path pipe_out;
  std::int64_t pipe_seed = 0;
  int pipe_steps = 50;
  int timeout_ms = static_cast<int>(kDefaultBackendTimeout.count());
  std::vector<std::string> pipe_controls;
  RigOption pipe_rig;
  auto* prompt_opt = pipe->add_option("--prompt", pipe_prompt, "Text prompt");
  auto* image_opt = pipe->add_option("--image", pipe_image, "Input image (image-to-3D)");
  prompt_opt->excludes(image_opt);
  pipe->add_option("--coarse-mesh", pipe_coarse, "Coarse mesh for image mode")
      ->needs(image_opt);
  pipe->add_option("--endpoint", pipe_endpoint,
                   std::string("Backend URL (default $") + kBackendUrlVariable + ")");
  pipe->add_option("--out", pipe_out, "Output .glb")->required();
  pipe->add_option("--seed", pipe_seed, "Generation seed");
  pipe->add_option("--steps", pipe_steps, "Refinement steps")->check(CLI::PositiveNumber);
  pipe->add_option("--control", pipe_controls, "ControlNet schedule type:lambda1:lambda2")
      ->take_all();
  pipe->add_option("--rig", pipe_rig.value, "Camera rig as inline JSON or a JSON file");
  pipe->add_option("--bundle-out", pipe_bundle_out, "Also write the returned bundle PNG");
  pipe->add_option("--timeout-ms", timeout_ms, "Backend timeout")->check(CLI::PositiveNumber);

  // enhance
  auto* enh = app.add_subcommand("enhance", "Refine a mesh through the enhance backend");
  fs::path enh_mesh, enh_out;
  std::string enh_caption, enh_endpoint;
  std::int64_t enh_seed = 0;
  int enh_steps = 50;
  std::vector<std::string> enh_controls;
  RigOption enh_rig;
  std::optional<fs::path> enh_bundle_out;
  enh->add_option("--mesh", enh_mesh, "Input mesh")->required();
  enh->add_option("--caption", enh_caption, "Caption sent with the bundle")->required();
  enh->add_option("--endpoint", enh_endpoint,
                  std::string("Backend URL (default $") + kBackendUrlVariable + ")");
  enh->add_option("--out", enh_out, "Output .glb")->required();
  enh->add_option("--seed", enh_seed, "Generation seed");
  enh->add_option("--steps", enh_steps, "Refinement steps")->check(CLI::PositiveNumber);
  enh->add_option("--control", enh_controls, "ControlNet schedule (default tile:0.6:0.3)")
      ->take_all();
  enh->add_option("--rig", enh_rig.value, "Camera rig as inline JSON or a JSON file");
  enh->add_option("--bundle-out", enh_bundle_out, "Also write the returned bundle PNG");
  enh->add_option("--timeout-ms", timeout_ms, "Backend timeout")->check(CLI::PositiveNumber);

  // serve-stub
  auto* stub = app.add_subcommand("serve-stub", "Run the stub diffusion backend");
  StubOptions stub_options;
  int stub_status = 0;
  int stub_delay_ms = 0;
  stub->add_option("--fixtures", stub_options.fixtures, "Directory holding generate.png")
      ->required();
  stub->add_option("--port", stub_options.port, "Port (0 picks a free one)");
  stub->add_option("--status", stub_status, "Answer every request with this HTTP status");
  stub->add_option("--delay-ms", stub_delay_ms, "Delay before answering");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help arrives through the subcommand's own parser.
    for (auto* sub : app.get_subcommands()) {
      if (sub->get_help_ptr() != nullptr && sub->get_help_ptr()->count() > 0) {
        out << sub->help();
        return kExitOk;
      }
    }
    err << "error: " << e.what() << "\n";
    return kExitBadArguments;
  }

  try {
    set_thread_count(threads);
    if (render->parsed()) {
      const Mesh mesh = normalize_to_cube(load_mesh(render_mesh)).mesh;
      BundleImage bundle = render_bundle(mesh, render_rig.resolve());
      write_bundle(bundle, render_out);
      out << "wrote " << render_out.string() << "\n";
    } else if (recon->parsed()) {
      const LoadedBundle loaded = read_bundle(recon_bundle);
      if (loaded.sidecar_missing) err << "warning: no sidecar metadata, using the default rig\n";
      ReconConfig config;
      config.steps = recon_steps;
      config.init = parse_init(recon_init);
      reconstruct_and_export(loaded.bundle, config, recon_out, recon_trace, out);
    } else if (eval->parsed()) {
      std::optional<ReferenceViews> views;
      if (eval_views) views = load_views(*eval_views);
      MetricsReport report = evaluate_pair(load_mesh(eval_gen), load_mesh(eval_gt), views, MetricsConfig{});
      report.generated_id = eval_gen.string();
      report.gt_id = eval_gt.string();
      write_text_atomic(eval_report, report.to_json().dump(2) + "\n");
      out << std::setprecision(6) << "cd=" << report.cd << " fs=" << report.fs;
      if (report.psnr_mean) out << " psnr=" << *report.psnr_mean << " ssim=" << *report.ssim_mean;
      out << "\n";
    } else if (pipe->parsed()) {
      require(!pipe_prompt.empty() || pipe_image.has_value(), ErrorKind::kInvalidArgument,
              "pipeline needs --prompt or --image");
      require(!pipe_image || pipe_coarse.has_value(), ErrorKind::kInvalidArgument,
              "image mode needs --coarse-mesh");
      const std::string endpoint = resolve_endpoint(pipe_endpoint);
      BundleMeta meta;
      meta.caption = pipe_prompt;
      meta.seed = pipe_seed;
      meta.rig = pipe_rig.resolve();
      GenerationRequest request;
      request.caption = pipe_prompt;
      request.seed = pipe_seed;
      request.controls = parse_controls(pipe_controls);
      ReconConfig config;
      config.steps = pipe_steps;
      if (pipe_image) {
        const Mesh coarse = normalize_to_cube(load_mesh(*pipe_coarse)).mesh;
        const BundleImage rendered =
            replace_front_rgb(render_bundle(coarse, meta.rig), read_png(*pipe_image));
        request.mode = GenerationMode::kEnhance;
        request.bundle_png = encode_png(compose(rendered));
        if (request.controls.empty()) request.controls = {enhance_schedule()};
        config.init = MeshInit::coarse(coarse);
      }
      const Bytes png =
          request_generation(endpoint, request, std::chrono::milliseconds(timeout_ms));
      BundleImage bundle = decode_response(png, meta);
      if (pipe_bundle_out) write_bundle(bundle, *pipe_bundle_out);
      reconstruct_and_export(bundle, config, pipe_out, std::nullopt, out);
    } else if (enh->parsed()) {
      const std::string endpoint = resolve_endpoint(enh_endpoint);
      const Mesh mesh = normalize_to_cube(load_mesh(enh_mesh)).mesh;
      BundleMeta meta;
      meta.caption = enh_caption;
      meta.seed = enh_seed;
      meta.rig = enh_rig.resolve();
      BundleImage rendered = render_bundle(mesh, meta.rig);
      GenerationRequest request;
      request.mode = GenerationMode::kEnhance;
      request.caption = enh_caption;
      request.seed = enh_seed;
      request.bundle_png = encode_png(compose(rendered));
      request.controls = parse_controls(enh_controls);
      if (request.controls.empty()) request.controls = {enhance_schedule()};
      const Bytes png =
          request_generation(endpoint, request, std::chrono::milliseconds(timeout_ms));
      BundleImage bundle = decode_response(png, meta);
      if (enh_bundle_out) write_bundle(bundle, *enh_bundle_out);
      ReconConfig config;
      config.steps = enh_steps;
      config.init = MeshInit::coarse(mesh);
      reconstruct_and_export(bundle, config, enh_out, std::nullopt, out);
    } else if (stub->parsed()) {
      if (stub_status != 0) stub_options.forced_status = stub_status;
      stub_options.delay = std::chrono::milliseconds(stub_delay_ms);
      StubServer server(stub_options);
      out << server.url() << std::endl;
      g_stub = &server;
      std::signal(SIGINT, stop_stub);
      std::signal(SIGTERM, stop_stub);
      server.wait();
      g_stub = nullptr;
    }
  } catch (const BackendError& e) {
    err << "backend error";
    if (e.status() != 0) err << " (HTTP " << e.status() << ")";
    err << ": " << e.what() << "\n";
    return kExitBackend;
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace b3d
