#include "b3d/diffusion.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "b3d/bundle.hpp"
#include "b3d/image.hpp"

namespace b3d {

namespace {

constexpr std::size_t kBodyExcerpt = 256;
// Guards floor(lambda2 * T) against products such as 0.7 * 10 landing just
// below an integer.
constexpr double kFloorSlack = 1e-9;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& text, const std::string& spec) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used > 0 && used == text.size(), ErrorKind::kInvalidArgument,
          "bad number '" + text + "' in control '" + spec + "'");
  return value;
}

std::string excerpt(const std::string& body) {
  return body.size() <= kBodyExcerpt ? body : body.substr(0, kBodyExcerpt) + "...";
}

}  // namespace

const char* to_string(ControlType type) {
  switch (type) {
    case ControlType::kTile: return "tile";
    case ControlType::kNormal: return "normal";
    case ControlType::kCanny: return "canny";
  }
  return "?";
}

ControlType control_type_from_string(const std::string& name) {
  if (name == "tile") return ControlType::kTile;
  if (name == "normal") return ControlType::kNormal;
  if (name == "canny") return ControlType::kCanny;
  fail(ErrorKind::kInvalidArgument, "unknown control type '" + name + "'");
}

void validate(const ControlSchedule& s) {
  const auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  require(unit(s.lambda1), ErrorKind::kInvalidArgument, "lambda1 must lie in [0, 1]");
  require(unit(s.lambda2), ErrorKind::kInvalidArgument, "lambda2 must lie in [0, 1]");
  require(s.total_steps > 0, ErrorKind::kInvalidArgument, "total steps must be positive");
}

bool within_recommended_range(const ControlSchedule& s) {
  return s.lambda1 >= kRecommendedLambda1Min && s.lambda1 <= kRecommendedLambda1Max &&
         s.lambda2 >= kRecommendedLambda2Min && s.lambda2 <= kRecommendedLambda2Max;
}

ControlSchedule enhance_schedule(ControlType type) { return {type, 0.6, 0.3, 30}; }

ControlSchedule edit_schedule(ControlType type) { return {type, 0.3, 0.5, 30}; }

std::vector<int> active_steps(const ControlSchedule& schedule) {
  validate(schedule);
  if (schedule.lambda2 == 0.0) return {};
  const int last = static_cast<int>(
      std::floor(schedule.lambda2 * schedule.total_steps + kFloorSlack));
  std::vector<int> out(static_cast<std::size_t>(last) + 1);
  for (int t = 0; t <= last; ++t) out[t] = t;
  return out;
}

ControlSchedule parse_control(const std::string& spec) {
  const auto parts = split(spec, ':');
  require(parts.size() == 1 || parts.size() == 3 || parts.size() == 4,
          ErrorKind::kInvalidArgument,
          "control '" + spec + "' must look like type:lambda1:lambda2[:steps]");
  const ControlType type = control_type_from_string(parts[0]);
  ControlSchedule s = type == ControlType::kTile ? enhance_schedule(type) : edit_schedule(type);
  if (parts.size() >= 3) {
    s.lambda1 = parse_number(parts[1], spec);
    s.lambda2 = parse_number(parts[2], spec);
  }
  if (parts.size() == 4) {
    const double steps = parse_number(parts[3], spec);
    require(steps == std::floor(steps) && steps >= 1 && steps <= 1e6,
            ErrorKind::kInvalidArgument, "steps in control '" + spec + "' must be a positive integer");
    s.total_steps = static_cast<int>(steps);
  }
  validate(s);
  return s;
}

void validate(const GenerationRequest& request) {
  require(request.mode != GenerationMode::kEnhance || request.bundle_png.has_value(),
          ErrorKind::kInvalidArgument, "enhance requests need a bundle image");
  for (const auto& c : request.controls) validate(c);
}

nlohmann::json to_json(const GenerationRequest& request) {
  using nlohmann::json;
  json controls = json::array();
  for (const auto& c : request.controls) {
    controls.push_back({{"type", to_string(c.type)},
                        {"lambda1", c.lambda1},
                        {"lambda2", c.lambda2},
                        {"total_steps", c.total_steps}});
  }
  json j = {{"mode", request.mode == GenerationMode::kEnhance ? "enhance" : "generate"},
            {"caption", request.caption},
            {"seed", request.seed},
            {"controls", controls}};
  if (request.bundle_png) j["bundle_png"] = base64_encode(*request.bundle_png);
  return j;
}

GenerationRequest generation_request_from_json(const nlohmann::json& j) {
  GenerationRequest r;
  try {
    const std::string mode = j.at("mode").get<std::string>();
    require(mode == "generate" || mode == "enhance", ErrorKind::kMalformed,
            "unknown mode '" + mode + "'");
    r.mode = mode == "enhance" ? GenerationMode::kEnhance : GenerationMode::kGenerate;
    r.caption = j.at("caption").get<std::string>();
    r.seed = j.at("seed").get<std::int64_t>();
    if (j.contains("bundle_png") && !j["bundle_png"].is_null()) {
      r.bundle_png = base64_decode(j["bundle_png"].get<std::string>());
    }
    for (const auto& c : j.at("controls")) {
      ControlSchedule s;
      s.type = control_type_from_string(c.at("type").get<std::string>());
      s.lambda1 = c.at("lambda1").get<double>();
      s.lambda2 = c.at("lambda2").get<double>();
      s.total_steps = c.at("total_steps").get<int>();
      r.controls.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kMalformed, std::string("bad generation request: ") + e.what());
  }
  validate(r);
  return r;
}

std::optional<std::string> backend_url_from_env() {
  const char* v = std::getenv(kBackendUrlVariable);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

Bytes request_generation(const std::string& endpoint, const GenerationRequest& request,
                         std::chrono::milliseconds timeout) {
  validate(request);
  require(timeout.count() > 0, ErrorKind::kInvalidArgument, "timeout must be positive");
  httplib::Client client(endpoint);
  require(client.is_valid(), ErrorKind::kInvalidArgument, "bad endpoint '" + endpoint + "'");
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const std::string path =
      request.mode == GenerationMode::kEnhance ? "/enhance" : "/generate";
  const auto start = std::chrono::steady_clock::now();
  const auto res = client.Post(path, to_json(request).dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const bool expired = std::chrono::steady_clock::now() - start >= timeout;
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && expired);
    throw BackendError(timed_out ? ErrorKind::kTimeout : ErrorKind::kNetwork, 0,
                       endpoint + path + ": " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw BackendError(ErrorKind::kBackend, res->status,
                       endpoint + path + " returned HTTP " + std::to_string(res->status) +
                           ": " + excerpt(res->body));
  }
  Bytes png(res->body.begin(), res->body.end());
  try {
    decompose(decode_png(png), BundleMeta{});
  } catch (const Error& e) {
    throw BackendError(ErrorKind::kBackend, res->status,
                       endpoint + path + " returned an undecodable bundle: " + e.what());
  }
  return png;
}

Bytes perturb_bundle_rgb(std::span<const std::uint8_t> png, std::int64_t seed) {
  ImagePlane image = decode_png(png);
  require(image.height > 0 && image.width == 2 * image.height, ErrorKind::kMalformed,
          "bundle image must be twice as wide as it is tall");
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::uniform_int_distribution<int> noise(-2, 2);
  const int rgb_rows = image.height / 2;
  for (int y = 0; y < rgb_rows; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        auto& p = image.at(x, y, c);
        p = static_cast<std::uint8_t>(std::clamp(p + noise(rng), 0, 255));
      }
    }
  }
  return encode_png(image);
}

struct StubServer::Impl {
  StubOptions options;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  mutable std::mutex mutex;
  std::vector<GenerationRequest> received;
};

StubServer::StubServer(StubOptions options) : impl_(std::make_unique<Impl>()) {
  Impl& s = *impl_;
  s.options = std::move(options);
  s.server.new_task_queue = [] { return new httplib::ThreadPool(1); };

  const auto handle = [&s](GenerationMode mode) {
    return [&s, mode](const httplib::Request& req, httplib::Response& res) {
      if (s.options.delay.count() > 0) std::this_thread::sleep_for(s.options.delay);
      GenerationRequest parsed;
      try {
        parsed = generation_request_from_json(nlohmann::json::parse(req.body));
        require(parsed.mode == mode, ErrorKind::kMalformed, "mode does not match the route");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(e.what(), "text/plain");
        return;
      }
      {
        std::lock_guard lock(s.mutex);
        s.received.push_back(parsed);
      }
      if (s.options.forced_status) {
        res.status = *s.options.forced_status;
        res.set_content("stub forced status " + std::to_string(res.status), "text/plain");
        return;
      }
      try {
        const Bytes png = mode == GenerationMode::kEnhance
                              ? perturb_bundle_rgb(*parsed.bundle_png, parsed.seed)
                              : read_file(s.options.fixtures / "generate.png");
        res.set_content(std::string(png.begin(), png.end()), "image/png");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(e.what(), "text/plain");
      }
    };
  };
  s.server.Post("/generate", handle(GenerationMode::kGenerate));
  s.server.Post("/enhance", handle(GenerationMode::kEnhance));

  if (s.options.port == 0) {
    s.port = s.server.bind_to_any_port("127.0.0.1");
  } else {
    s.port = s.server.bind_to_port("127.0.0.1", s.options.port) ? s.options.port : -1;
  }
  require(s.port > 0, ErrorKind::kIo, "stub server could not bind a port");
  s.thread = std::thread([&s] { s.server.listen_after_bind(); });
  s.server.wait_until_ready();
}

StubServer::~StubServer() {
  stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int StubServer::port() const { return impl_->port; }

std::string StubServer::url() const { return "http://127.0.0.1:" + std::to_string(port()); }

std::vector<GenerationRequest> StubServer::received() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->received;
}

void StubServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void StubServer::stop() { impl_->server.stop(); }

}  // namespace b3d
