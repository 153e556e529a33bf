#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "b3d/error.hpp"
#include "b3d/io.hpp"

namespace b3d {

enum class ControlType { kTile, kNormal, kCanny };

const char* to_string(ControlType type);
ControlType control_type_from_string(const std::string& name);

// lambda1 scales the control branch, lambda2 is the fraction of the
// sampling steps during which it is applied.
struct ControlSchedule {
  ControlType type = ControlType::kTile;
  double lambda1 = 0.6;
  double lambda2 = 0.3;
  int total_steps = 30;

  bool operator==(const ControlSchedule&) const = default;
};

void validate(const ControlSchedule& schedule);

// Ranges that work well in practice; values outside are allowed.
inline constexpr double kRecommendedLambda1Min = 0.05;
inline constexpr double kRecommendedLambda1Max = 0.8;
inline constexpr double kRecommendedLambda2Min = 0.1;
inline constexpr double kRecommendedLambda2Max = 0.7;
bool within_recommended_range(const ControlSchedule& schedule);

ControlSchedule enhance_schedule(ControlType type = ControlType::kTile);
ControlSchedule edit_schedule(ControlType type);

// Steps 0..floor(lambda2 * T), ascending; empty when lambda2 == 0.
std::vector<int> active_steps(const ControlSchedule& schedule);

// base + lambda1 * control, elementwise.
template <typename Base, typename Control>
auto combine_features(const Eigen::ArrayBase<Base>& base, const Eigen::ArrayBase<Control>& control,
                      typename Base::Scalar lambda1) {
  require(base.rows() == control.rows() && base.cols() == control.cols(),
          ErrorKind::kInvalidArgument, "feature shapes differ");
  using Result = Eigen::Array<typename Base::Scalar, Base::RowsAtCompileTime,
                              Base::ColsAtCompileTime>;
  return Result(base + lambda1 * control);
}

// "type:lambda1:lambda2" with an optional ":steps" suffix. A bare type
// takes the enhance defaults for tile and the edit defaults otherwise.
ControlSchedule parse_control(const std::string& spec);

enum class GenerationMode { kGenerate, kEnhance };

struct GenerationRequest {
  GenerationMode mode = GenerationMode::kGenerate;
  std::string caption;
  std::int64_t seed = 0;
  std::optional<Bytes> bundle_png;  // enhance only
  std::vector<ControlSchedule> controls;
};

void validate(const GenerationRequest& request);
nlohmann::json to_json(const GenerationRequest& request);
GenerationRequest generation_request_from_json(const nlohmann::json& j);

inline constexpr const char* kBackendUrlVariable = "BUNDLE_BACKEND_URL";
inline constexpr std::chrono::milliseconds kDefaultBackendTimeout{120000};

// $BUNDLE_BACKEND_URL, or nullopt when unset or empty.
std::optional<std::string> backend_url_from_env();

// POSTs the request to <endpoint>/generate or <endpoint>/enhance and returns
// the PNG body after checking it decodes as a bundle. Non-200 responses
// raise BackendError carrying the status and a body excerpt.
Bytes request_generation(const std::string& endpoint, const GenerationRequest& request,
                         std::chrono::milliseconds timeout = kDefaultBackendTimeout);

// In-process test double for the diffusion backend. /generate returns
// `generate.png` from the fixture directory; /enhance echoes the request
// bundle with seeded +-2/255 noise on the RGB row. Requests are handled one
// at a time.
struct StubOptions {
  StubOptions() = default;
  explicit StubOptions(std::filesystem::path dir) : fixtures(std::move(dir)) {}

  std::filesystem::path fixtures;
  int port = 0;  // 0 picks a free port
  std::optional<int> forced_status;
  std::chrono::milliseconds delay{0};
};

class StubServer {
 public:
  explicit StubServer(StubOptions options);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  int port() const;
  std::string url() const;
  std::vector<GenerationRequest> received() const;
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// The stub's /enhance perturbation, exposed for tests.
Bytes perturb_bundle_rgb(std::span<const std::uint8_t> png, std::int64_t seed);

}  // namespace b3d
