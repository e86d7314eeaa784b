#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "vas/baselines.hpp"
#include "vas/chat_gateway.hpp"
#include "vas/explorer.hpp"
#include "vas/frame_sampler.hpp"
#include "vas/replay.hpp"
#include "vas/sim.hpp"

namespace vas {

/// Backend selector: "mock", "replay:<path>" or "openai".
struct BackendSpec {
  std::string kind = "mock";
  std::string replay_path;
  BackendConfig config;
};

BackendSpec parse_backend_flag(const std::string& flag, BackendSpec base = {});

struct AppConfig {
  BackendSpec vlm;
  BackendSpec llm;
  BackendSpec judge;
  ExplorerConfig explorer;
  BaselineConfig baseline;
  DecoderConfig decoder;
  sim::MockFidelity fidelity;
  std::string cache_root = ".vas-cache";
  std::string out_dir = "vas-out";
  std::string log_level = "info";
  int parallel = 2;
  /// Transcript file that records every gateway call.
  std::optional<std::string> record_path;
};

/// Reads a JSON config file; absent keys keep their defaults.
AppConfig load_app_config(const std::filesystem::path& path);
AppConfig app_config_from_json(const nlohmann::json& j, AppConfig base = {});
nlohmann::json to_json(const AppConfig& c);

sim::SyntheticWorld load_world(const std::filesystem::path& path);
void save_world(const sim::SyntheticWorld& world, const std::filesystem::path& path);

/// Builds gateways from an AppConfig. Replay and live backends are shared
/// across calls; mock backends are built per world.
class GatewayProvider {
 public:
  explicit GatewayProvider(AppConfig config);

  /// `world` feeds mock roles; without one they see an empty world.
  std::shared_ptr<Gateway> make(const std::optional<sim::SyntheticWorld>& world);

 private:
  std::shared_ptr<Gateway> backend(const BackendSpec& spec,
                                   const std::shared_ptr<Gateway>& mock);

  AppConfig config_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Gateway>> shared_;
  std::shared_ptr<TranscriptWriter> writer_;
};

/// Frame source that serves simulated videos without decoding and real
/// files through the configured decoder.
std::shared_ptr<FrameSource> make_frame_source(const DecoderConfig& decoder);

}  // namespace vas
