#include "vas/app.hpp"

#include <fstream>
#include <sstream>

namespace vas {

using nlohmann::json;

BackendSpec parse_backend_flag(const std::string& flag, BackendSpec base) {
  if (flag == "mock" || flag == "openai") {
    base.kind = flag;
  } else if (flag.rfind("replay:", 0) == 0 && flag.size() > 7) {
    base.kind = "replay";
    base.replay_path = flag.substr(7);
  } else {
    throw Error(ErrorKind::Config,
                "backend must be 'mock', 'replay:<path>' or 'openai', got '" + flag + "'");
  }
  return base;
}

namespace {

BackendSpec backend_from_json(const json& j, BackendSpec b) {
  if (j.is_string()) return parse_backend_flag(j.get<std::string>(), b);
  b.kind = j.value("kind", b.kind);
  b.replay_path = j.value("replay_path", b.replay_path);
  auto& c = b.config;
  c.endpoint_url = j.value("endpoint_url", c.endpoint_url);
  c.model_id = j.value("model_id", c.model_id);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.temperature = j.value("temperature", c.temperature);
  c.request_logprobs = j.value("logprobs", c.request_logprobs);
  c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
  c.backoff_base_s = j.value("backoff_base_s", c.backoff_base_s);
  if (b.kind != "mock" && b.kind != "replay" && b.kind != "openai") {
    throw Error(ErrorKind::Config, "unknown backend kind '" + b.kind + "'");
  }
  if (b.kind == "replay" && b.replay_path.empty()) {
    throw Error(ErrorKind::Config, "replay backend needs replay_path");
  }
  return b;
}

json backend_to_json(const BackendSpec& b) {
  const auto& c = b.config;
  return json{{"kind", b.kind},
              {"replay_path", b.replay_path},
              {"endpoint_url", c.endpoint_url},
              {"model_id", c.model_id},
              {"api_key_env", c.api_key_env},
              {"timeout_s", c.timeout_s},
              {"max_retries", c.max_retries},
              {"temperature", c.temperature},
              {"logprobs", c.request_logprobs},
              {"max_concurrency", c.max_concurrency},
              {"backoff_base_s", c.backoff_base_s}};
}

}  // namespace

AppConfig app_config_from_json(const json& j, AppConfig base) {
  try {
    if (j.contains("vlm")) base.vlm = backend_from_json(j["vlm"], base.vlm);
    if (j.contains("llm")) base.llm = backend_from_json(j["llm"], base.llm);
    if (j.contains("judge")) base.judge = backend_from_json(j["judge"], base.judge);
    if (j.contains("explorer")) base.explorer = explorer_config_from_json(j["explorer"], base.explorer);
    if (j.contains("baselines")) base.baseline = baseline_config_from_json(j["baselines"], base.baseline);
    if (j.contains("decoder")) {
      const auto& d = j["decoder"];
      base.decoder.path = d.value("path", base.decoder.path);
      if (d.contains("args")) base.decoder.args = d["args"].get<std::vector<std::string>>();
      base.decoder.max_processes = d.value("max_processes", base.decoder.max_processes);
      base.decoder.jpeg_quality = d.value("jpeg_quality", base.decoder.jpeg_quality);
    }
    if (j.contains("mock")) {
      const auto& m = j["mock"];
      auto& f = base.fidelity;
      f.caption_reveals_needle = m.value("caption_reveals_needle", f.caption_reveals_needle);
      f.answer_conf_hit = m.value("answer_conf_hit", f.answer_conf_hit);
      f.answer_conf_miss = m.value("answer_conf_miss", f.answer_conf_miss);
      f.noise = m.value("noise", f.noise);
      f.calibrated = m.value("calibrated", f.calibrated);
      f.validate();
    }
    base.cache_root = j.value("cache_root", base.cache_root);
    base.out_dir = j.value("out_dir", base.out_dir);
    base.log_level = j.value("log_level", base.log_level);
    base.parallel = j.value("parallel", base.parallel);
    if (j.contains("record") && !j["record"].is_null()) base.record_path = j["record"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad config: ") + e.what());
  }
  if (base.parallel < 1) throw Error(ErrorKind::Config, "parallel must be at least 1");
  return base;
}

AppConfig load_app_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
  return app_config_from_json(j);
}

json to_json(const AppConfig& c) {
  json j{{"vlm", backend_to_json(c.vlm)},
         {"llm", backend_to_json(c.llm)},
         {"judge", backend_to_json(c.judge)},
         {"explorer", to_json(c.explorer)},
         {"baselines", to_json(c.baseline)},
         {"decoder",
          {{"path", c.decoder.path},
           {"args", c.decoder.args},
           {"max_processes", c.decoder.max_processes},
           {"jpeg_quality", c.decoder.jpeg_quality}}},
         {"mock",
          {{"caption_reveals_needle", c.fidelity.caption_reveals_needle},
           {"answer_conf_hit", c.fidelity.answer_conf_hit},
           {"answer_conf_miss", c.fidelity.answer_conf_miss},
           {"noise", c.fidelity.noise},
           {"calibrated", c.fidelity.calibrated}}},
         {"cache_root", c.cache_root},
         {"out_dir", c.out_dir},
         {"log_level", c.log_level},
         {"parallel", c.parallel}};
  j["record"] = c.record_path ? json(*c.record_path) : json(nullptr);
  return j;
}

sim::SyntheticWorld load_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot read world " + path.string());
  try {
    return sim::world_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

void save_world(const sim::SyntheticWorld& world, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
  out << sim::to_json(world).dump(2) << '\n';
}

GatewayProvider::GatewayProvider(AppConfig config) : config_(std::move(config)) {
  if (config_.record_path) writer_ = std::make_shared<TranscriptWriter>(*config_.record_path);
  // Live and replay backends are built up front so missing keys or
  // transcripts fail at startup.
  for (const auto* spec : {&config_.vlm, &config_.llm, &config_.judge}) {
    if (spec->kind != "mock") backend(*spec, nullptr);
  }
}

std::shared_ptr<Gateway> GatewayProvider::backend(const BackendSpec& spec,
                                                  const std::shared_ptr<Gateway>& mock) {
  if (spec.kind == "mock") return mock;
  const std::string key =
      spec.kind == "replay" ? "replay:" + spec.replay_path
                            : "openai:" + spec.config.endpoint_url + "|" + spec.config.model_id;
  std::lock_guard lock(mu_);
  auto it = shared_.find(key);
  if (it != shared_.end()) return it->second;
  std::shared_ptr<Gateway> g;
  if (spec.kind == "replay") {
    g = std::make_shared<ReplayGateway>(spec.replay_path);
  } else {
    ChatGatewayOptions opts;
    opts.caption_max_tokens = config_.explorer.caption_token_budget;
    opts.oq_conf_threshold = config_.explorer.oq_conf_threshold;
    g = std::make_shared<ChatGateway>(std::make_shared<OpenAiTransport>(spec.config), opts);
  }
  shared_.emplace(key, g);
  return g;
}

std::shared_ptr<Gateway> GatewayProvider::make(const std::optional<sim::SyntheticWorld>& world) {
  std::shared_ptr<Gateway> mock;
  if (config_.vlm.kind == "mock" || config_.llm.kind == "mock" || config_.judge.kind == "mock") {
    sim::SyntheticWorld w;
    if (world) {
      w = *world;
    } else {
      w.duration_s = 0.0;
    }
    mock = std::make_shared<sim::MockGateway>(std::move(w), config_.fidelity);
  }
  std::shared_ptr<Gateway> g = std::make_shared<CompositeGateway>(
      backend(config_.vlm, mock), backend(config_.llm, mock), backend(config_.judge, mock));
  if (writer_) g = std::make_shared<RecordingGateway>(g, writer_);
  return g;
}

std::shared_ptr<FrameSource> make_frame_source(const DecoderConfig& decoder) {
  return std::make_shared<DispatchFrameSource>(std::make_shared<FfmpegFrameSource>(decoder));
}

}  // namespace vas
