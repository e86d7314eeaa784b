// Command-line front end: preprocess, ask, bench, calibrate, simulate.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/base_sink.h>
#include <spdlog/spdlog.h>

#include "vas/app.hpp"
#include "vas/baselines.hpp"
#include "vas/confidence.hpp"
#include "vas/eval.hpp"
#include "vas/explorer.hpp"
#include "vas/json_io.hpp"
#include "vas/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class JsonLineSink final : public spdlog::sinks::base_sink<std::mutex> {
 protected:
  void sink_it_(const spdlog::details::log_msg& msg) override {
    const auto secs = std::chrono::duration<double>(msg.time.time_since_epoch()).count();
    json j{{"ts", secs},
           {"level", std::string(spdlog::level::to_string_view(msg.level).data(),
                                 spdlog::level::to_string_view(msg.level).size())},
           {"msg", std::string(msg.payload.data(), msg.payload.size())}};
    std::cerr << j.dump() << '\n';
  }
  void flush_() override { std::cerr.flush(); }
};

void setup_logging(const std::string& level) {
  auto logger = std::make_shared<spdlog::logger>("vas", std::make_shared<JsonLineSink>());
  logger->set_level(spdlog::level::from_str(level));
  spdlog::set_default_logger(logger);
}

struct GlobalFlags {
  std::string config;
  std::string vlm, llm, judge;
  std::string cache_root, out;
  int parallel = 0;
  int it_max = 0;
  std::string log_level;
  std::string record;
};

vas::AppConfig resolve(const GlobalFlags& f, CLI::App& app) {
  vas::AppConfig c = f.config.empty() ? vas::AppConfig{} : vas::load_app_config(f.config);
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--vlm")) c.vlm = vas::parse_backend_flag(f.vlm, c.vlm);
  if (given("--llm")) c.llm = vas::parse_backend_flag(f.llm, c.llm);
  if (given("--judge")) c.judge = vas::parse_backend_flag(f.judge, c.judge);
  if (given("--cache-root")) c.cache_root = f.cache_root;
  if (given("--out")) c.out_dir = f.out;
  if (given("--parallel")) c.parallel = f.parallel;
  if (given("--it-max")) {
    c.explorer.it_max = f.it_max;
    c.explorer.validate();
  }
  if (given("--log-level")) c.log_level = f.log_level;
  if (given("--record")) c.record_path = f.record;
  return c;
}

/// Resolves a video argument: a file path, or a sim:// URI backed by a world.
vas::VideoRef resolve_video(const std::string& uri, const std::optional<vas::sim::SyntheticWorld>& world,
                            const vas::DecoderConfig& decoder) {
  if (uri.rfind(vas::kSimScheme, 0) == 0) {
    if (!world) {
      throw vas::Error(vas::ErrorKind::InvalidInput, "simulated video '" + uri + "' needs --world");
    }
    return world->video();
  }
  return vas::probe_video(uri, decoder);
}

std::optional<vas::sim::SyntheticWorld> maybe_world(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return vas::load_world(path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw vas::Error(vas::ErrorKind::Config, "cannot write " + path.string());
  out << text;
}

vas::ExplorerConfig explorer_for(vas::Agent agent, const vas::AppConfig& c, bool it_max_given) {
  auto cfg = c.explorer;
  if (agent == vas::Agent::FalconeyeFlash && !it_max_given) cfg.it_max = vas::ExplorerConfig::flash().it_max;
  return cfg;
}

int cmd_preprocess(const vas::AppConfig& c, const std::string& video_uri, const std::string& world_path) {
  const auto world = maybe_world(world_path);
  const auto video = resolve_video(video_uri, world, c.decoder);
  vas::GatewayProvider provider(c);
  auto gateway = provider.make(world);
  auto frames = vas::make_frame_source(c.decoder);
  vas::CaptionCache cache(c.cache_root);
  vas::PreprocessStats stats;
  const auto index = vas::preprocess(video, *gateway, *frames, c.explorer, &cache, &stats);
  const auto path = cache.path_for(video.video_id, index.model_id, index.prompt_hash);
  if (stats.vlm_calls == 0) spdlog::info("cached: all {} captions reused", stats.cached_captions);
  std::cout << json{{"index", path.string()},
                    {"captions", index.captions.size()},
                    {"cached", stats.cached_captions},
                    {"vlm_calls", stats.vlm_calls},
                    {"failed", stats.failed_captions}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_ask(const vas::AppConfig& c, const std::string& video_uri, const std::string& text,
            const std::vector<std::string>& options, const std::string& agent_name,
            const std::string& world_path, bool it_max_given, bool full) {
  const auto world = maybe_world(world_path);
  const auto video = resolve_video(video_uri, world, c.decoder);
  vas::Question q;
  if (world && (text.empty() || world->question.text == text)) {
    q = world->question;
  } else {
    q.id = "ask";
    q.text = text;
    q.video_id = video.video_id;
    if (!options.empty()) {
      q.kind = vas::QuestionKind::Mcq;
      q.options = options;
    }
  }
  if (q.text.empty()) throw vas::Error(vas::ErrorKind::InvalidInput, "question text is empty");
  q.validate();
  const auto agent = vas::agent_from_string(agent_name);
  vas::GatewayProvider provider(c);
  auto gateway = provider.make(world);
  auto frames = vas::make_frame_source(c.decoder);
  vas::CaptionCache cache(c.cache_root);
  const auto cfg = explorer_for(agent, c, it_max_given);

  vas::VASResult r;
  switch (agent) {
    case vas::Agent::FalconeyePro:
    case vas::Agent::FalconeyeFlash:
      r = vas::explore(q, vas::preprocess(video, *gateway, *frames, cfg, &cache), cfg, *gateway, *frames);
      break;
    case vas::Agent::Socratic:
    case vas::Agent::SocraticShort: {
      auto pcfg = cfg;
      if (agent == vas::Agent::Socratic) pcfg.caption_token_budget = c.baseline.caption_token_budget;
      r = vas::run_socratic(q, vas::preprocess(video, *gateway, *frames, pcfg, &cache), *gateway);
      break;
    }
    case vas::Agent::Sequential:
      r = vas::run_sequential(q, video, *gateway, *frames, c.baseline);
      break;
    case vas::Agent::SequentialBp:
      r = vas::run_sequential_bp(q, video, *gateway, *frames, c.baseline);
      break;
    case vas::Agent::IterativeSampling:
      r = vas::run_iterative_sampling(q, video, *gateway, *frames, c.baseline);
      break;
  }
  std::cout << (full ? json(r) : vas::result_summary(r)).dump(2) << '\n';
  return 0;
}

int cmd_bench(const vas::AppConfig& c, const std::string& dataset_dir, const std::string& agent_name,
              bool deterministic, bool it_max_given) {
  const auto items = vas::load_dataset(dataset_dir, c.decoder);
  vas::BenchOptions opts;
  opts.agent = vas::agent_from_string(agent_name);
  opts.explorer = explorer_for(opts.agent, c, it_max_given);
  opts.baseline = c.baseline;
  opts.parallelism = c.parallel;
  opts.deterministic = deterministic;
  opts.cache_root = c.cache_root;
  if (items.empty()) spdlog::warn("dataset {} has no items", dataset_dir);

  vas::GatewayProvider provider(c);
  const fs::path worlds = fs::path(dataset_dir) / "worlds";
  auto factory = [&](const vas::BenchItem& item) {
    std::optional<vas::sim::SyntheticWorld> world;
    const auto wp = worlds / (item.video.video_id + ".json");
    if (fs::exists(wp)) world = vas::load_world(wp);
    return provider.make(world);
  };
  auto frames = vas::make_frame_source(c.decoder);
  const auto report = vas::run_benchmark(items, opts, factory, *frames);
  vas::write_report(report, c.out_dir);
  std::cout << vas::report_table(report);
  spdlog::info("report written to {}", (fs::path(c.out_dir) / "report.json").string());
  return report.exit_code();
}

std::vector<vas::Prediction> predictions_from_dir(const fs::path& dir) {
  std::vector<vas::Prediction> preds;
  const auto report = dir / "report.json";
  if (fs::exists(report)) {
    std::ifstream in(report);
    const auto j = json::parse(in);
    for (const auto& item : j.at("items")) {
      if (!item.value("ok", false)) continue;
      preds.push_back({item.at("confidence").get<double>(), item.at("accuracy").get<int>() == 100});
    }
    return preds;
  }
  throw vas::Error(vas::ErrorKind::InvalidInput,
                   "no report.json with judged results in " + dir.string());
}

int cmd_calibrate(const vas::AppConfig& c, const std::string& predictions_file,
                  const std::string& traces_dir, int bins, const std::vector<double>& thresholds) {
  std::vector<vas::Prediction> preds;
  if (!traces_dir.empty()) {
    preds = predictions_from_dir(traces_dir);
  } else if (!predictions_file.empty()) {
    preds = vas::read_predictions_jsonl(predictions_file);
  } else {
    throw vas::Error(vas::ErrorKind::InvalidInput, "give a predictions file or --from-traces");
  }
  if (preds.empty()) throw vas::Error(vas::ErrorKind::InvalidInput, "no predictions to calibrate");
  const auto report = vas::calibration_report(preds, bins, thresholds);
  const fs::path out = c.out_dir;
  write_text(out / "calibration.json", vas::to_json(report).dump(2) + "\n");
  write_text(out / "calibration_bins.csv", vas::bins_csv(report.bins));
  std::cout << json{{"n", preds.size()}, {"ace", report.ace}, {"mce", report.mce}, {"brier", report.brier}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_simulate(int n, std::uint64_t seed, const std::string& out_dir, double duration,
                 bool mcq) {
  if (n < 0) throw vas::Error(vas::ErrorKind::InvalidInput, "--n must be non-negative");
  if (n == 0) spdlog::warn("--n 0 writes an empty dataset");
  const fs::path out = out_dir;
  fs::create_directories(out / "worlds");
  std::string lines;
  vas::sim::WorldConfig wc;
  wc.duration_s = duration;
  wc.mcq = mcq;
  for (int i = 0; i < n; ++i) {
    const auto world = vas::sim::generate_world(seed + static_cast<std::uint64_t>(i), wc);
    vas::save_world(world, out / "worlds" / (world.video_id() + ".json"));
    vas::BenchItem item{world.question, world.video(), "sim"};
    lines += vas::bench_item_json(item).dump() + "\n";
  }
  write_text(out / "questions.jsonl", lines);
  std::cout << json{{"dataset", out.string()}, {"items", n}}.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video answer search: find an answer and the time window that supports it."};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--vlm", g.vlm, "VLM backend: mock | replay:<path> | openai");
  app.add_option("--llm", g.llm, "LLM backend: mock | replay:<path> | openai");
  app.add_option("--judge", g.judge, "judge backend: mock | replay:<path> | openai");
  app.add_option("--cache-root", g.cache_root, "caption cache directory");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--parallel", g.parallel, "concurrent benchmark items");
  app.add_option("--it-max", g.it_max, "VLM evaluation budget per question");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error");
  app.add_option("--record", g.record, "append every gateway call to this transcript");

  std::string video, question, world, agent = "falconeye-pro", dataset, predictions, traces;
  std::vector<std::string> options;
  std::vector<double> thresholds{0.9};
  bool deterministic = false, full = false, mcq = false;
  int n = 0, bins = 10;
  std::uint64_t seed = 0;
  double duration = 3600.0;

  auto* pre = app.add_subcommand("preprocess", "caption a video and cache the index");
  pre->add_option("video", video, "video file or sim:// URI")->required();
  pre->add_option("--world", world, "world file for sim:// videos");

  auto* ask = app.add_subcommand("ask", "answer a question about a video");
  ask->add_option("video", video, "video file or sim:// URI")->required();
  ask->add_option("question", question, "question text; defaults to the world's question");
  ask->add_option("--options", options, "four comma-separated options")->delimiter(',');
  ask->add_option("--agent", agent, "falconeye-pro|falconeye-flash|socratic|socratic-short|"
                                    "sequential|sequential_bp|iterative_sampling");
  ask->add_option("--world", world, "world file for sim:// videos");
  ask->add_flag("--full", full, "print the full result including the trace");

  auto* bench = app.add_subcommand("bench", "run an agent over a dataset directory");
  bench->add_option("dataset", dataset, "directory holding questions.jsonl")->required();
  bench->add_option("--agent", agent, "agent name");
  bench->add_flag("--deterministic", deterministic, "zero wall-clock fields in the report");

  auto* cal = app.add_subcommand("calibrate", "reliability bins and calibration errors");
  cal->add_option("predictions", predictions, "JSONL of {confidence, correct}");
  cal->add_option("--from-traces", traces, "benchmark output directory");
  cal->add_option("--bins", bins, "number of bins");
  cal->add_option("--thresholds", thresholds, "CC thresholds")->delimiter(',');

  auto* simc = app.add_subcommand("simulate", "write simulated worlds as a dataset");
  simc->add_option("out_dir", dataset, "dataset directory")->required();
  simc->add_option("--n", n, "number of worlds")->required();
  simc->add_option("--seed", seed, "first world seed");
  simc->add_option("--duration", duration, "world duration in seconds");
  simc->add_flag("--mcq", mcq, "multiple-choice questions");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(g, app);
    setup_logging(cfg.log_level);
    const bool it_max_given = app.count("--it-max") > 0;
    if (*pre) return cmd_preprocess(cfg, video, world);
    if (*ask) return cmd_ask(cfg, video, question, options, agent, world, it_max_given, full);
    if (*bench) return cmd_bench(cfg, dataset, agent, deterministic, it_max_given);
    if (*cal) return cmd_calibrate(cfg, predictions, traces, bins, thresholds);
    if (*simc) return cmd_simulate(n, seed, dataset, duration, mcq);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
