#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vas/baselines.hpp"
#include "vas/confidence.hpp"
#include "vas/eval.hpp"
#include "vas/explorer.hpp"
#include "vas/json_io.hpp"
#include "vas/sim.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace vas;

namespace {

using Window = std::pair<double, double>;

TemporalWindow window(const Window& w) { return TemporalWindow::make(w.first, w.second); }

Aggregator aggregator_from(const std::string& name) {
  if (name == "geometric") return Aggregator::Geometric;
  if (name == "likelihood") return Aggregator::Likelihood;
  if (name == "arithmetic") return Aggregator::Arithmetic;
  throw Error(ErrorKind::InvalidInput, "unknown aggregator '" + name + "'");
}

std::vector<Window> windows_of(const std::vector<ClipRef>& clips) {
  std::vector<Window> out;
  for (const auto& c : clips) out.emplace_back(c.window.start_s, c.window.end_s);
  return out;
}

/// Rebuilds the ancestor chain of a window so child_windows sees its level.
ClipRef clip_at_level(const Window& w, int level) {
  if (level < 1 || level > 3) throw Error(ErrorKind::InvalidLevel, "level must be 1, 2 or 3");
  ClipRef c{"v", window(w), 1, 0, nullptr};
  for (int l = 2; l <= level; ++l) {
    auto parent = std::make_shared<const ClipRef>(c);
    c = ClipRef{"v", window(w), l, 0, parent};
  }
  return c;
}

std::string generate_world_json(std::uint64_t seed, bool mcq, bool adversarial, double duration) {
  sim::WorldConfig cfg;
  cfg.mcq = mcq;
  cfg.adversarial = adversarial;
  cfg.duration_s = duration;
  return sim::to_json(sim::generate_world(seed, cfg)).dump();
}

BenchOptions options_for(const std::string& agent, int it_max) {
  BenchOptions o;
  o.agent = agent_from_string(agent);
  o.explorer = o.agent == Agent::FalconeyeFlash ? ExplorerConfig::flash() : ExplorerConfig::pro();
  if (it_max > 0) o.explorer.it_max = it_max;
  if (o.agent == Agent::Socratic) o.baseline.kind = BaselineKind::Socratic;
  if (o.agent == Agent::SocraticShort) {
    o.baseline.kind = BaselineKind::Socratic;
    o.baseline.caption_token_budget = 64;
  }
  o.deterministic = true;
  o.parallelism = 1;
  return o;
}

std::string simulate_ask(const std::string& world_json, const std::string& agent, int it_max) {
  const auto world = sim::world_from_json(json::parse(world_json));
  sim::MockGateway gateway(world);
  NullFrameSource frames;
  std::optional<VASResult> result;
  const auto rec = run_item(BenchItem{world.question, world.video(), "sim"},
                            options_for(agent, it_max), gateway, frames, &result);
  json out{{"record", to_json(rec)}};
  if (result) out["result"] = result_summary(*result);
  return out.dump();
}

std::string simulate_bench(std::uint64_t seed, int n, const std::string& agent, bool mcq,
                           int it_max) {
  sim::WorldConfig cfg;
  cfg.mcq = mcq;
  std::vector<BenchItem> items;
  std::map<std::string, sim::SyntheticWorld> worlds;
  for (int i = 0; i < n; ++i) {
    auto w = sim::generate_world(seed + static_cast<std::uint64_t>(i), cfg);
    items.push_back(BenchItem{w.question, w.video(), "sim"});
    worlds.emplace(w.video_id(), std::move(w));
  }
  NullFrameSource frames;
  const auto report = run_benchmark(
      items, options_for(agent, it_max),
      [&](const BenchItem& it) -> std::shared_ptr<Gateway> {
        return std::make_shared<sim::MockGateway>(worlds.at(it.video.video_id));
      },
      frames);
  return to_json(report).dump();
}

}  // namespace

PYBIND11_MODULE(_vas, m) {
  m.doc() = "Video answer search core";

  static py::exception<Error> vas_error(m, "VasError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = vas_error;
      py::object inst = exc(e.what());
      inst.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(vas_error.ptr(), inst.ptr());
    }
  });

  m.def(
      "aggregate",
      [](const std::vector<double>& probs, const std::string& method) {
        return aggregate(probs, aggregator_from(method));
      },
      py::arg("probs"), py::arg("method") = "geometric");

  m.def(
      "calibration_report",
      [](const std::vector<double>& confidence, const std::vector<bool>& correct, int bins,
         const std::vector<double>& thresholds) {
        if (confidence.size() != correct.size()) {
          throw Error(ErrorKind::InvalidInput, "confidence and correct differ in length");
        }
        std::vector<Prediction> preds;
        for (std::size_t i = 0; i < confidence.size(); ++i) preds.push_back({confidence[i], correct[i]});
        return to_json(calibration_report(preds, bins, thresholds)).dump();
      },
      py::arg("confidence"), py::arg("correct"), py::arg("bins") = 10,
      py::arg("thresholds") = std::vector<double>{0.9});

  m.def("gtou", [](const Window& pred, const Window& gt) { return gtou(window(pred), window(gt)); },
        py::arg("pred"), py::arg("gt"));
  m.def("iou", [](const Window& pred, const Window& gt) { return iou(window(pred), window(gt)); },
        py::arg("pred"), py::arg("gt"));

  m.def(
      "segment",
      [](double duration, double clip_len) {
        return windows_of(segment_uniform(VideoRef{"v", duration, "", 0, 0, 0}, clip_len));
      },
      py::arg("duration"), py::arg("clip_len") = kDefaultLevelDurations[0]);

  m.def(
      "child_windows",
      [](const Window& w, int level) { return windows_of(child_windows(clip_at_level(w, level))); },
      py::arg("window"), py::arg("level") = 1);

  m.def(
      "sample_timestamps",
      [](const Window& w, int frame_count, double native_fps) {
        return plan_window(window(w), LevelSampling{frame_count, {}}, native_fps).timestamps;
      },
      py::arg("window"), py::arg("frame_count"), py::arg("native_fps") = 0.0);

  m.def("generate_world", &generate_world_json, py::arg("seed"), py::arg("mcq") = false,
        py::arg("adversarial") = false, py::arg("duration") = 3600.0);
  m.def("simulate_ask", &simulate_ask, py::arg("world"), py::arg("agent") = "falconeye-pro",
        py::arg("it_max") = 0, py::call_guard<py::gil_scoped_release>());
  m.def("simulate_bench", &simulate_bench, py::arg("seed"), py::arg("n"),
        py::arg("agent") = "falconeye-pro", py::arg("mcq") = false, py::arg("it_max") = 0,
        py::call_guard<py::gil_scoped_release>());
}
