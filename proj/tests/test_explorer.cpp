#include <doctest.h>

#include <filesystem>

#include "vas/confidence.hpp"
#include "vas/explorer.hpp"
#include "vas/sim.hpp"
#include "scripted_gateway.hpp"

using namespace vas;
using vas::testing::ScriptedGateway;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

VideoRef video(double duration) { return VideoRef{"v", duration, "sim://v", 1280, 720, 30}; }

Question oq() { return Question{"q", "What color?", QuestionKind::Open, {}, {}, {}, {}, "v"}; }
Question mcq() {
  return Question{"q", "Which?", QuestionKind::Mcq, {"a", "b", "c", "d"}, {}, {}, {}, "v"};
}

CaptionIndex make_index(double duration) {
  CaptionIndex idx;
  idx.video = video(duration);
  for (const auto& c : segment_uniform(idx.video, 60)) {
    idx.captions.push_back(Caption{c, "clip " + std::to_string(c.ordinal), 64, "m", "h"});
  }
  idx.summary = "summary";
  idx.model_id = "m";
  idx.prompt_hash = "h";
  return idx;
}

ScoredAnswer answer_at(double start, double conf, int level = 1) {
  ClipRef c{"v", TemporalWindow{start, start + 60.0 / (level == 1 ? 1 : level == 2 ? 3 : 12)}, level, 0, nullptr};
  return make_scored_answer("red", {conf}, c);
}

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vas_test_explorer_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("explorer presets and validation") {
  CHECK(ExplorerConfig::pro().it_max == 45);
  CHECK(ExplorerConfig::flash().it_max == 10);
  CHECK(ExplorerConfig::pro().dur_t() == 5.0);
  auto c = ExplorerConfig::pro();
  c.it_max = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ExplorerConfig::pro();
  c.level_durations = {60, 30, 40};
  CHECK_THROWS_AS(c.validate(), Error);

  auto j = to_json(ExplorerConfig::flash());
  j["oq_conf_threshold"] = 0.7;
  const auto back = explorer_config_from_json(j);
  CHECK(back.it_max == 10);
  CHECK(back.oq_conf_threshold == 0.7);
  CHECK(back.schedule.at(3).frame_count == ExplorerConfig::pro().schedule.at(3).frame_count);
}

TEST_CASE("caption index format and cache") {
  auto idx = make_index(150);
  idx.created_at = "2026-01-01T00:00:00Z";
  CHECK_NOTHROW(idx.validate());
  const auto text = caption_index_jsonl(idx);
  const auto back = parse_caption_index_jsonl(text, idx.video);
  REQUIRE(back.captions.size() == 3);
  CHECK(back.captions[2].clip.window == TemporalWindow{120, 150});
  CHECK(back.summary == "summary");
  CHECK(back.digest() == idx.digest());
  auto later = idx;
  later.created_at = "2026-02-02T00:00:00Z";
  CHECK(later.digest() == idx.digest());
  later.captions[1].text = "changed";
  CHECK(later.digest() != idx.digest());

  auto broken = idx;
  broken.captions.erase(broken.captions.begin());
  CHECK_THROWS_AS(broken.validate(), Error);

  const auto root = scratch_dir("cache");
  CaptionCache cache(root);
  CHECK_FALSE(cache.load(idx.video, "m", "h"));
  const auto path = cache.store(idx);
  CHECK(path == cache.path_for("v", "m", "h"));
  CHECK(fs::exists(path));
  const auto loaded = cache.load(idx.video, "m", "h");
  REQUIRE(loaded);
  CHECK(loaded->digest() == idx.digest());
  fs::remove_all(root);
}

TEST_CASE("preprocess captions every clip and reuses the cache") {
  ScriptedGateway g;
  NullFrameSource frames;
  const auto root = scratch_dir("pre");
  CaptionCache cache(root);
  const auto cfg = ExplorerConfig::pro();
  PreprocessStats s1;
  const auto idx = preprocess(video(600), g, frames, cfg, &cache, &s1);
  CHECK(idx.captions.size() == 10);
  CHECK(s1.vlm_calls == 10);
  CHECK(s1.llm_calls == 1);
  CHECK(idx.summary == "summary");

  PreprocessStats s2;
  const auto again = preprocess(video(600), g, frames, cfg, &cache, &s2);
  CHECK(s2.cached_captions == 10);
  CHECK(s2.vlm_calls == 0);
  CHECK(again.digest() == idx.digest());
  fs::remove_all(root);
}

TEST_CASE("preprocess tolerates a few failed captions") {
  ScriptedGateway g;
  NullFrameSource frames;
  g.caption = [](const VlmRequest& r) -> std::string {
    if (r.frames.front().timestamp_s < 60) throw Error(ErrorKind::EmptyCaption, "blank");
    return "ok";
  };
  PreprocessStats s;
  const auto idx = preprocess(video(600), g, frames, ExplorerConfig::pro(), nullptr, &s);
  CHECK(s.failed_captions == 1);
  CHECK(idx.captions[0].text == kPlaceholderCaption);

  g.caption = [](const VlmRequest& r) -> std::string {
    if (r.frames.front().timestamp_s < 180) throw Error(ErrorKind::BackendUnavailable, "down");
    return "ok";
  };
  try {
    preprocess(video(600), g, frames, ExplorerConfig::pro());
    FAIL("expected a preprocess error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Preprocess);
  }
}

TEST_CASE("MCQ decisions are a pure confidence check") {
  ScriptedGateway g;
  ExplorationTrace trace;
  const auto cfg = ExplorerConfig::pro();
  const auto d = decide(mcq(), "s", {answer_at(0, 0.5), answer_at(60, 0.93), answer_at(120, 0.95)},
                        cfg, g, trace);
  CHECK(d.accept == 2);
  CHECK(d.promising.empty());
  CHECK(g.decide_calls == 0);

  auto failed = make_failed_answer(answer_at(180, 0).clip);
  const auto none = decide(mcq(), "s", {answer_at(0, 0.5), failed, answer_at(120, 0.899)}, cfg, g, trace);
  CHECK_FALSE(none.accept);
  CHECK(none.promising == std::vector<int>{0, 2});
  CHECK(trace.count(Stage::Decide) == 2);
}

TEST_CASE("OQ accepts below the threshold are rejected") {
  ScriptedGateway g;
  g.on_decide = [](const std::vector<ScoredAnswer>&) { return Decision{0, {1, 7, 1}}; };
  ExplorationTrace trace;
  const auto cfg = ExplorerConfig::pro();
  const auto low = decide(oq(), "s", {answer_at(0, 0.79), answer_at(60, 0.2)}, cfg, g, trace);
  CHECK_FALSE(low.accept);
  CHECK(low.promising == std::vector<int>{1});
  const auto high = decide(oq(), "s", {answer_at(0, 0.8), answer_at(60, 0.2)}, cfg, g, trace);
  CHECK(high.accept == 0);
  CHECK(high.promising.empty());
  CHECK(g.decide_calls == 2);
  CHECK(trace.llm_calls == 2);
}

TEST_CASE("evaluation failures become failed answers") {
  ScriptedGateway g;
  NullFrameSource frames;
  const auto clip = segment_uniform(video(120), 60)[0];
  g.answer = [](const VlmRequest&) -> RawAnswer { throw Error(ErrorKind::BackendUnavailable, "x"); };
  const auto a = evaluate_clip(oq(), video(120), clip, std::nullopt, g, frames, LevelSampling{4, {8, 8}});
  CHECK(a.failed);
  CHECK(a.confidence == 0.0);

  g.answer = [](const VlmRequest&) { return RawAnswer{"red", {}}; };
  CHECK_THROWS_AS(evaluate_clip(oq(), video(120), clip, std::nullopt, g, frames, LevelSampling{4, {8, 8}}),
                  Error);

  g.answer = [](const VlmRequest& r) {
    CHECK(r.frames.size() == 4);
    return RawAnswer{"red", {0.9, 0.4}};
  };
  const auto ok = evaluate_clip(oq(), video(120), clip, std::nullopt, g, frames, LevelSampling{4, {8, 8}});
  CHECK(ok.confidence == doctest::Approx(std::sqrt(0.36)));
  CHECK(ok.frame_count == 4);
}

TEST_CASE("exploration zooms into promising clips and accepts") {
  // Target at [125, 130): level-1 clip 2, level-2 [120, 140), level-3 [125, 130).
  ScriptedGateway g;
  NullFrameSource frames;
  g.select = [](const std::vector<Caption>& c) {
    std::vector<int> out;
    for (const auto& cap : c) {
      if (cap.clip.ordinal == 2 || cap.clip.ordinal == 5) out.push_back(cap.clip.ordinal);
    }
    return out;
  };
  g.answer = [](const VlmRequest& r) {
    const TemporalWindow w = *r.clip_window;
    const bool hit = w.start_s <= 125 && w.end_s >= 130;
    return RawAnswer{hit ? "red" : "unknown", {hit ? 0.95 : 0.2}};
  };
  g.on_decide = [](const std::vector<ScoredAnswer>& e) {
    Decision d;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i].confidence < 0.5) continue;
      if (e[i].clip.level == 3) {
        d.accept = static_cast<int>(i);
      } else {
        d.promising.push_back(static_cast<int>(i));
      }
    }
    return d;
  };
  const auto idx = make_index(600);
  const auto r = explore(oq(), idx, ExplorerConfig::pro(), g, frames);
  CHECK(r.answer == "red");
  CHECK(r.window == TemporalWindow{125, 130});
  CHECK(r.terminated_by == Termination::DecisionAccept);
  // 2 level-1 + 3 level-2 + 4 level-3
  CHECK(r.trace.vlm_answer_calls == 9);
  CHECK(r.trace.count(Stage::Evaluate) == 9);
  CHECK(r.trace.events.front().stage == Stage::Preprocess);
  CHECK(r.trace.count(Stage::Reason) == 1);
  CHECK(r.trace.frames == 2 * 30 + 3 * 20 + 4 * 10);
}

TEST_CASE("budget caps evaluations") {
  ScriptedGateway g;
  NullFrameSource frames;
  g.on_decide = [](const std::vector<ScoredAnswer>& e) {
    Decision d;
    for (std::size_t i = 0; i < e.size(); ++i) d.promising.push_back(static_cast<int>(i));
    return d;
  };
  auto cfg = ExplorerConfig::flash();
  const auto r = explore(oq(), make_index(3600), cfg, g, frames);
  CHECK(r.trace.vlm_answer_calls == 10);
  CHECK(g.answer_calls == 10);
  CHECK(r.terminated_by == Termination::BudgetExhausted);
  CHECK(r.trace.count(Stage::FinalPick) == 1);

  cfg = ExplorerConfig::pro();
  cfg.eval_parallelism = 4;
  const auto p = explore(oq(), make_index(3600), cfg, g, frames);
  CHECK(p.trace.vlm_answer_calls == 45);
}

TEST_CASE("exhausted captions end the search") {
  ScriptedGateway g;
  NullFrameSource frames;
  const auto r = explore(oq(), make_index(300), ExplorerConfig::pro(), g, frames);
  CHECK(r.terminated_by == Termination::CaptionsExhausted);
  CHECK(r.trace.vlm_answer_calls == 5);

  g.select = [](const std::vector<Caption>&) { return std::vector<int>{99, -1}; };
  const auto none = explore(oq(), make_index(300), ExplorerConfig::pro(), g, frames);
  CHECK(none.answer == kUnanswerable);
  CHECK(none.trace.vlm_answer_calls == 0);
}

TEST_CASE("mismatched index and question") {
  ScriptedGateway g;
  NullFrameSource frames;
  auto q = oq();
  q.video_id = "other";
  CHECK_THROWS_AS(explore(q, make_index(300), ExplorerConfig::pro(), g, frames), Error);
}

TEST_CASE("simulated world end to end") {
  const auto world = sim::generate_world(9);
  sim::MockGateway g(world);
  NullFrameSource frames;
  const auto cfg = ExplorerConfig::pro();
  const auto idx = preprocess(world.video(), g, frames, cfg);
  const auto r = explore(world.question, idx, cfg, g, frames);
  CHECK(r.answer == *world.question.gt_answer);
  CHECK(r.window.overlaps(world.needle()->window));
  CHECK(r.trace.vlm_answer_calls <= 45);
}
