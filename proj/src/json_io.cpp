#include "vas/json_io.hpp"

namespace vas {

using nlohmann::json;

void to_json(json& j, const TemporalWindow& w) { j = json::array({w.start_s, w.end_s}); }

void from_json(const json& j, TemporalWindow& w) {
  if (!j.is_array() || j.size() != 2) {
    throw Error(ErrorKind::Parse, "temporal window must be a [start_s, end_s] array");
  }
  w = TemporalWindow::make(j[0].get<double>(), j[1].get<double>());
}

void to_json(json& j, const VideoRef& v) {
  j = json{{"video_id", v.video_id},     {"duration_s", v.duration_s}, {"source_uri", v.source_uri},
           {"width", v.width},           {"height", v.height},         {"native_fps", v.native_fps}};
}

void from_json(const json& j, VideoRef& v) {
  v.video_id = j.at("video_id").get<std::string>();
  v.duration_s = j.at("duration_s").get<double>();
  v.source_uri = j.value("source_uri", std::string{});
  v.width = j.value("width", 0);
  v.height = j.value("height", 0);
  v.native_fps = j.value("native_fps", 0.0);
}

void to_json(json& j, const ClipRef& c) {
  j = json{{"video_id", c.video_id}, {"window", c.window}, {"level", c.level}, {"ordinal", c.ordinal}};
  if (c.parent) j["parent"] = *c.parent;
}

void from_json(const json& j, ClipRef& c) {
  c.video_id = j.at("video_id").get<std::string>();
  c.window = j.at("window").get<TemporalWindow>();
  c.level = j.at("level").get<int>();
  c.ordinal = j.at("ordinal").get<int>();
  c.parent.reset();
  if (j.contains("parent")) c.parent = std::make_shared<const ClipRef>(j.at("parent").get<ClipRef>());
}

void to_json(json& j, const Caption& c) {
  j = json{{"clip", c.clip},
           {"text", c.text},
           {"token_budget", c.token_budget},
           {"model_id", c.model_id},
           {"prompt_hash", c.prompt_hash}};
}

void from_json(const json& j, Caption& c) {
  c.clip = j.at("clip").get<ClipRef>();
  c.text = j.at("text").get<std::string>();
  c.token_budget = j.value("token_budget", 64);
  c.model_id = j.value("model_id", std::string{});
  c.prompt_hash = j.value("prompt_hash", std::string{});
}

void to_json(json& j, const Question& q) {
  j = json{{"id", q.id},
           {"text", q.text},
           {"kind", q.is_mcq() ? "mcq" : "oq"},
           {"video_id", q.video_id}};
  if (q.is_mcq()) j["options"] = q.options;
  if (q.gt_answer) j["gt_answer"] = *q.gt_answer;
  if (q.gt_window) j["gt_window"] = *q.gt_window;
  if (q.category) j["category"] = *q.category;
}

void from_json(const json& j, Question& q) {
  q.id = j.at("id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  q.kind = j.value("kind", std::string{"oq"}) == "mcq" ? QuestionKind::Mcq : QuestionKind::Open;
  q.options = q.is_mcq() ? j.at("options").get<std::vector<std::string>>() : std::vector<std::string>{};
  q.video_id = j.value("video_id", std::string{});
  q.gt_answer.reset();
  q.gt_window.reset();
  q.category.reset();
  if (j.contains("gt_answer")) q.gt_answer = j.at("gt_answer").get<std::string>();
  if (j.contains("gt_window")) q.gt_window = j.at("gt_window").get<TemporalWindow>();
  if (j.contains("category")) q.category = j.at("category").get<std::string>();
}

void to_json(json& j, const ScoredAnswer& a) {
  j = json{{"text", a.text},
           {"token_probs", a.token_probs},
           {"confidence", a.confidence},
           {"clip", a.clip},
           {"failed", a.failed},
           {"frame_count", a.frame_count}};
  if (a.caption) j["caption"] = *a.caption;
}

void from_json(const json& j, ScoredAnswer& a) {
  a.text = j.at("text").get<std::string>();
  a.token_probs = j.at("token_probs").get<std::vector<double>>();
  a.confidence = j.at("confidence").get<double>();
  a.clip = j.at("clip").get<ClipRef>();
  a.failed = j.value("failed", false);
  a.frame_count = j.value("frame_count", 0);
  a.caption.reset();
  if (j.contains("caption")) a.caption = j.at("caption").get<Caption>();
}

void to_json(json& j, const TraceEvent& e) {
  j = json{{"stage", to_string(e.stage)},
           {"payload_digest", e.payload_digest},
           {"timestamp", e.timestamp}};
  if (e.clip) {
    j["clip"] = json{{"window", e.clip->window}, {"level", e.clip->level},
                     {"root_ordinal", e.clip->root_ordinal()}};
  }
}

void from_json(const json& j, TraceEvent& e) {
  e.stage = stage_from_string(j.at("stage").get<std::string>());
  e.payload_digest = j.at("payload_digest").get<std::string>();
  e.timestamp = j.at("timestamp").get<std::uint64_t>();
  e.clip.reset();
  if (j.contains("clip")) {
    ClipRef c;
    c.window = j["clip"].at("window").get<TemporalWindow>();
    c.level = j["clip"].at("level").get<int>();
    c.ordinal = j["clip"].at("root_ordinal").get<int>();
    e.clip = c;
  }
}

void to_json(json& j, const ExplorationTrace& t) {
  j = json{{"events", t.events},
           {"vlm_answer_calls", t.vlm_answer_calls},
           {"llm_calls", t.llm_calls},
           {"llm_tokens", t.llm_tokens},
           {"frames", t.frames}};
}

void from_json(const json& j, ExplorationTrace& t) {
  t.events = j.at("events").get<std::vector<TraceEvent>>();
  t.vlm_answer_calls = j.at("vlm_answer_calls").get<int>();
  t.llm_calls = j.at("llm_calls").get<int>();
  t.llm_tokens = j.at("llm_tokens").get<long>();
  t.frames = j.value("frames", 0L);
}

void to_json(json& j, const VASResult& r) {
  j = result_summary(r);
  j["trace"] = r.trace;
}

void from_json(const json& j, VASResult& r) {
  r.answer = j.at("answer").get<std::string>();
  r.confidence = j.at("confidence").get<double>();
  r.window = j.at("window").get<TemporalWindow>();
  r.terminated_by = termination_from_string(j.at("terminated_by").get<std::string>());
  if (j.contains("trace")) r.trace = j.at("trace").get<ExplorationTrace>();
}

json result_summary(const VASResult& r) {
  return json{{"answer", r.answer},
              {"confidence", r.confidence},
              {"window", r.window},
              {"terminated_by", to_string(r.terminated_by)},
              {"cost",
               {{"vlm_calls", r.trace.vlm_answer_calls},
                {"llm_calls", r.trace.llm_calls},
                {"llm_tokens", r.trace.llm_tokens},
                {"frames", r.trace.frames}}}};
}

}  // namespace vas
