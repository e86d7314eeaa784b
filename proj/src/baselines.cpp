#include "vas/baselines.hpp"

#include <algorithm>

#include "vas/digest.hpp"
#include "vas/json_io.hpp"

namespace vas {

using nlohmann::json;

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Socratic: return "socratic";
    case BaselineKind::Sequential: return "sequential";
    case BaselineKind::SequentialBp: return "sequential_bp";
    case BaselineKind::IterativeSampling: return "iterative_sampling";
  }
  return "sequential";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "socratic") return BaselineKind::Socratic;
  if (s == "sequential") return BaselineKind::Sequential;
  if (s == "sequential_bp") return BaselineKind::SequentialBp;
  if (s == "iterative_sampling") return BaselineKind::IterativeSampling;
  throw Error(ErrorKind::Config, "unknown baseline '" + s + "'");
}

void BaselineConfig::validate() const {
  if (!(bp_threshold > 0.0)) throw Error(ErrorKind::Config, "bp_threshold must be positive");
  if (iter_max_rounds < 1) throw Error(ErrorKind::Config, "iter_max_rounds must be at least 1");
  if (!(clip_len_s > 0.0)) throw Error(ErrorKind::Config, "clip_len_s must be positive");
  if (caption_token_budget < 1) throw Error(ErrorKind::Config, "caption budget must be positive");
  if (!(dur_t > 0.0)) throw Error(ErrorKind::Config, "dur_t must be positive");
  schedule.at(1);
}

json to_json(const BaselineConfig& c) {
  return json{{"kind", to_string(c.kind)},
              {"bp_threshold", c.bp_threshold},
              {"iter_max_rounds", c.iter_max_rounds},
              {"clip_len_s", c.clip_len_s},
              {"caption_token_budget", c.caption_token_budget},
              {"dur_t", c.dur_t}};
}

BaselineConfig baseline_config_from_json(const json& j, BaselineConfig base) {
  if (j.contains("kind")) base.kind = baseline_kind_from_string(j.at("kind").get<std::string>());
  base.bp_threshold = j.value("bp_threshold", base.bp_threshold);
  base.iter_max_rounds = j.value("iter_max_rounds", base.iter_max_rounds);
  base.clip_len_s = j.value("clip_len_s", base.clip_len_s);
  base.caption_token_budget = j.value("caption_token_budget", base.caption_token_budget);
  base.dur_t = j.value("dur_t", base.dur_t);
  base.validate();
  return base;
}

namespace {

std::string digest_of(const json& j) { return sha256_hex(j.dump()).substr(0, 16); }

VASResult result_from(const ScoredAnswer& a, ExplorationTrace trace, Termination how) {
  VASResult r;
  r.answer = a.text;
  r.confidence = a.confidence;
  r.window = a.clip.window;
  r.trace = std::move(trace);
  r.terminated_by = how;
  return r;
}

void record(ExplorationTrace& trace, const ScoredAnswer& a) {
  ++trace.vlm_answer_calls;
  trace.frames += a.frame_count;
  trace.add(Stage::Evaluate, a.clip, digest_of(json(a)));
}

VASResult sequential_impl(const Question& question, const VideoRef& video, Gateway& gateway,
                          FrameSource& frames, const BaselineConfig& config,
                          std::optional<double> stop_above) {
  config.validate();
  video.validate();
  ExplorationTrace trace;
  std::vector<ScoredAnswer> answers;
  for (const auto& clip : segment_uniform(video, config.clip_len_s)) {
    auto a = evaluate_clip(question, video, clip, std::nullopt, gateway, frames,
                           config.schedule.at(1));
    record(trace, a);
    answers.push_back(std::move(a));
    if (stop_above && !answers.back().failed && answers.back().confidence > *stop_above) {
      return result_from(answers.back(), std::move(trace), Termination::DecisionAccept);
    }
  }
  const bool any_ok = std::any_of(answers.begin(), answers.end(),
                                  [](const ScoredAnswer& a) { return !a.failed; });
  if (!any_ok) return unanswerable_result(video, std::move(trace), Termination::CaptionsExhausted);
  const auto best = static_cast<std::size_t>(best_answer_index(answers));
  return result_from(answers[best], std::move(trace), Termination::CaptionsExhausted);
}

}  // namespace

VASResult run_socratic(const Question& question, const CaptionIndex& index, Gateway& gateway) {
  if (index.captions.empty()) {
    throw Error(ErrorKind::InvalidInput, "socratic baseline needs at least one caption");
  }
  ExplorationTrace trace;
  trace.add(Stage::Preprocess, std::nullopt, index.digest().substr(0, 16));
  const auto reply = gateway.llm_socratic_answer(question, index.summary, index.captions);
  ++trace.llm_calls;
  trace.llm_tokens += reply.tokens;

  VASResult r;
  r.answer = reply.parse_ok && !reply.parsed.answer.empty() ? reply.parsed.answer
                                                            : std::string(kUnanswerable);
  r.confidence = 0.0;
  r.window = TemporalWindow{0.0, index.video.duration_s};
  std::optional<ClipRef> cited;
  if (reply.parse_ok && reply.parsed.evidence_ordinal) {
    const int o = *reply.parsed.evidence_ordinal;
    if (o >= 0 && o < static_cast<int>(index.captions.size())) {
      cited = index.captions[static_cast<std::size_t>(o)].clip;
      r.window = cited->window;
    }
  }
  trace.add(Stage::Reason, cited, digest_of(json{{"answer", r.answer}}));
  r.trace = std::move(trace);
  r.terminated_by = Termination::DecisionAccept;
  return r;
}

VASResult run_sequential(const Question& question, const VideoRef& video, Gateway& gateway,
                         FrameSource& frames, const BaselineConfig& config) {
  return sequential_impl(question, video, gateway, frames, config, std::nullopt);
}

VASResult run_sequential_bp(const Question& question, const VideoRef& video, Gateway& gateway,
                            FrameSource& frames, const BaselineConfig& config) {
  return sequential_impl(question, video, gateway, frames, config, config.bp_threshold);
}

VASResult run_iterative_sampling(const Question& question, const VideoRef& video,
                                 Gateway& gateway, FrameSource& frames,
                                 const BaselineConfig& config) {
  config.validate();
  video.validate();
  ExplorationTrace trace;
  TemporalWindow focus{0.0, video.duration_s};
  std::vector<double> sampled;
  std::optional<ScoredAnswer> best;
  Termination how = Termination::BudgetExhausted;

  for (int round = 0; round < config.iter_max_rounds; ++round) {
    if (focus.duration() < config.dur_t) {
      how = Termination::DecisionAccept;
      break;
    }
    std::vector<double> points{focus.start_s, focus.end_s};
    for (double t : sampled) {
      if (t > focus.start_s && t < focus.end_s) points.push_back(t);
    }
    std::sort(points.begin(), points.end());
    TemporalWindow gap{points[0], points[1]};
    for (std::size_t i = 1; i + 1 < points.size(); ++i) {
      if (points[i + 1] - points[i] > gap.duration()) gap = TemporalWindow{points[i], points[i + 1]};
    }
    if (gap.duration() <= 1e-6) break;

    ClipRef clip{video.video_id, gap, 1, round, nullptr};
    auto a = evaluate_clip(question, video, clip, std::nullopt, gateway, frames,
                           config.schedule.at(1));
    const auto plan = plan_window(gap, config.schedule.at(1), video.native_fps);
    sampled.insert(sampled.end(), plan.timestamps.begin(), plan.timestamps.end());
    record(trace, a);
    if (!a.failed && (!best || a.confidence > best->confidence)) {
      best = a;
      focus = gap;
    }
  }
  if (!best) return unanswerable_result(video, std::move(trace), how);
  auto r = result_from(*best, std::move(trace), how);
  r.window = focus;
  return r;
}

}  // namespace vas
