#include "vas/explorer.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "vas/confidence.hpp"
#include "vas/digest.hpp"
#include "vas/json_io.hpp"
#include "vas/prompts.hpp"

namespace vas {

using nlohmann::json;

ExplorerConfig ExplorerConfig::pro() { return ExplorerConfig{}; }

ExplorerConfig ExplorerConfig::flash() {
  ExplorerConfig c;
  c.it_max = 10;
  return c;
}

void ExplorerConfig::validate() const {
  if (it_max < 1) throw Error(ErrorKind::Config, "it_max must be at least 1");
  for (std::size_t i = 0; i < level_durations.size(); ++i) {
    if (!(level_durations[i] > 0.0) || (i > 0 && !(level_durations[i] < level_durations[i - 1]))) {
      throw Error(ErrorKind::Config, "level durations must be positive and strictly decreasing");
    }
  }
  for (double t : {oq_conf_threshold, mcq_conf_threshold}) {
    if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorKind::Config, "thresholds must lie in (0, 1]");
  }
  if (max_candidates_per_round < 1) {
    throw Error(ErrorKind::Config, "max_candidates_per_round must be at least 1");
  }
  if (caption_token_budget < 1) throw Error(ErrorKind::Config, "caption budget must be positive");
  schedule.validate();
  for (int level = 1; level <= 3; ++level) schedule.at(level);
}

json to_json(const ExplorerConfig& c) {
  json levels = json::object();
  for (const auto& [level, s] : c.schedule.levels) {
    levels[std::to_string(level)] = json{{"frames", s.frame_count},
                                         {"width", s.resolution.width},
                                         {"height", s.resolution.height}};
  }
  return json{{"it_max", c.it_max},
              {"level_durations", c.level_durations},
              {"oq_conf_threshold", c.oq_conf_threshold},
              {"mcq_conf_threshold", c.mcq_conf_threshold},
              {"max_candidates_per_round", c.max_candidates_per_round},
              {"eval_parallelism", c.eval_parallelism},
              {"caption_token_budget", c.caption_token_budget},
              {"schedule",
               {{"levels", levels},
                {"caption_pass",
                 {{"frames", c.schedule.caption_pass.frame_count},
                  {"width", c.schedule.caption_pass.resolution.width},
                  {"height", c.schedule.caption_pass.resolution.height}}}}}};
}

namespace {

LevelSampling sampling_from_json(const json& j, LevelSampling base) {
  base.frame_count = j.value("frames", base.frame_count);
  base.resolution.width = j.value("width", base.resolution.width);
  base.resolution.height = j.value("height", base.resolution.height);
  return base;
}

}  // namespace

ExplorerConfig explorer_config_from_json(const json& j, ExplorerConfig base) {
  base.it_max = j.value("it_max", base.it_max);
  if (j.contains("level_durations")) {
    base.level_durations = j.at("level_durations").get<std::array<double, 3>>();
  }
  base.oq_conf_threshold = j.value("oq_conf_threshold", base.oq_conf_threshold);
  base.mcq_conf_threshold = j.value("mcq_conf_threshold", base.mcq_conf_threshold);
  base.max_candidates_per_round = j.value("max_candidates_per_round", base.max_candidates_per_round);
  base.eval_parallelism = j.value("eval_parallelism", base.eval_parallelism);
  base.caption_token_budget = j.value("caption_token_budget", base.caption_token_budget);
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    if (s.contains("levels")) {
      for (const auto& [key, v] : s["levels"].items()) {
        const int level = std::stoi(key);
        base.schedule.levels[level] = sampling_from_json(v, base.schedule.levels[level]);
      }
    }
    if (s.contains("caption_pass")) {
      base.schedule.caption_pass = sampling_from_json(s["caption_pass"], base.schedule.caption_pass);
    }
  }
  base.validate();
  return base;
}

void CaptionIndex::validate() const {
  video.validate();
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto& c = captions[i];
    if (c.clip.ordinal != static_cast<int>(i) || c.clip.level != 1) {
      throw Error(ErrorKind::InvalidInput, "caption ordinals must be contiguous level-1 clips");
    }
    if (c.clip.video_id != video.video_id) {
      throw Error(ErrorKind::InvalidInput, "caption belongs to another video");
    }
    if (c.text.empty()) throw Error(ErrorKind::InvalidInput, "caption text is empty");
  }
}

namespace {

json index_header(const CaptionIndex& index) {
  return json{{"video_id", index.video.video_id},
              {"duration", index.video.duration_s},
              {"model_id", index.model_id},
              {"prompt_hash", index.prompt_hash},
              {"summary", index.summary},
              {"created_at", index.created_at}};
}

json caption_record(const Caption& c) {
  return json{{"ordinal", c.clip.ordinal},
              {"start_s", c.clip.window.start_s},
              {"end_s", c.clip.window.end_s},
              {"text", c.text}};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string first_tokens(const std::string& text, int budget) {
  std::istringstream in(text);
  std::string word;
  std::string out;
  int n = 0;
  while (in >> word && n < budget) {
    if (!out.empty()) out.push_back(' ');
    out += word;
    ++n;
  }
  return out;
}

}  // namespace

std::string CaptionIndex::digest() const {
  json j = index_header(*this);
  j.erase("created_at");
  json caps = json::array();
  for (const auto& c : captions) caps.push_back(caption_record(c));
  j["captions"] = caps;
  return sha256_hex(j.dump());
}

std::string caption_index_jsonl(const CaptionIndex& index) {
  std::string out = index_header(index).dump() + "\n";
  for (const auto& c : index.captions) out += caption_record(c).dump() + "\n";
  return out;
}

CaptionIndex parse_caption_index_jsonl(const std::string& text, const VideoRef& video) {
  std::istringstream in(text);
  std::string line;
  CaptionIndex index;
  index.video = video;
  bool header = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      if (header) {
        if (j.at("video_id").get<std::string>() != video.video_id) {
          throw Error(ErrorKind::InvalidInput, "caption index belongs to another video");
        }
        index.model_id = j.at("model_id").get<std::string>();
        index.prompt_hash = j.at("prompt_hash").get<std::string>();
        index.summary = j.at("summary").get<std::string>();
        index.created_at = j.value("created_at", std::string{});
        header = false;
        continue;
      }
      Caption c;
      c.clip = ClipRef{video.video_id,
                       TemporalWindow::make(j.at("start_s").get<double>(), j.at("end_s").get<double>()),
                       1, j.at("ordinal").get<int>(), nullptr};
      c.text = j.at("text").get<std::string>();
      c.model_id = index.model_id;
      c.prompt_hash = index.prompt_hash;
      index.captions.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, "caption index line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (header) throw Error(ErrorKind::Parse, "caption index has no header");
  return index;
}

CaptionCache::CaptionCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path CaptionCache::path_for(const std::string& video_id,
                                             const std::string& model_id,
                                             const std::string& prompt_hash) const {
  std::string safe_model = model_id;
  std::replace(safe_model.begin(), safe_model.end(), '/', '_');
  return root_ / video_id / (safe_model + "-" + prompt_hash + ".jsonl");
}

std::optional<CaptionIndex> CaptionCache::load(const VideoRef& video, const std::string& model_id,
                                               const std::string& prompt_hash) const {
  const auto path = path_for(video.video_id, model_id, prompt_hash);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    auto index = parse_caption_index_jsonl(ss.str(), video);
    for (auto& c : index.captions) c.token_budget = 0;
    return index;
  } catch (const Error& e) {
    spdlog::warn("ignoring unreadable caption cache {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

std::filesystem::path CaptionCache::store(const CaptionIndex& index) const {
  const auto path = path_for(index.video.video_id, index.model_id, index.prompt_hash);
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp" +
                   std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Config, "cannot write caption cache " + tmp);
    out << caption_index_jsonl(index);
  }
  std::filesystem::rename(tmp, path);
  return path;
}

CaptionIndex preprocess(const VideoRef& video, Gateway& gateway, FrameSource& frames,
                        const ExplorerConfig& config, const CaptionCache* cache,
                        PreprocessStats* stats) {
  config.validate();
  PreprocessStats local;
  PreprocessStats& st = stats ? *stats : local;
  const auto clips = segment_uniform(video, config.level_durations[0]);
  const int budget = config.caption_token_budget;
  const auto model_id = gateway.vlm_model_id();
  const auto phash = prompts::caption_prompt_hash(budget);
  const auto prompt = prompts::caption_prompt(budget);

  std::map<std::pair<double, double>, std::string> cached;
  if (cache) {
    if (auto prev = cache->load(video, model_id, phash)) {
      for (const auto& c : prev->captions) {
        if (c.text != kPlaceholderCaption) {
          cached[{c.clip.window.start_s, c.clip.window.end_s}] = c.text;
        }
      }
    }
  }

  CaptionIndex index;
  index.video = video;
  index.model_id = model_id;
  index.prompt_hash = phash;
  index.created_at = utc_now();
  for (const auto& clip : clips) {
    Caption cap{clip, {}, budget, model_id, phash};
    if (auto it = cached.find({clip.window.start_s, clip.window.end_s}); it != cached.end()) {
      cap.text = it->second;
      ++st.cached_captions;
    } else {
      try {
        const auto p = plan_window(clip.window, config.schedule.caption_pass, video.native_fps);
        VlmRequest req{frames.extract(video, p), prompt, budget, clip.window};
        ++st.vlm_calls;
        cap.text = first_tokens(gateway.vlm_caption(req), budget);
        if (cap.text.empty()) throw Error(ErrorKind::EmptyCaption, "caption is empty");
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Environment ||
            e.kind() == ErrorKind::ReplayMiss) {
          throw;
        }
        spdlog::warn("caption failed for {} [{}, {}): {}", video.video_id, clip.window.start_s,
                     clip.window.end_s, e.what());
        ++st.failed_captions;
        cap.text = std::string(kPlaceholderCaption);
      }
    }
    index.captions.push_back(std::move(cap));
  }
  if (st.failed_captions * 4 > static_cast<int>(clips.size())) {
    throw Error(ErrorKind::Preprocess, std::to_string(st.failed_captions) + " of " +
                                           std::to_string(clips.size()) +
                                           " captions failed for video " + video.video_id);
  }
  const auto summary = gateway.llm_summarize(index.captions);
  ++st.llm_calls;
  st.llm_tokens += summary.tokens;
  index.summary = summary.parsed;
  index.validate();
  if (cache) cache->store(index);
  return index;
}

VASResult unanswerable_result(const VideoRef& video, ExplorationTrace trace,
                              Termination terminated_by) {
  VASResult r;
  r.answer = std::string(kUnanswerable);
  r.confidence = 0.0;
  r.window = TemporalWindow{0.0, video.duration_s};
  r.trace = std::move(trace);
  r.terminated_by = terminated_by;
  return r;
}

namespace {

std::string digest_of(const json& j) { return sha256_hex(j.dump()).substr(0, 16); }

json decision_payload(const Decision& d) {
  return json{{"accept", d.accept ? json(*d.accept) : json(nullptr)}, {"promising", d.promising}};
}

}  // namespace

Decision decide(const Question& question, const std::string& summary,
                const std::vector<ScoredAnswer>& batch, const ExplorerConfig& config,
                Gateway& gateway, ExplorationTrace& trace) {
  Decision d;
  if (batch.empty()) return d;
  if (question.is_mcq()) {
    int best = -1;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& a = batch[i];
      if (a.failed || a.confidence < config.mcq_conf_threshold) continue;
      if (best < 0 || a.confidence > batch[static_cast<std::size_t>(best)].confidence) {
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      d.accept = best;
    } else {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch[i].failed) d.promising.push_back(static_cast<int>(i));
      }
    }
  } else {
    const auto reply = gateway.llm_decide(question, summary, batch);
    ++trace.llm_calls;
    trace.llm_tokens += reply.tokens;
    if (reply.parse_ok) {
      if (reply.parsed.accept) {
        const int i = *reply.parsed.accept;
        if (i >= 0 && i < static_cast<int>(batch.size()) && !batch[static_cast<std::size_t>(i)].failed &&
            batch[static_cast<std::size_t>(i)].confidence >= config.oq_conf_threshold) {
          d.accept = i;
        }
      }
      std::set<int> valid;
      for (std::size_t i = 0; i < batch.size(); ++i) valid.insert(static_cast<int>(i));
      d.promising = sanitize_ordinals(reply.parsed.promising, valid);
    }
  }
  if (d.accept) d.promising.clear();
  trace.add(Stage::Decide, std::nullopt, digest_of(decision_payload(d)));
  return d;
}

ScoredAnswer evaluate_clip(const Question& question, const VideoRef& video, const ClipRef& clip,
                           const std::optional<Caption>& caption, Gateway& gateway,
                           FrameSource& frames, const LevelSampling& sampling) {
  try {
    const auto p = plan_window(clip.window, sampling, video.native_fps);
    VlmRequest req{frames.extract(video, p), prompts::answer_prompt(question), 64, clip.window};
    const auto raw = gateway.vlm_answer(question, req);
    if (raw.token_probs.empty()) {
      throw Error(ErrorKind::Capability, "VLM answer carries no token probabilities");
    }
    auto a = make_scored_answer(raw.text, raw.token_probs, clip, caption);
    a.frame_count = static_cast<int>(req.frames.size());
    return a;
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::Capability:
      case ErrorKind::Config:
      case ErrorKind::Environment:
      case ErrorKind::ReplayMiss:
        throw;
      default:
        break;
    }
    spdlog::warn("evaluation failed for {} [{}, {}): {}", video.video_id, clip.window.start_s,
                 clip.window.end_s, e.what());
    return make_failed_answer(clip, caption);
  }
}

namespace {

std::vector<ScoredAnswer> evaluate_batch(const Question& question, const CaptionIndex& index,
                                         const std::vector<ClipRef>& batch,
                                         const ExplorerConfig& config, Gateway& gateway,
                                         FrameSource& frames) {
  auto caption_for = [&](const ClipRef& c) -> std::optional<Caption> {
    const auto root = static_cast<std::size_t>(c.root_ordinal());
    if (root < index.captions.size()) return index.captions[root];
    return std::nullopt;
  };
  auto run = [&](const ClipRef& c) {
    return evaluate_clip(question, index.video, c, caption_for(c), gateway, frames,
                         config.schedule.at(c.level));
  };
  std::vector<ScoredAnswer> out;
  out.reserve(batch.size());
  const auto width = static_cast<std::size_t>(std::max(1, config.eval_parallelism));
  if (width == 1) {
    for (const auto& c : batch) out.push_back(run(c));
    return out;
  }
  for (std::size_t i = 0; i < batch.size(); i += width) {
    std::vector<std::future<ScoredAnswer>> inflight;
    for (std::size_t k = i; k < std::min(batch.size(), i + width); ++k) {
      inflight.push_back(std::async(std::launch::async, run, std::cref(batch[k])));
    }
    for (auto& f : inflight) out.push_back(f.get());
  }
  return out;
}

}  // namespace

VASResult explore(const Question& question, const CaptionIndex& index,
                  const ExplorerConfig& config, Gateway& gateway, FrameSource& frames) {
  config.validate();
  if (question.video_id != index.video.video_id) {
    throw Error(ErrorKind::InvalidInput, "caption index is for video '" + index.video.video_id +
                                             "', question is about '" + question.video_id + "'");
  }
  index.validate();

  ExplorationTrace trace;
  trace.add(Stage::Preprocess, std::nullopt, index.digest().substr(0, 16));

  ExplorationState state;
  for (const auto& c : index.captions) state.remaining_captions.insert(c.clip.ordinal);

  const auto finish = [&](const ScoredAnswer& a, Termination how) {
    VASResult r;
    r.answer = a.text;
    r.confidence = a.confidence;
    r.window = a.clip.window;
    r.terminated_by = how;
    r.trace = trace;
    return r;
  };

  while (state.vlm_calls_used < config.it_max && !state.remaining_captions.empty()) {
    ++state.iteration;

    // Reasoning: pick first-level candidates from the remaining captions.
    std::vector<Caption> remaining;
    for (int o : state.remaining_captions) remaining.push_back(index.captions[static_cast<std::size_t>(o)]);
    const auto reply = gateway.llm_select_candidates(question, index.summary, remaining);
    ++trace.llm_calls;
    trace.llm_tokens += reply.tokens;
    auto ordinals = reply.parse_ok ? sanitize_ordinals(reply.parsed, state.remaining_captions)
                                   : std::vector<int>{};
    if (static_cast<int>(ordinals.size()) > config.max_candidates_per_round) {
      ordinals.resize(static_cast<std::size_t>(config.max_candidates_per_round));
    }
    trace.add(Stage::Reason, std::nullopt, digest_of(json(ordinals)));
    if (ordinals.empty()) break;

    state.candidates.clear();
    for (int o : ordinals) state.candidates.push_back(index.captions[static_cast<std::size_t>(o)].clip);

    while (!state.candidates.empty()) {
      // Evaluation, truncated to the remaining budget.
      std::vector<ClipRef> batch;
      for (const auto& c : state.candidates) {
        if (state.vlm_calls_used + static_cast<int>(batch.size()) >= config.it_max) break;
        if (state.evaluated_keys.count(c.key())) continue;
        batch.push_back(c);
      }
      if (batch.empty()) break;
      auto answers = evaluate_batch(question, index, batch, config, gateway, frames);
      for (const auto& a : answers) {
        state.evaluated_keys.insert(a.clip.key());
        ++state.vlm_calls_used;
        ++trace.vlm_answer_calls;
        trace.frames += a.frame_count;
        trace.add(Stage::Evaluate, a.clip, digest_of(json(a)));
        state.evaluated.push_back(a);
      }

      // Decision over the batch just evaluated.
      const auto d = decide(question, index.summary, answers, config, gateway, trace);
      if (d.accept) {
        return finish(answers[static_cast<std::size_t>(*d.accept)], Termination::DecisionAccept);
      }
      std::vector<ClipRef> next;
      for (int i : d.promising) {
        const auto& clip = answers[static_cast<std::size_t>(i)].clip;
        if (clip.level >= 3) continue;
        for (auto& child : child_windows(clip, config.level_durations)) next.push_back(std::move(child));
      }
      state.candidates = std::move(next);
      if (state.vlm_calls_used >= config.it_max) break;
    }
    for (int o : ordinals) state.remaining_captions.erase(o);
  }

  const Termination how = state.vlm_calls_used >= config.it_max ? Termination::BudgetExhausted
                                                                 : Termination::CaptionsExhausted;
  const bool any_ok = std::any_of(state.evaluated.begin(), state.evaluated.end(),
                                  [](const ScoredAnswer& a) { return !a.failed; });
  if (!any_ok) return unanswerable_result(index.video, std::move(trace), how);

  const auto pick = gateway.llm_final_pick(question, state.evaluated);
  ++trace.llm_calls;
  trace.llm_tokens += pick.tokens;
  int idx = pick.parse_ok ? pick.parsed : -1;
  if (idx < 0 || idx >= static_cast<int>(state.evaluated.size()) ||
      state.evaluated[static_cast<std::size_t>(idx)].failed) {
    idx = best_answer_index(state.evaluated);
  }
  trace.add(Stage::FinalPick, state.evaluated[static_cast<std::size_t>(idx)].clip,
            digest_of(json(idx)));
  return finish(state.evaluated[static_cast<std::size_t>(idx)], how);
}

}  // namespace vas
