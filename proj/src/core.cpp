#include "vas/core.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vas/digest.hpp"
#include "vas/json_io.hpp"

namespace vas {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InvalidLevel: return "invalid-level";
    case ErrorKind::Config: return "configuration";
    case ErrorKind::BackendUnavailable: return "backend-unavailable";
    case ErrorKind::EmptyCaption: return "empty-caption";
    case ErrorKind::Capability: return "capability";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::ReplayMiss: return "replay-miss";
    case ErrorKind::Extraction: return "extraction";
    case ErrorKind::Environment: return "environment";
    case ErrorKind::Preprocess: return "preprocess";
    case ErrorKind::Generation: return "generation";
    case ErrorKind::OracleMismatch: return "oracle-mismatch";
    case ErrorKind::Dataset: return "dataset";
  }
  return "unknown";
}

TemporalWindow TemporalWindow::make(double start_s, double end_s) {
  if (!std::isfinite(start_s) || !std::isfinite(end_s) || start_s < 0.0 || !(start_s < end_s)) {
    std::ostringstream msg;
    msg << "window [" << start_s << ", " << end_s << ") must satisfy 0 <= start < end";
    throw Error(ErrorKind::InvalidInput, msg.str());
  }
  return TemporalWindow{start_s, end_s};
}

void VideoRef::validate() const {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw Error(ErrorKind::InvalidInput, "video '" + video_id + "' has non-positive duration");
  }
}

int ClipRef::root_ordinal() const {
  const ClipRef* c = this;
  while (c->parent) c = c->parent.get();
  return c->ordinal;
}

std::string ClipRef::key() const {
  std::ostringstream os;
  os.precision(17);
  os << video_id << '@' << window.start_s << '-' << window.end_s;
  return os.str();
}

void Question::validate(std::optional<double> video_duration_s) const {
  if (text.empty()) throw Error(ErrorKind::InvalidInput, "question '" + id + "' has empty text");
  if (kind == QuestionKind::Mcq) {
    if (options.size() != 4) {
      throw Error(ErrorKind::InvalidInput, "MCQ '" + id + "' must have exactly 4 options");
    }
    for (std::size_t i = 0; i < options.size(); ++i)
      for (std::size_t j = i + 1; j < options.size(); ++j)
        if (options[i] == options[j])
          throw Error(ErrorKind::InvalidInput, "MCQ '" + id + "' has duplicate options");
  }
  if (gt_window) {
    TemporalWindow::make(gt_window->start_s, gt_window->end_s);
    if (video_duration_s && gt_window->end_s > *video_duration_s + 1e-9) {
      throw Error(ErrorKind::InvalidInput, "question '" + id + "' gt window exceeds video duration");
    }
  }
}

void ExplorationTrace::add(Stage stage, std::optional<ClipRef> clip, std::string payload_digest) {
  events.push_back(TraceEvent{stage, std::move(clip), std::move(payload_digest),
                              static_cast<std::uint64_t>(events.size())});
}

int ExplorationTrace::count(Stage stage) const {
  int n = 0;
  for (const auto& e : events) n += e.stage == stage ? 1 : 0;
  return n;
}

std::string ExplorationTrace::digest() const {
  return sha256_hex(nlohmann::json(*this).dump());
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Preprocess: return "preprocess";
    case Stage::Reason: return "reason";
    case Stage::Evaluate: return "evaluate";
    case Stage::Decide: return "decide";
    case Stage::FinalPick: return "final_pick";
  }
  return "unknown";
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::DecisionAccept: return "decision_accept";
    case Termination::BudgetExhausted: return "budget_exhausted";
    case Termination::CaptionsExhausted: return "captions_exhausted";
  }
  return "unknown";
}

Stage stage_from_string(const std::string& s) {
  for (Stage st : {Stage::Preprocess, Stage::Reason, Stage::Evaluate, Stage::Decide,
                   Stage::FinalPick})
    if (to_string(st) == s) return st;
  throw Error(ErrorKind::Parse, "unknown stage '" + s + "'");
}

Termination termination_from_string(const std::string& s) {
  for (Termination t : {Termination::DecisionAccept, Termination::BudgetExhausted,
                        Termination::CaptionsExhausted})
    if (to_string(t) == s) return t;
  throw Error(ErrorKind::Parse, "unknown termination '" + s + "'");
}

std::vector<TemporalWindow> tile_window(const TemporalWindow& window, double piece_len) {
  if (!(piece_len > 0.0)) throw Error(ErrorKind::InvalidInput, "clip length must be positive");
  const double total = window.duration();
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidInput, "cannot tile an empty window");

  constexpr double kTol = 1e-9;
  auto full = static_cast<long>(std::floor(total / piece_len + kTol));
  const double tail = total - static_cast<double>(full) * piece_len;

  std::vector<TemporalWindow> out;
  if (full == 0) {
    out.push_back(window);
    return out;
  }
  out.reserve(static_cast<std::size_t>(full) + 1);
  for (long k = 0; k < full; ++k) {
    const double s = window.start_s + static_cast<double>(k) * piece_len;
    out.push_back(TemporalWindow{s, window.start_s + static_cast<double>(k + 1) * piece_len});
  }
  if (tail >= kMinTailSeconds - kTol) {
    out.push_back(TemporalWindow{out.back().end_s, window.end_s});
  } else {
    out.back().end_s = window.end_s;
  }
  return out;
}

std::vector<ClipRef> segment_uniform(const VideoRef& video, double clip_len) {
  video.validate();
  if (!(clip_len > 0.0)) throw Error(ErrorKind::InvalidInput, "clip length must be positive");
  const auto windows = tile_window(TemporalWindow{0.0, video.duration_s}, clip_len);
  std::vector<ClipRef> clips;
  clips.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    clips.push_back(ClipRef{video.video_id, windows[i], 1, static_cast<int>(i), nullptr});
  }
  return clips;
}

std::vector<ClipRef> child_windows(const ClipRef& clip,
                                   const std::array<double, 3>& level_durations) {
  if (clip.level < 1 || clip.level > 2) {
    throw Error(ErrorKind::InvalidLevel,
                "only level-1 and level-2 clips can be split (got level " +
                    std::to_string(clip.level) + ")");
  }
  const double child_len = level_durations[static_cast<std::size_t>(clip.level)];
  const auto windows = tile_window(clip.window, child_len);
  auto parent = std::make_shared<const ClipRef>(clip);
  std::vector<ClipRef> children;
  children.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    children.push_back(
        ClipRef{clip.video_id, windows[i], clip.level + 1, static_cast<int>(i), parent});
  }
  return children;
}

}  // namespace vas
