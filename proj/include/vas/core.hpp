#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vas/error.hpp"

namespace vas {

/// Half-open interval [start_s, end_s) in seconds.
struct TemporalWindow {
  double start_s = 0.0;
  double end_s = 0.0;

  /// Validating constructor; throws InvalidInput unless 0 <= start < end.
  static TemporalWindow make(double start_s, double end_s);

  double duration() const { return end_s - start_s; }
  bool contains(double t) const { return t >= start_s && t < end_s; }
  /// Containment of another window with a boundary tolerance.
  bool contains(const TemporalWindow& other, double tol = 1e-9) const {
    return other.start_s >= start_s - tol && other.end_s <= end_s + tol;
  }
  bool overlaps(const TemporalWindow& other) const {
    return other.start_s < end_s && start_s < other.end_s;
  }

  friend bool operator==(const TemporalWindow&, const TemporalWindow&) = default;
};

struct VideoRef {
  std::string video_id;
  double duration_s = 0.0;
  std::string source_uri;
  int width = 0;
  int height = 0;
  /// 0 when unknown.
  double native_fps = 0.0;

  void validate() const;
};

/// A clip in the three-level hierarchy. Level-1 clips tile the video; level 2
/// and 3 clips hold a link to the clip they were split from.
struct ClipRef {
  std::string video_id;
  TemporalWindow window;
  int level = 1;
  int ordinal = 0;
  std::shared_ptr<const ClipRef> parent;

  /// Ordinal of the level-1 ancestor (the clip's own ordinal at level 1).
  int root_ordinal() const;
  std::string key() const;
};

struct Caption {
  ClipRef clip;
  std::string text;
  int token_budget = 64;
  std::string model_id;
  std::string prompt_hash;
};

enum class QuestionKind { Mcq, Open };

struct Question {
  std::string id;
  std::string text;
  QuestionKind kind = QuestionKind::Open;
  std::vector<std::string> options;
  std::optional<std::string> gt_answer;
  std::optional<TemporalWindow> gt_window;
  std::optional<std::string> category;
  std::string video_id;

  bool is_mcq() const { return kind == QuestionKind::Mcq; }
  /// Throws InvalidInput on a malformed question; pass the video duration to
  /// also check the ground-truth window bounds.
  void validate(std::optional<double> video_duration_s = std::nullopt) const;
};

/// A VLM answer for one clip. `confidence` is always derived from
/// `token_probs` through `aggregate`; use `make_scored_answer` to build one.
/// Failed evaluations carry no tokens and confidence 0.
struct ScoredAnswer {
  std::string text;
  std::vector<double> token_probs;
  double confidence = 0.0;
  ClipRef clip;
  std::optional<Caption> caption;
  bool failed = false;
  int frame_count = 0;
};

enum class Stage { Preprocess, Reason, Evaluate, Decide, FinalPick };

struct TraceEvent {
  Stage stage = Stage::Reason;
  std::optional<ClipRef> clip;
  std::string payload_digest;
  /// Logical clock: position of the event in the trace.
  std::uint64_t timestamp = 0;
};

struct ExplorationTrace {
  std::vector<TraceEvent> events;
  int vlm_answer_calls = 0;
  int llm_calls = 0;
  long llm_tokens = 0;
  long frames = 0;

  void add(Stage stage, std::optional<ClipRef> clip, std::string payload_digest);
  int count(Stage stage) const;
  /// Digest over all events and counters; equal traces give equal digests.
  std::string digest() const;
};

enum class Termination { DecisionAccept, BudgetExhausted, CaptionsExhausted };

struct VASResult {
  std::string answer;
  double confidence = 0.0;
  TemporalWindow window;
  ExplorationTrace trace;
  Termination terminated_by = Termination::CaptionsExhausted;
};

std::string to_string(Stage stage);
std::string to_string(Termination t);
Stage stage_from_string(const std::string& s);
Termination termination_from_string(const std::string& s);

/// Default clip durations per level, in seconds.
inline constexpr std::array<double, 3> kDefaultLevelDurations{60.0, 20.0, 5.0};

/// Tails shorter than this merge into the previous clip.
inline constexpr double kMinTailSeconds = 1.0;

/// Tiles `window` into consecutive pieces of `piece_len`. A tail of at least
/// one second is kept as a shorter final piece; a shorter tail is merged into
/// the previous piece.
std::vector<TemporalWindow> tile_window(const TemporalWindow& window, double piece_len);

std::vector<ClipRef> segment_uniform(const VideoRef& video, double clip_len);

/// Splits a level-1 or level-2 clip into the next level. `level_durations`
/// holds the duration for levels 1, 2 and 3.
std::vector<ClipRef> child_windows(const ClipRef& clip,
                                   const std::array<double, 3>& level_durations =
                                       kDefaultLevelDurations);

}  // namespace vas
