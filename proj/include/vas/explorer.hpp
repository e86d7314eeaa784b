#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vas/core.hpp"
#include "vas/frame_sampler.hpp"
#include "vas/gateway.hpp"

namespace vas {

struct ExplorerConfig {
  /// Maximum number of VLM answer evaluations per question.
  int it_max = 45;
  std::array<double, 3> level_durations = kDefaultLevelDurations;
  double oq_conf_threshold = 0.8;
  double mcq_conf_threshold = 0.9;
  /// First-level candidates accepted per reasoning round.
  int max_candidates_per_round = 5;
  /// Concurrent VLM evaluations within one batch.
  int eval_parallelism = 1;
  int caption_token_budget = 64;
  ZoomSchedule schedule = ZoomSchedule::defaults();

  static ExplorerConfig pro();
  static ExplorerConfig flash();

  /// Finest clip duration.
  double dur_t() const { return level_durations[2]; }
  void validate() const;
};

nlohmann::json to_json(const ExplorerConfig& c);
ExplorerConfig explorer_config_from_json(const nlohmann::json& j, ExplorerConfig base = {});

/// Question-independent captions for every first-level clip plus a summary.
struct CaptionIndex {
  VideoRef video;
  std::vector<Caption> captions;  // ordinal-indexed
  std::string summary;
  std::string model_id;
  std::string prompt_hash;
  std::string created_at;

  /// Throws InvalidInput unless ordinals are contiguous from 0 and every
  /// caption belongs to a level-1 clip of `video`.
  void validate() const;
  std::string digest() const;
};

/// JSONL: a header record, then one record per caption.
std::string caption_index_jsonl(const CaptionIndex& index);
CaptionIndex parse_caption_index_jsonl(const std::string& text, const VideoRef& video);

/// Persistent caption store laid out as
/// {root}/{video_id}/{model_id}-{prompt_hash}.jsonl.
class CaptionCache {
 public:
  explicit CaptionCache(std::filesystem::path root);

  std::filesystem::path path_for(const std::string& video_id, const std::string& model_id,
                                 const std::string& prompt_hash) const;
  std::optional<CaptionIndex> load(const VideoRef& video, const std::string& model_id,
                                   const std::string& prompt_hash) const;
  std::filesystem::path store(const CaptionIndex& index) const;

 private:
  std::filesystem::path root_;
};

struct PreprocessStats {
  int vlm_calls = 0;
  int llm_calls = 0;
  long llm_tokens = 0;
  int cached_captions = 0;
  int failed_captions = 0;
};

/// Segments the video into first-level clips, captions each clip (reusing
/// cached captions) and summarizes them. More than 25% failed captions is a
/// Preprocess error; fewer failures get a placeholder caption.
CaptionIndex preprocess(const VideoRef& video, Gateway& gateway, FrameSource& frames,
                        const ExplorerConfig& config, const CaptionCache* cache = nullptr,
                        PreprocessStats* stats = nullptr);

inline constexpr std::string_view kPlaceholderCaption = "no caption";
inline constexpr std::string_view kUnanswerable = "unanswerable";

/// Live state of one exploration.
struct ExplorationState {
  std::set<int> remaining_captions;
  std::vector<ClipRef> candidates;
  std::vector<ScoredAnswer> evaluated;
  std::set<std::string> evaluated_keys;
  int vlm_calls_used = 0;
  int iteration = 0;
};

/// Decision stage. MCQ uses a pure confidence check; OQ asks the LLM and
/// rejects accepts below the OQ threshold. Promising indices are restricted
/// to `batch`.
Decision decide(const Question& question, const std::string& summary,
                const std::vector<ScoredAnswer>& batch, const ExplorerConfig& config,
                Gateway& gateway, ExplorationTrace& trace);

/// Samples frames for `clip`, queries the VLM and scores the answer. Backend
/// and extraction failures yield a failed answer with confidence 0.
ScoredAnswer evaluate_clip(const Question& question, const VideoRef& video, const ClipRef& clip,
                           const std::optional<Caption>& caption, Gateway& gateway,
                           FrameSource& frames, const LevelSampling& sampling);

/// Runs the reason / evaluate / decide loop over a caption index.
VASResult explore(const Question& question, const CaptionIndex& index,
                  const ExplorerConfig& config, Gateway& gateway, FrameSource& frames);

/// Result for questions where nothing could be evaluated.
VASResult unanswerable_result(const VideoRef& video, ExplorationTrace trace,
                              Termination terminated_by);

}  // namespace vas
