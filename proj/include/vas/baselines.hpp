#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "vas/core.hpp"
#include "vas/explorer.hpp"
#include "vas/frame_sampler.hpp"
#include "vas/gateway.hpp"

namespace vas {

enum class BaselineKind { Socratic, Sequential, SequentialBp, IterativeSampling };

std::string to_string(BaselineKind k);
BaselineKind baseline_kind_from_string(const std::string& s);

struct BaselineConfig {
  BaselineKind kind = BaselineKind::Sequential;
  /// Early-stop threshold for SequentialBP; values above 1 are never reached.
  double bp_threshold = 0.8;
  int iter_max_rounds = 8;
  double clip_len_s = 60.0;
  /// 768 for Socratic, 64 for its short-caption variant.
  int caption_token_budget = 768;
  /// Frame counts and resolutions; sequential and iterative sampling use level 1.
  ZoomSchedule schedule = ZoomSchedule::defaults();
  /// Iterative sampling stops once the focus window is shorter than this.
  double dur_t = kDefaultLevelDurations[2];

  void validate() const;
};

nlohmann::json to_json(const BaselineConfig& c);
BaselineConfig baseline_config_from_json(const nlohmann::json& j, BaselineConfig base = {});

/// One LLM call over all captions. The window is the cited caption's clip, or
/// the full video when no clip is cited.
VASResult run_socratic(const Question& question, const CaptionIndex& index, Gateway& gateway);

/// Evaluates every first-level clip in order and keeps the most confident
/// answer (ties go to the earliest clip).
VASResult run_sequential(const Question& question, const VideoRef& video, Gateway& gateway,
                         FrameSource& frames, const BaselineConfig& config = {});

/// As run_sequential, stopping at the first confidence above `bp_threshold`.
VASResult run_sequential_bp(const Question& question, const VideoRef& video, Gateway& gateway,
                            FrameSource& frames, const BaselineConfig& config = {});

/// Each round samples the largest unsampled gap inside the focus window v*;
/// a strictly higher confidence narrows v* to that gap.
VASResult run_iterative_sampling(const Question& question, const VideoRef& video,
                                 Gateway& gateway, FrameSource& frames,
                                 const BaselineConfig& config = {});

}  // namespace vas
