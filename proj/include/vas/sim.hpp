#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vas/core.hpp"
#include "vas/gateway.hpp"

namespace vas::sim {

/// Deterministic generator with platform-independent distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  double normal();

 private:
  std::mt19937_64 engine_;
};

struct Event {
  TemporalWindow window;
  std::string descriptor;
  std::string object;
  std::string detail;
  bool is_needle = false;
};

struct WorldConfig {
  double duration_s = 3600.0;
  int decoys = 12;
  double needle_min_s = 5.0;
  double needle_max_s = 60.0;
  double decoy_min_s = 5.0;
  double decoy_max_s = 60.0;
  bool mcq = false;
  /// Needle-free world: every first-level clip holds a decoy sharing the
  /// question's descriptor, so no clip can answer the question.
  bool adversarial = false;
  double clip_len_s = 60.0;
};

struct SyntheticWorld {
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  std::vector<Event> events;
  Question question;

  std::string video_id() const { return question.video_id; }
  VideoRef video() const;
  /// Nullptr for adversarial worlds.
  const Event* needle() const;
};

/// Pure function of (seed, config). Throws Generation when the events cannot
/// fit in 30% of the timeline.
SyntheticWorld generate_world(std::uint64_t seed, const WorldConfig& config = {});

nlohmann::json to_json(const SyntheticWorld& w);
SyntheticWorld world_from_json(const nlohmann::json& j);

struct MockFidelity {
  bool caption_reveals_needle = true;
  double answer_conf_hit = 0.95;
  double answer_conf_miss = 0.3;
  /// Gaussian noise sigma on answer confidence, in [0, 0.2].
  double noise = 0.0;
  /// Answer correctness drawn as Bernoulli(confidence).
  bool calibrated = false;

  void validate() const;
};

inline constexpr std::string_view kNothingNotable = "nothing notable";
inline constexpr std::string_view kUnknownAnswer = "unknown";
inline constexpr int kSyntheticTokens = 4;

/// Gateway whose VLM sees the world's events and whose LLM roles match
/// keywords in captions and questions. Stateless per call.
class MockGateway final : public Gateway {
 public:
  explicit MockGateway(SyntheticWorld world, MockFidelity fidelity = {});

  std::string vlm_model_id() const override { return "mock-vlm"; }
  std::string llm_model_id() const override { return "mock-llm"; }
  std::string judge_model_id() const override { return "mock-judge"; }

  std::string vlm_caption(const VlmRequest& request) override;
  RawAnswer vlm_answer(const Question& question, const VlmRequest& request) override;
  LlmStructuredReply<std::string> llm_summarize(const std::vector<Caption>& captions) override;
  LlmStructuredReply<std::vector<int>> llm_select_candidates(
      const Question& question, const std::string& summary,
      const std::vector<Caption>& captions) override;
  LlmStructuredReply<Decision> llm_decide(const Question& question, const std::string& summary,
                                          const std::vector<ScoredAnswer>& evaluated) override;
  LlmStructuredReply<int> llm_final_pick(const Question& question,
                                         const std::vector<ScoredAnswer>& evaluated) override;
  LlmStructuredReply<SocraticAnswer> llm_socratic_answer(
      const Question& question, const std::string& summary,
      const std::vector<Caption>& captions) override;
  JudgeVerdict llm_judge(const Question& question, const std::string& gt_answer,
                         const std::string& predicted) override;

  const SyntheticWorld& world() const { return world_; }

 private:
  /// Descriptors of the world that appear verbatim in the question.
  std::vector<std::string> question_descriptors(const Question& question) const;

  SyntheticWorld world_;
  MockFidelity fidelity_;
};

/// Judge used with mock backends: normalized exact match scores {100, 5};
/// otherwise token overlap decides.
JudgeVerdict mock_judge(const std::string& gt_answer, const std::string& predicted);

struct OracleAnswer {
  std::string answer;
  TemporalWindow window;
};

/// Direct lookup of the needle. Throws OracleMismatch when `question` was not
/// generated from `world` or the world has no needle.
OracleAnswer brute_force_answer(const SyntheticWorld& world, const Question& question);

}  // namespace vas::sim
