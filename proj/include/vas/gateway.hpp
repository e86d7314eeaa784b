#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vas/core.hpp"

namespace vas {

struct EncodedFrame {
  std::string format;  // "jpeg", or "null" for simulated frames without pixels
  int width = 0;
  int height = 0;
  double timestamp_s = 0.0;
  std::string data;
};

struct VlmRequest {
  std::vector<EncodedFrame> frames;
  std::string prompt;
  int max_tokens = 64;
  /// Window the frames were sampled from. Informational for live backends.
  std::optional<TemporalWindow> clip_window;

  /// Throws InvalidInput on zero frames or non-ascending timestamps.
  void validate() const;
};

/// Raw VLM answer before scoring: text plus the probability of each emitted
/// token (exp of its log-probability under greedy decoding).
struct RawAnswer {
  std::string text;
  std::vector<double> token_probs;
};

template <class T>
struct LlmStructuredReply {
  std::string raw_text;
  T parsed{};
  bool parse_ok = true;
  long tokens = 0;
};

struct Decision {
  std::optional<int> accept;
  std::vector<int> promising;
};

struct SocraticAnswer {
  std::string answer;
  std::optional<int> evidence_ordinal;
};

struct JudgeVerdict {
  int accuracy = 0;  // 0 or 100
  int score = 0;     // 0..5
  std::string rationale;
  bool judge_error = false;
  std::string judge_model;
};

/// The model roles used by the explorer, the baselines and the evaluator.
///
/// VLM roles: `vlm_caption`, `vlm_answer`. LLM roles: `llm_summarize`,
/// `llm_select_candidates`, `llm_decide`, `llm_final_pick`,
/// `llm_socratic_answer`. Judge role: `llm_judge`. Implementations must be
/// safe for concurrent calls.
class Gateway {
 public:
  virtual ~Gateway() = default;

  virtual std::string vlm_model_id() const = 0;
  virtual std::string llm_model_id() const = 0;
  virtual std::string judge_model_id() const = 0;

  /// Throws EmptyCaption when the model produced no text.
  virtual std::string vlm_caption(const VlmRequest& request) = 0;
  /// For MCQ the answer is the single option letter with s = 1.
  virtual RawAnswer vlm_answer(const Question& question, const VlmRequest& request) = 0;

  virtual LlmStructuredReply<std::string> llm_summarize(const std::vector<Caption>& captions) = 0;
  /// Returns raw ordinals; callers sanitize them against the live caption set.
  virtual LlmStructuredReply<std::vector<int>> llm_select_candidates(
      const Question& question, const std::string& summary,
      const std::vector<Caption>& captions) = 0;
  virtual LlmStructuredReply<Decision> llm_decide(const Question& question,
                                                  const std::string& summary,
                                                  const std::vector<ScoredAnswer>& evaluated) = 0;
  virtual LlmStructuredReply<int> llm_final_pick(const Question& question,
                                                 const std::vector<ScoredAnswer>& evaluated) = 0;
  virtual LlmStructuredReply<SocraticAnswer> llm_socratic_answer(
      const Question& question, const std::string& summary,
      const std::vector<Caption>& captions) = 0;
  virtual JudgeVerdict llm_judge(const Question& question, const std::string& gt_answer,
                                 const std::string& predicted) = 0;
};

/// Routes VLM roles, LLM roles and the judge role to separate backends.
class CompositeGateway final : public Gateway {
 public:
  CompositeGateway(std::shared_ptr<Gateway> vlm, std::shared_ptr<Gateway> llm,
                   std::shared_ptr<Gateway> judge);

  std::string vlm_model_id() const override { return vlm_->vlm_model_id(); }
  std::string llm_model_id() const override { return llm_->llm_model_id(); }
  std::string judge_model_id() const override { return judge_->judge_model_id(); }

  std::string vlm_caption(const VlmRequest& r) override { return vlm_->vlm_caption(r); }
  RawAnswer vlm_answer(const Question& q, const VlmRequest& r) override {
    return vlm_->vlm_answer(q, r);
  }
  LlmStructuredReply<std::string> llm_summarize(const std::vector<Caption>& c) override {
    return llm_->llm_summarize(c);
  }
  LlmStructuredReply<std::vector<int>> llm_select_candidates(
      const Question& q, const std::string& s, const std::vector<Caption>& c) override {
    return llm_->llm_select_candidates(q, s, c);
  }
  LlmStructuredReply<Decision> llm_decide(const Question& q, const std::string& s,
                                          const std::vector<ScoredAnswer>& e) override {
    return llm_->llm_decide(q, s, e);
  }
  LlmStructuredReply<int> llm_final_pick(const Question& q,
                                         const std::vector<ScoredAnswer>& e) override {
    return llm_->llm_final_pick(q, e);
  }
  LlmStructuredReply<SocraticAnswer> llm_socratic_answer(
      const Question& q, const std::string& s, const std::vector<Caption>& c) override {
    return llm_->llm_socratic_answer(q, s, c);
  }
  JudgeVerdict llm_judge(const Question& q, const std::string& gt,
                         const std::string& p) override {
    return judge_->llm_judge(q, gt, p);
  }

 private:
  std::shared_ptr<Gateway> vlm_;
  std::shared_ptr<Gateway> llm_;
  std::shared_ptr<Gateway> judge_;
};

/// Keeps the first occurrence of each ordinal that belongs to `valid`,
/// preserving reply order.
std::vector<int> sanitize_ordinals(const std::vector<int>& raw, const std::set<int>& valid);

/// Index of the highest-confidence answer; ties go to the earliest clip start.
/// Returns -1 for an empty list.
int best_answer_index(const std::vector<ScoredAnswer>& evaluated);

/// Rough token count used for cost accounting when a backend reports none.
long approx_tokens(std::string_view text);

/// Lower-cases and strips surrounding whitespace and punctuation.
std::string normalize_answer(std::string_view text);

}  // namespace vas
