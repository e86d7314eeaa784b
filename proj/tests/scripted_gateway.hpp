#pragma once

#include <atomic>
#include <functional>

#include "vas/gateway.hpp"

namespace vas::testing {

/// Gateway whose roles are plain callbacks. Unset roles return neutral replies.
class ScriptedGateway final : public Gateway {
 public:
  std::function<RawAnswer(const VlmRequest&)> answer;
  std::function<std::string(const VlmRequest&)> caption;
  std::function<std::vector<int>(const std::vector<Caption>&)> select;
  std::function<Decision(const std::vector<ScoredAnswer>&)> on_decide;
  std::atomic<int> answer_calls{0};
  std::atomic<int> caption_calls{0};
  std::atomic<int> decide_calls{0};

  std::string vlm_model_id() const override { return "s-vlm"; }
  std::string llm_model_id() const override { return "s-llm"; }
  std::string judge_model_id() const override { return "s-judge"; }

  std::string vlm_caption(const VlmRequest& r) override {
    ++caption_calls;
    return caption ? caption(r) : "a scene";
  }
  RawAnswer vlm_answer(const Question&, const VlmRequest& r) override {
    ++answer_calls;
    return answer ? answer(r) : RawAnswer{"x", {0.5}};
  }
  LlmStructuredReply<std::string> llm_summarize(const std::vector<Caption>&) override {
    return {"summary", "summary", true, 3};
  }
  LlmStructuredReply<std::vector<int>> llm_select_candidates(const Question&, const std::string&,
                                                             const std::vector<Caption>& c) override {
    LlmStructuredReply<std::vector<int>> r;
    if (select) {
      r.parsed = select(c);
    } else {
      for (const auto& cap : c) r.parsed.push_back(cap.clip.ordinal);
    }
    r.tokens = 5;
    return r;
  }
  LlmStructuredReply<Decision> llm_decide(const Question&, const std::string&,
                                          const std::vector<ScoredAnswer>& e) override {
    ++decide_calls;
    LlmStructuredReply<Decision> r;
    if (on_decide) r.parsed = on_decide(e);
    return r;
  }
  LlmStructuredReply<int> llm_final_pick(const Question&, const std::vector<ScoredAnswer>& e) override {
    LlmStructuredReply<int> r;
    r.parsed = best_answer_index(e);
    return r;
  }
  LlmStructuredReply<SocraticAnswer> llm_socratic_answer(const Question&, const std::string&,
                                                         const std::vector<Caption>&) override {
    return {};
  }
  JudgeVerdict llm_judge(const Question&, const std::string&, const std::string&) override {
    return {};
  }
};

}  // namespace vas::testing
