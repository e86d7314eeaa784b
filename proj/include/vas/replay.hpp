#pragma once

#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "vas/gateway.hpp"

namespace vas {

/// Canonical request JSON for each gateway role. The digest of
/// `role + "\n" + request.dump()` keys transcript records.
namespace replay_keys {
nlohmann::json caption(const VlmRequest& r);
nlohmann::json answer(const Question& q, const VlmRequest& r);
nlohmann::json summarize(const std::vector<Caption>& c);
nlohmann::json select(const Question& q, const std::string& s, const std::vector<Caption>& c);
nlohmann::json decide(const Question& q, const std::string& s, const std::vector<ScoredAnswer>& e);
nlohmann::json final_pick(const Question& q, const std::vector<ScoredAnswer>& e);
nlohmann::json socratic(const Question& q, const std::string& s, const std::vector<Caption>& c);
nlohmann::json judge(const Question& q, const std::string& gt, const std::string& predicted);
std::string digest(const std::string& role, const nlohmann::json& request);
}  // namespace replay_keys

/// Serves responses from a JSONL transcript of
/// `{"role", "request_digest", "response_payload"}` records. A request whose
/// digest is absent raises ReplayMiss. Recorded errors are re-raised with
/// their original kind.
class ReplayGateway final : public Gateway {
 public:
  explicit ReplayGateway(const std::string& transcript_path);

  std::string vlm_model_id() const override { return vlm_model_; }
  std::string llm_model_id() const override { return llm_model_; }
  std::string judge_model_id() const override { return judge_model_; }

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

  std::size_t size() const { return records_.size(); }

 private:
  const nlohmann::json& lookup(const std::string& role, const nlohmann::json& request) const;

  std::unordered_map<std::string, nlohmann::json> records_;
  std::string vlm_model_ = "replay";
  std::string llm_model_ = "replay";
  std::string judge_model_ = "replay";
};

/// Appends transcript records to a file; one record per distinct digest.
/// Safe to share between gateways.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(const std::string& path);
  void write(const std::string& role, const std::string& digest, const nlohmann::json& payload);
  /// Writes the model-id record once per file.
  void write_meta(const Gateway& gateway);

 private:
  std::mutex mu_;
  std::ofstream out_;
  std::set<std::string> written_;
  bool meta_written_ = false;
};

/// Forwards every call to `inner` and appends one transcript record per
/// distinct request.
class RecordingGateway final : public Gateway {
 public:
  RecordingGateway(std::shared_ptr<Gateway> inner, const std::string& transcript_path);
  RecordingGateway(std::shared_ptr<Gateway> inner, std::shared_ptr<TranscriptWriter> writer);

  std::string vlm_model_id() const override { return inner_->vlm_model_id(); }
  std::string llm_model_id() const override { return inner_->llm_model_id(); }
  std::string judge_model_id() const override { return inner_->judge_model_id(); }

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

 private:
  template <class F>
  auto record(const std::string& role, const nlohmann::json& request, F&& call);

  std::shared_ptr<Gateway> inner_;
  std::shared_ptr<TranscriptWriter> writer_;
};

}  // namespace vas
