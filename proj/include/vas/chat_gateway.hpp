#pragma once

#include <atomic>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vas/gateway.hpp"

namespace vas {

struct BackendConfig {
  std::string endpoint_url;  // e.g. http://localhost:8000/v1
  std::string model_id;
  std::string api_key_env;   // name of the variable holding the key; empty for none
  double timeout_s = 120.0;
  int max_retries = 3;
  double temperature = 0.0;
  bool request_logprobs = true;
  int max_concurrency = 4;
  double backoff_base_s = 0.5;
};

struct ChatRequest {
  std::string model;
  nlohmann::json messages = nlohmann::json::array();
  int max_tokens = 256;
  bool logprobs = false;
  double temperature = 0.0;
};

struct ChatResponse {
  std::string content;
  std::vector<std::string> tokens;
  std::vector<double> token_logprobs;
  bool has_logprobs = false;
  long total_tokens = 0;
};

/// One chat-completion round trip.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

/// Builds the JSON body for POST {endpoint}/chat/completions.
nlohmann::json chat_request_body(const ChatRequest& request);
/// Parses choices[0].message.content and choices[0].logprobs.content[*].
ChatResponse parse_chat_response(const nlohmann::json& body);

/// OpenAI-compatible HTTP transport with bounded concurrency and exponential
/// backoff on throttling, server errors and connection failures.
class OpenAiTransport final : public ChatTransport {
 public:
  /// Throws Config when `api_key_env` names an unset variable.
  explicit OpenAiTransport(BackendConfig config);

  ChatResponse complete(const ChatRequest& request) override;
  std::string model_id() const override { return config_.model_id; }
  long requests_sent() const { return requests_.load(); }

 private:
  BackendConfig config_;
  std::string api_key_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::counting_semaphore<1024> slots_;
  std::atomic<long> requests_{0};
};

struct ChatGatewayOptions {
  int caption_max_tokens = 64;
  int answer_max_tokens = 64;
  int reply_max_tokens = 512;
  int max_reprompts = 2;
  double oq_conf_threshold = 0.8;
};

/// Implements every gateway role on top of a chat transport, using the
/// canonical prompt templates and JSON reply contracts.
class ChatGateway final : public Gateway {
 public:
  explicit ChatGateway(std::shared_ptr<ChatTransport> transport, ChatGatewayOptions options = {});

  std::string vlm_model_id() const override { return transport_->model_id(); }
  std::string llm_model_id() const override { return transport_->model_id(); }
  std::string judge_model_id() const override { return transport_->model_id(); }

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
  /// Sends `prompt`, extracts the first JSON value from the reply and
  /// re-prompts up to `max_reprompts` times when it does not parse or
  /// `validate` rejects it.
  template <class T, class Convert>
  LlmStructuredReply<T> structured_call(const std::string& prompt, Convert convert);

  ChatRequest vlm_request(const VlmRequest& request, int max_tokens, bool logprobs) const;

  std::shared_ptr<ChatTransport> transport_;
  ChatGatewayOptions options_;
};

/// Extracts the first complete JSON array or object embedded in `text`
/// (models often wrap JSON in prose or code fences).
std::optional<nlohmann::json> extract_json(std::string_view text);

}  // namespace vas
