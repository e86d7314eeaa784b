#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "vas/chat_gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "vas/digest.hpp"
#include "vas/prompts.hpp"

namespace vas {

using nlohmann::json;

json chat_request_body(const ChatRequest& request) {
  json body{{"model", request.model},
            {"messages", request.messages},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (request.logprobs) body["logprobs"] = true;
  return body;
}

ChatResponse parse_chat_response(const json& body) {
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    throw Error(ErrorKind::Parse, "chat response has no choices");
  }
  const auto& choice = body["choices"][0];
  ChatResponse r;
  const auto& content = choice.at("message").at("content");
  r.content = content.is_string() ? content.get<std::string>() : std::string{};
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
    for (const auto& t : choice["logprobs"]["content"]) {
      r.tokens.push_back(t.value("token", std::string{}));
      r.token_logprobs.push_back(t.at("logprob").get<double>());
    }
    r.has_logprobs = !r.token_logprobs.empty();
  }
  if (body.contains("usage") && body["usage"].is_object()) {
    r.total_tokens = body["usage"].value("total_tokens", 0L);
  }
  return r;
}

OpenAiTransport::OpenAiTransport(BackendConfig config)
    : config_(std::move(config)), slots_(std::max(1, config_.max_concurrency)) {
  if (config_.max_concurrency > 1024) throw Error(ErrorKind::Config, "max_concurrency too large");
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr) {
      throw Error(ErrorKind::Config,
                  "environment variable '" + config_.api_key_env + "' is not set");
    }
    api_key_ = key;
  }
  const auto scheme = config_.endpoint_url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorKind::Config, "endpoint_url must include a scheme: " + config_.endpoint_url);
  }
  const auto path = config_.endpoint_url.find('/', scheme + 3);
  scheme_host_port_ = config_.endpoint_url.substr(0, path);
  path_prefix_ = path == std::string::npos ? std::string{} : config_.endpoint_url.substr(path);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

ChatResponse OpenAiTransport::complete(const ChatRequest& request) {
  ChatRequest req = request;
  if (req.model.empty()) req.model = config_.model_id;
  req.temperature = config_.temperature;
  const std::string body = chat_request_body(req).dump();
  const std::string path = path_prefix_ + "/chat/completions";

  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = config_.backoff_base_s * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    ++requests_;
    httplib::Client client(scheme_host_port_);
    const auto timeout = std::chrono::duration<double>(config_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      spdlog::debug("chat request to {} failed: {}", scheme_host_port_, last_error);
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      spdlog::debug("chat request throttled or failed: {}", last_error);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorKind::BackendUnavailable,
                  "HTTP " + std::to_string(res->status) + " from " + scheme_host_port_ + path);
    }
    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, std::string("chat response is not JSON: ") + e.what());
    }
    auto out = parse_chat_response(parsed);
    if (out.total_tokens == 0) out.total_tokens = approx_tokens(body) + approx_tokens(out.content);
    return out;
  }
  throw Error(ErrorKind::BackendUnavailable,
              "giving up after " + std::to_string(config_.max_retries + 1) + " attempts: " +
                  last_error);
}

std::optional<json> extract_json(std::string_view text) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    const char open = text[start];
    if (open != '[' && open != '{') continue;
    int depth = 0;
    bool in_string = false;
    bool escape = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escape) escape = false;
        else if (c == '\\') escape = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '[' || c == '{') ++depth;
      else if (c == ']' || c == '}') {
        if (--depth == 0) {
          try {
            return json::parse(text.substr(start, i - start + 1));
          } catch (const json::exception&) {
            break;
          }
        }
      }
    }
  }
  return std::nullopt;
}

ChatGateway::ChatGateway(std::shared_ptr<ChatTransport> transport, ChatGatewayOptions options)
    : transport_(std::move(transport)), options_(options) {
  if (!transport_) throw Error(ErrorKind::Config, "chat gateway needs a transport");
}

ChatRequest ChatGateway::vlm_request(const VlmRequest& request, int max_tokens,
                                     bool logprobs) const {
  request.validate();
  json parts = json::array();
  std::ostringstream stamps;
  stamps.precision(3);
  stamps << std::fixed << "Frame timestamps (s):";
  for (const auto& f : request.frames) stamps << ' ' << f.timestamp_s;
  parts.push_back(json{{"type", "text"}, {"text", request.prompt + "\n" + stamps.str()}});
  for (const auto& f : request.frames) {
    if (f.format == "null" || f.data.empty()) continue;
    const std::string media = f.format == "png" ? "image/png" : "image/jpeg";
    parts.push_back(json{{"type", "image_url"},
                         {"image_url", {{"url", "data:" + media + ";base64," + base64_encode(f.data)}}}});
  }
  ChatRequest r;
  r.model = transport_->model_id();
  r.messages = json::array({json{{"role", "user"}, {"content", parts}}});
  r.max_tokens = max_tokens;
  r.logprobs = logprobs;
  return r;
}

std::string ChatGateway::vlm_caption(const VlmRequest& request) {
  const int budget = request.max_tokens > 0 ? request.max_tokens : options_.caption_max_tokens;
  const auto resp = transport_->complete(vlm_request(request, budget, false));
  std::string text = resp.content;
  const auto b = text.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) throw Error(ErrorKind::EmptyCaption, "VLM returned an empty caption");
  const auto e = text.find_last_not_of(" \t\r\n");
  return text.substr(b, e - b + 1);
}

RawAnswer ChatGateway::vlm_answer(const Question& question, const VlmRequest& request) {
  VlmRequest req = request;
  if (req.prompt.empty()) req.prompt = prompts::answer_prompt(question);
  const int max_tokens = question.is_mcq() ? 1 : options_.answer_max_tokens;
  const auto resp = transport_->complete(vlm_request(req, max_tokens, true));
  if (!resp.has_logprobs) {
    throw Error(ErrorKind::Capability, "backend '" + transport_->model_id() +
                                           "' did not return token log-probabilities");
  }
  RawAnswer out;
  if (question.is_mcq()) {
    for (std::size_t i = 0; i < resp.tokens.size(); ++i) {
      const auto norm = normalize_answer(resp.tokens[i]);
      if (norm.size() == 1 && norm[0] >= 'a' && norm[0] <= 'd') {
        out.text = std::string(1, static_cast<char>(norm[0] - 'a' + 'A'));
        out.token_probs = {std::exp(resp.token_logprobs[i])};
        return out;
      }
      if (!norm.empty()) break;
    }
    throw Error(ErrorKind::Parse, "no option letter in VLM reply '" + resp.content + "'");
  }
  const auto b = resp.content.find_first_not_of(" \t\r\n");
  const auto e = resp.content.find_last_not_of(" \t\r\n");
  out.text = b == std::string::npos ? std::string{} : resp.content.substr(b, e - b + 1);
  for (double lp : resp.token_logprobs) out.token_probs.push_back(std::min(1.0, std::exp(lp)));
  return out;
}

template <class T, class Convert>
LlmStructuredReply<T> ChatGateway::structured_call(const std::string& prompt, Convert convert) {
  LlmStructuredReply<T> reply;
  json messages = json::array({json{{"role", "user"}, {"content", prompt}}});
  for (int attempt = 0; attempt <= options_.max_reprompts; ++attempt) {
    ChatRequest req;
    req.model = transport_->model_id();
    req.messages = messages;
    req.max_tokens = options_.reply_max_tokens;
    const auto resp = transport_->complete(req);
    reply.raw_text = resp.content;
    reply.tokens += resp.total_tokens;
    if (auto parsed = extract_json(resp.content)) {
      try {
        reply.parsed = convert(*parsed);
        reply.parse_ok = true;
        return reply;
      } catch (const std::exception& e) {
        spdlog::debug("reply did not match contract: {}", e.what());
      }
    }
    messages.push_back(json{{"role", "assistant"}, {"content", resp.content}});
    messages.push_back(json{{"role", "user"},
                            {"content", "Your reply could not be parsed. Reply again with only "
                                        "the requested JSON and nothing else."}});
  }
  reply.parse_ok = false;
  reply.parsed = T{};
  return reply;
}

LlmStructuredReply<std::string> ChatGateway::llm_summarize(const std::vector<Caption>& captions) {
  if (captions.empty()) throw Error(ErrorKind::InvalidInput, "no captions to summarize");
  ChatRequest req;
  req.model = transport_->model_id();
  req.messages = json::array(
      {json{{"role", "user"},
            {"content", prompts::fill(prompts::kSummary,
                                      {{"captions", prompts::format_captions(captions)}})}}});
  req.max_tokens = options_.reply_max_tokens;
  const auto resp = transport_->complete(req);
  LlmStructuredReply<std::string> r;
  r.raw_text = resp.content;
  r.parsed = resp.content;
  r.tokens = resp.total_tokens;
  return r;
}

LlmStructuredReply<std::vector<int>> ChatGateway::llm_select_candidates(
    const Question& question, const std::string& summary, const std::vector<Caption>& captions) {
  std::string q = question.text;
  if (question.is_mcq()) q += "\nOptions:\n" + prompts::format_options(question.options);
  const auto prompt = prompts::fill(prompts::kSelectCandidates,
                                    {{"summary", summary},
                                     {"captions", prompts::format_captions(captions)},
                                     {"question", q}});
  return structured_call<std::vector<int>>(prompt, [](const json& j) {
    if (!j.is_array()) throw Error(ErrorKind::Parse, "expected a JSON array");
    std::vector<int> out;
    for (const auto& v : j) out.push_back(v.get<int>());
    return out;
  });
}

LlmStructuredReply<Decision> ChatGateway::llm_decide(const Question& question,
                                                     const std::string& summary,
                                                     const std::vector<ScoredAnswer>& evaluated) {
  std::ostringstream thr;
  thr << options_.oq_conf_threshold;
  const auto prompt = prompts::fill(prompts::kDecide,
                                    {{"summary", summary},
                                     {"question", question.text},
                                     {"answers", prompts::format_answers(evaluated)},
                                     {"threshold", thr.str()}});
  return structured_call<Decision>(prompt, [](const json& j) {
    Decision d;
    const auto& acc = j.at("accept");
    if (!acc.is_null()) d.accept = acc.get<int>();
    for (const auto& v : j.at("promising")) d.promising.push_back(v.get<int>());
    return d;
  });
}

LlmStructuredReply<int> ChatGateway::llm_final_pick(const Question& question,
                                                    const std::vector<ScoredAnswer>& evaluated) {
  const auto prompt = prompts::fill(
      prompts::kFinalPick,
      {{"question", question.text}, {"answers", prompts::format_answers(evaluated)}});
  return structured_call<int>(prompt, [](const json& j) { return j.at("index").get<int>(); });
}

LlmStructuredReply<SocraticAnswer> ChatGateway::llm_socratic_answer(
    const Question& question, const std::string& summary, const std::vector<Caption>& captions) {
  const std::string options =
      question.is_mcq()
          ? "Options:\n" + prompts::format_options(question.options) +
                "Answer with the option's letter.\n"
          : std::string{};
  const auto prompt = prompts::fill(prompts::kSocratic,
                                    {{"captions", prompts::format_captions(captions)},
                                     {"summary", summary},
                                     {"question", question.text},
                                     {"options", options}});
  return structured_call<SocraticAnswer>(prompt, [](const json& j) {
    SocraticAnswer a;
    a.answer = j.at("answer").get<std::string>();
    if (j.contains("clip") && !j["clip"].is_null()) a.evidence_ordinal = j["clip"].get<int>();
    return a;
  });
}

JudgeVerdict ChatGateway::llm_judge(const Question& question, const std::string& gt_answer,
                                    const std::string& predicted) {
  const auto prompt = prompts::fill(
      prompts::kJudge, {{"question", question.text}, {"gt", gt_answer}, {"predicted", predicted}});
  auto reply = structured_call<JudgeVerdict>(prompt, [](const json& j) {
    JudgeVerdict v;
    const auto pred = normalize_answer(j.at("pred").get<std::string>());
    if (pred != "yes" && pred != "no") throw Error(ErrorKind::Parse, "pred must be yes or no");
    v.accuracy = pred == "yes" ? 100 : 0;
    const auto& s = j.at("score");
    v.score = s.is_string() ? std::stoi(s.get<std::string>()) : static_cast<int>(s.get<double>());
    if (v.score < 0 || v.score > 5) throw Error(ErrorKind::Parse, "score outside 0..5");
    v.rationale = j.value("reason", std::string{});
    return v;
  });
  JudgeVerdict v = reply.parsed;
  v.judge_model = transport_->model_id();
  if (!reply.parse_ok) {
    v = JudgeVerdict{};
    v.judge_error = true;
    v.judge_model = transport_->model_id();
    v.rationale = reply.raw_text;
  }
  return v;
}

}  // namespace vas
