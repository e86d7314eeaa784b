#include "vas/replay.hpp"

#include "vas/digest.hpp"
#include "vas/json_io.hpp"

namespace vas {

using nlohmann::json;

namespace replay_keys {

namespace {

json frames_json(const VlmRequest& r) {
  json frames = json::array();
  for (const auto& f : r.frames) {
    frames.push_back(json{{"format", f.format},
                          {"width", f.width},
                          {"height", f.height},
                          {"timestamp_s", f.timestamp_s},
                          {"data_sha256", sha256_hex(f.data)}});
  }
  return frames;
}

json vlm_json(const VlmRequest& r) {
  json j{{"frames", frames_json(r)}, {"prompt", r.prompt}, {"max_tokens", r.max_tokens}};
  if (r.clip_window) j["clip_window"] = *r.clip_window;
  return j;
}

}  // namespace

json caption(const VlmRequest& r) { return vlm_json(r); }
json answer(const Question& q, const VlmRequest& r) {
  json j = vlm_json(r);
  j["question"] = q;
  return j;
}
json summarize(const std::vector<Caption>& c) { return json{{"captions", c}}; }
json select(const Question& q, const std::string& s, const std::vector<Caption>& c) {
  return json{{"question", q}, {"summary", s}, {"captions", c}};
}
json decide(const Question& q, const std::string& s, const std::vector<ScoredAnswer>& e) {
  return json{{"question", q}, {"summary", s}, {"evaluated", e}};
}
json final_pick(const Question& q, const std::vector<ScoredAnswer>& e) {
  return json{{"question", q}, {"evaluated", e}};
}
json socratic(const Question& q, const std::string& s, const std::vector<Caption>& c) {
  return json{{"question", q}, {"summary", s}, {"captions", c}};
}
json judge(const Question& q, const std::string& gt, const std::string& predicted) {
  return json{{"question", q}, {"gt", gt}, {"predicted", predicted}};
}
std::string digest(const std::string& role, const json& request) {
  return sha256_hex(role + "\n" + request.dump());
}

}  // namespace replay_keys

namespace {

ErrorKind error_kind_from_string(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::Dataset); ++k) {
    const auto kind = static_cast<ErrorKind>(k);
    if (to_string(kind) == s) return kind;
  }
  return ErrorKind::BackendUnavailable;
}

template <class T>
json reply_json(const LlmStructuredReply<T>& r, json parsed) {
  return json{{"raw_text", r.raw_text}, {"parsed", std::move(parsed)},
              {"parse_ok", r.parse_ok}, {"tokens", r.tokens}};
}

template <class T, class F>
LlmStructuredReply<T> reply_from(const json& j, F parse) {
  LlmStructuredReply<T> r;
  r.raw_text = j.at("raw_text").get<std::string>();
  r.parse_ok = j.at("parse_ok").get<bool>();
  r.tokens = j.at("tokens").get<long>();
  r.parsed = parse(j.at("parsed"));
  return r;
}

json decision_json(const Decision& d) {
  return json{{"accept", d.accept ? json(*d.accept) : json(nullptr)}, {"promising", d.promising}};
}

Decision decision_from(const json& j) {
  Decision d;
  if (!j.at("accept").is_null()) d.accept = j["accept"].get<int>();
  d.promising = j.at("promising").get<std::vector<int>>();
  return d;
}

json socratic_json(const SocraticAnswer& a) {
  return json{{"answer", a.answer},
              {"evidence_ordinal", a.evidence_ordinal ? json(*a.evidence_ordinal) : json(nullptr)}};
}

SocraticAnswer socratic_from(const json& j) {
  SocraticAnswer a;
  a.answer = j.at("answer").get<std::string>();
  if (!j.at("evidence_ordinal").is_null()) a.evidence_ordinal = j["evidence_ordinal"].get<int>();
  return a;
}

json verdict_json(const JudgeVerdict& v) {
  return json{{"accuracy", v.accuracy},       {"score", v.score},
              {"rationale", v.rationale},     {"judge_error", v.judge_error},
              {"judge_model", v.judge_model}};
}

JudgeVerdict verdict_from(const json& j) {
  JudgeVerdict v;
  v.accuracy = j.at("accuracy").get<int>();
  v.score = j.at("score").get<int>();
  v.rationale = j.at("rationale").get<std::string>();
  v.judge_error = j.at("judge_error").get<bool>();
  v.judge_model = j.at("judge_model").get<std::string>();
  return v;
}

}  // namespace

ReplayGateway::ReplayGateway(const std::string& transcript_path) {
  std::ifstream in(transcript_path);
  if (!in) throw Error(ErrorKind::Config, "cannot open replay transcript '" + transcript_path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse,
                  transcript_path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const auto role = rec.at("role").get<std::string>();
    if (role == "meta") {
      const auto& p = rec.at("response_payload");
      vlm_model_ = p.value("vlm_model_id", vlm_model_);
      llm_model_ = p.value("llm_model_id", llm_model_);
      judge_model_ = p.value("judge_model_id", judge_model_);
      continue;
    }
    records_[rec.at("request_digest").get<std::string>()] = rec.at("response_payload");
  }
}

const json& ReplayGateway::lookup(const std::string& role, const json& request) const {
  const auto d = replay_keys::digest(role, request);
  const auto it = records_.find(d);
  if (it == records_.end()) {
    throw Error(ErrorKind::ReplayMiss, "no recorded " + role + " response for digest " + d);
  }
  if (it->second.contains("error")) {
    throw Error(error_kind_from_string(it->second["error"].get<std::string>()),
                it->second.value("message", std::string{}));
  }
  return it->second;
}

std::string ReplayGateway::vlm_caption(const VlmRequest& request) {
  request.validate();
  return lookup("vlm_caption", replay_keys::caption(request)).at("text").get<std::string>();
}

RawAnswer ReplayGateway::vlm_answer(const Question& question, const VlmRequest& request) {
  request.validate();
  const auto& p = lookup("vlm_answer", replay_keys::answer(question, request));
  return RawAnswer{p.at("text").get<std::string>(), p.at("token_probs").get<std::vector<double>>()};
}

LlmStructuredReply<std::string> ReplayGateway::llm_summarize(const std::vector<Caption>& c) {
  return reply_from<std::string>(lookup("llm_summarize", replay_keys::summarize(c)),
                                 [](const json& j) { return j.get<std::string>(); });
}

LlmStructuredReply<std::vector<int>> ReplayGateway::llm_select_candidates(
    const Question& q, const std::string& s, const std::vector<Caption>& c) {
  return reply_from<std::vector<int>>(lookup("llm_select_candidates", replay_keys::select(q, s, c)),
                                      [](const json& j) { return j.get<std::vector<int>>(); });
}

LlmStructuredReply<Decision> ReplayGateway::llm_decide(const Question& q, const std::string& s,
                                                       const std::vector<ScoredAnswer>& e) {
  return reply_from<Decision>(lookup("llm_decide", replay_keys::decide(q, s, e)), decision_from);
}

LlmStructuredReply<int> ReplayGateway::llm_final_pick(const Question& q,
                                                      const std::vector<ScoredAnswer>& e) {
  return reply_from<int>(lookup("llm_final_pick", replay_keys::final_pick(q, e)),
                         [](const json& j) { return j.get<int>(); });
}

LlmStructuredReply<SocraticAnswer> ReplayGateway::llm_socratic_answer(
    const Question& q, const std::string& s, const std::vector<Caption>& c) {
  return reply_from<SocraticAnswer>(lookup("llm_socratic_answer", replay_keys::socratic(q, s, c)),
                                    socratic_from);
}

JudgeVerdict ReplayGateway::llm_judge(const Question& q, const std::string& gt,
                                      const std::string& predicted) {
  return verdict_from(lookup("llm_judge", replay_keys::judge(q, gt, predicted)));
}

TranscriptWriter::TranscriptWriter(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw Error(ErrorKind::Config, "cannot write transcript '" + path + "'");
}

void TranscriptWriter::write(const std::string& role, const std::string& digest,
                             const json& payload) {
  std::lock_guard lock(mu_);
  if (!digest.empty() && !written_.insert(digest).second) return;
  out_ << json{{"role", role}, {"request_digest", digest}, {"response_payload", payload}}.dump()
       << '\n';
  out_.flush();
}

void TranscriptWriter::write_meta(const Gateway& gateway) {
  {
    std::lock_guard lock(mu_);
    if (meta_written_) return;
    meta_written_ = true;
  }
  write("meta", "",
        json{{"vlm_model_id", gateway.vlm_model_id()},
             {"llm_model_id", gateway.llm_model_id()},
             {"judge_model_id", gateway.judge_model_id()}});
}

RecordingGateway::RecordingGateway(std::shared_ptr<Gateway> inner,
                                   const std::string& transcript_path)
    : RecordingGateway(std::move(inner), std::make_shared<TranscriptWriter>(transcript_path)) {}

RecordingGateway::RecordingGateway(std::shared_ptr<Gateway> inner,
                                   std::shared_ptr<TranscriptWriter> writer)
    : inner_(std::move(inner)), writer_(std::move(writer)) {
  if (!inner_) throw Error(ErrorKind::Config, "recording gateway needs an inner gateway");
  writer_->write_meta(*inner_);
}

template <class F>
auto RecordingGateway::record(const std::string& role, const json& request, F&& call) {
  const auto digest = replay_keys::digest(role, request);
  try {
    auto [result, payload] = call();
    writer_->write(role, digest, payload);
    return result;
  } catch (const Error& e) {
    // Strip the "<kind>: " prefix added by Error so replays reproduce the
    // original message.
    std::string msg = e.what();
    const auto prefix = std::string(to_string(e.kind())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    writer_->write(role, digest, json{{"error", std::string(to_string(e.kind()))}, {"message", msg}});
    throw;
  }
}

std::string RecordingGateway::vlm_caption(const VlmRequest& request) {
  return record("vlm_caption", replay_keys::caption(request), [&] {
    auto text = inner_->vlm_caption(request);
    return std::pair{text, json{{"text", text}}};
  });
}

RawAnswer RecordingGateway::vlm_answer(const Question& q, const VlmRequest& request) {
  return record("vlm_answer", replay_keys::answer(q, request), [&] {
    auto a = inner_->vlm_answer(q, request);
    return std::pair{a, json{{"text", a.text}, {"token_probs", a.token_probs}}};
  });
}

LlmStructuredReply<std::string> RecordingGateway::llm_summarize(const std::vector<Caption>& c) {
  return record("llm_summarize", replay_keys::summarize(c), [&] {
    auto r = inner_->llm_summarize(c);
    return std::pair{r, reply_json(r, r.parsed)};
  });
}

LlmStructuredReply<std::vector<int>> RecordingGateway::llm_select_candidates(
    const Question& q, const std::string& s, const std::vector<Caption>& c) {
  return record("llm_select_candidates", replay_keys::select(q, s, c), [&] {
    auto r = inner_->llm_select_candidates(q, s, c);
    return std::pair{r, reply_json(r, r.parsed)};
  });
}

LlmStructuredReply<Decision> RecordingGateway::llm_decide(const Question& q, const std::string& s,
                                                          const std::vector<ScoredAnswer>& e) {
  return record("llm_decide", replay_keys::decide(q, s, e), [&] {
    auto r = inner_->llm_decide(q, s, e);
    return std::pair{r, reply_json(r, decision_json(r.parsed))};
  });
}

LlmStructuredReply<int> RecordingGateway::llm_final_pick(const Question& q,
                                                         const std::vector<ScoredAnswer>& e) {
  return record("llm_final_pick", replay_keys::final_pick(q, e), [&] {
    auto r = inner_->llm_final_pick(q, e);
    return std::pair{r, reply_json(r, r.parsed)};
  });
}

LlmStructuredReply<SocraticAnswer> RecordingGateway::llm_socratic_answer(
    const Question& q, const std::string& s, const std::vector<Caption>& c) {
  return record("llm_socratic_answer", replay_keys::socratic(q, s, c), [&] {
    auto r = inner_->llm_socratic_answer(q, s, c);
    return std::pair{r, reply_json(r, socratic_json(r.parsed))};
  });
}

JudgeVerdict RecordingGateway::llm_judge(const Question& q, const std::string& gt,
                                         const std::string& predicted) {
  return record("llm_judge", replay_keys::judge(q, gt, predicted), [&] {
    auto v = inner_->llm_judge(q, gt, predicted);
    return std::pair{v, verdict_json(v)};
  });
}

}  // namespace vas
