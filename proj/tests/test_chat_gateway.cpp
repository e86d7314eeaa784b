#include <doctest.h>

#include <cmath>
#include <deque>
#include <mutex>

#include "vas/chat_gateway.hpp"
#include "vas/confidence.hpp"

using namespace vas;
using nlohmann::json;

namespace {

class ScriptedTransport final : public ChatTransport {
 public:
  std::deque<ChatResponse> replies;
  std::vector<ChatRequest> seen;

  ChatResponse complete(const ChatRequest& request) override {
    seen.push_back(request);
    REQUIRE_FALSE(replies.empty());
    auto r = replies.front();
    replies.pop_front();
    return r;
  }
  std::string model_id() const override { return "scripted"; }
};

ChatResponse text(std::string s, long tokens = 10) {
  ChatResponse r;
  r.content = std::move(s);
  r.total_tokens = tokens;
  return r;
}

ChatResponse with_logprobs(std::vector<std::string> tokens, std::vector<double> probs) {
  ChatResponse r;
  for (const auto& t : tokens) r.content += t;
  r.tokens = tokens;
  for (double p : probs) r.token_logprobs.push_back(std::log(p));
  r.has_logprobs = true;
  return r;
}

VlmRequest frames_request() {
  VlmRequest r;
  r.frames = {EncodedFrame{"jpeg", 4, 4, 1.0, "abc"}, EncodedFrame{"jpeg", 4, 4, 2.0, "def"}};
  r.prompt = "Describe.";
  r.max_tokens = 64;
  return r;
}

Question oq() { return Question{"q", "What color?", QuestionKind::Open, {}, {}, {}, {}, "v"}; }
Question mcq() {
  return Question{"q", "Which?", QuestionKind::Mcq, {"a", "b", "c", "d"}, {}, {}, {}, "v"};
}

}  // namespace

TEST_CASE("request body and response parsing") {
  ChatRequest req;
  req.model = "m";
  req.messages = json::array({json{{"role", "user"}, {"content", "hi"}}});
  req.max_tokens = 5;
  req.logprobs = true;
  const auto body = chat_request_body(req);
  CHECK(body["model"] == "m");
  CHECK(body["max_tokens"] == 5);
  CHECK(body["logprobs"] == true);

  const auto resp = parse_chat_response(json::parse(R"({
    "choices": [{"message": {"content": "red"},
                 "logprobs": {"content": [{"token": "red", "logprob": -0.1}]}}],
    "usage": {"total_tokens": 42}})"));
  CHECK(resp.content == "red");
  CHECK(resp.has_logprobs);
  REQUIRE(resp.token_logprobs.size() == 1);
  CHECK(resp.token_logprobs[0] == doctest::Approx(-0.1));
  CHECK(resp.total_tokens == 42);

  const auto plain = parse_chat_response(json::parse(R"({"choices": [{"message": {"content": "x"}}]})"));
  CHECK_FALSE(plain.has_logprobs);
}

TEST_CASE("extract_json finds embedded values") {
  CHECK(extract_json("```json\n[1, 2]\n```") == json::array({1, 2}));
  CHECK((*extract_json("Sure! {\"accept\": null, \"promising\": [0]} done"))["promising"][0] == 0);
  CHECK(extract_json("text with [brackets] then [3]") == json::array({3}));
  CHECK_FALSE(extract_json("no json here"));
  CHECK((*extract_json(R"({"s": "a } inside"})"))["s"] == "a } inside");
}

TEST_CASE("vlm roles") {
  auto t = std::make_shared<ScriptedTransport>();
  ChatGateway g(t);

  t->replies.push_back(text("  a dog runs  "));
  CHECK(g.vlm_caption(frames_request()) == "a dog runs");
  const auto& parts = t->seen.back().messages[0]["content"];
  CHECK(parts.size() == 3);
  CHECK(parts[1]["image_url"]["url"].get<std::string>().rfind("data:image/jpeg;base64,", 0) == 0);
  CHECK(parts[0]["text"].get<std::string>().find("1.000 2.000") != std::string::npos);
  CHECK_FALSE(t->seen.back().logprobs);

  t->replies.push_back(text("   "));
  try {
    g.vlm_caption(frames_request());
    FAIL("expected empty caption");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyCaption);
  }

  t->replies.push_back(with_logprobs({"red", " car"}, {0.9, 0.4}));
  const auto a = g.vlm_answer(oq(), frames_request());
  CHECK(a.text == "red car");
  REQUIRE(a.token_probs.size() == 2);
  CHECK(a.token_probs[1] == doctest::Approx(0.4));
  CHECK(t->seen.back().logprobs);

  t->replies.push_back(with_logprobs({"B"}, {0.7}));
  const auto m = g.vlm_answer(mcq(), frames_request());
  CHECK(m.text == "B");
  REQUIRE(m.token_probs.size() == 1);
  CHECK(aggregate(m.token_probs) == doctest::Approx(0.7));
  CHECK(t->seen.back().max_tokens == 1);

  t->replies.push_back(text("red"));
  try {
    g.vlm_answer(oq(), frames_request());
    FAIL("expected capability error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Capability);
  }
}

TEST_CASE("null frames are sent as timestamps only") {
  auto t = std::make_shared<ScriptedTransport>();
  ChatGateway g(t);
  VlmRequest r = frames_request();
  for (auto& f : r.frames) f.format = "null";
  t->replies.push_back(text("x"));
  g.vlm_caption(r);
  CHECK(t->seen.back().messages[0]["content"].size() == 1);
}

TEST_CASE("structured replies re-prompt on bad JSON") {
  auto t = std::make_shared<ScriptedTransport>();
  ChatGateway g(t);
  std::vector<Caption> caps{Caption{ClipRef{"v", TemporalWindow{0, 60}, 1, 0, nullptr}, "a", 64, "m", "h"}};

  t->replies.push_back(text("I think clips one and two", 5));
  t->replies.push_back(text("[0, 2]", 7));
  const auto sel = g.llm_select_candidates(oq(), "summary", caps);
  CHECK(sel.parse_ok);
  CHECK(sel.parsed == std::vector<int>{0, 2});
  CHECK(sel.tokens == 12);
  CHECK(t->seen.back().messages.size() == 3);

  for (int i = 0; i < 3; ++i) t->replies.push_back(text("nope"));
  const auto bad = g.llm_select_candidates(oq(), "summary", caps);
  CHECK_FALSE(bad.parse_ok);
  CHECK(bad.parsed.empty());
  CHECK(t->replies.empty());

  t->replies.push_back(text(R"({"accept": 1, "promising": []})"));
  const auto d = g.llm_decide(oq(), "s", {});
  CHECK(d.parse_ok);
  CHECK(d.parsed.accept == 1);

  t->replies.push_back(text(R"({"index": 3})"));
  CHECK(g.llm_final_pick(oq(), {}).parsed == 3);

  t->replies.push_back(text(R"({"answer": "red", "clip": 4})"));
  const auto s = g.llm_socratic_answer(oq(), "s", caps);
  CHECK(s.parsed.answer == "red");
  CHECK(s.parsed.evidence_ordinal == 4);
}

TEST_CASE("judge verdicts") {
  auto t = std::make_shared<ScriptedTransport>();
  ChatGateway g(t);
  t->replies.push_back(text(R"({"pred": "yes", "score": 4, "reason": "close"})"));
  const auto v = g.llm_judge(oq(), "red", "crimson");
  CHECK(v.accuracy == 100);
  CHECK(v.score == 4);
  CHECK(v.judge_model == "scripted");
  CHECK_FALSE(v.judge_error);

  for (int i = 0; i < 3; ++i) t->replies.push_back(text(R"({"pred": "maybe", "score": 9})"));
  const auto bad = g.llm_judge(oq(), "red", "blue");
  CHECK(bad.judge_error);
  CHECK(bad.accuracy == 0);
}
