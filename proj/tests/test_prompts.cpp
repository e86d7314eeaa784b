#include <doctest.h>

#include "vas/prompts.hpp"

using namespace vas;

TEST_CASE("fill substitutes known keys only") {
  CHECK(prompts::fill("a {x} b {y}", {{"x", "1"}}) == "a 1 b {y}");
  CHECK(prompts::fill("{\"k\": {x}}", {{"x", "2"}}) == "{\"k\": 2}");
  CHECK(prompts::fill("{x}{x}", {{"x", "ab"}}) == "abab");
}

TEST_CASE("prompt hashes are stable and parameter sensitive") {
  CHECK(prompts::caption_prompt_hash(64) == prompts::caption_prompt_hash(64));
  CHECK(prompts::caption_prompt_hash(64) != prompts::caption_prompt_hash(768));
  CHECK(prompts::prompt_hash("t", "a") != prompts::prompt_hash("t", "b"));
  CHECK(prompts::caption_prompt(64).find("64") != std::string::npos);
}

TEST_CASE("answer prompts carry the options for MCQ") {
  Question q{"q", "Which color?", QuestionKind::Mcq, {"red", "blue", "green", "pink"}, {}, {}, {}, "v"};
  const auto p = prompts::answer_prompt(q);
  CHECK(p.find("Which color?") != std::string::npos);
  CHECK(p.find("A. red") != std::string::npos);
  CHECK(p.find("D. pink") != std::string::npos);
  q.kind = QuestionKind::Open;
  q.options.clear();
  CHECK(prompts::answer_prompt(q).find("A. red") == std::string::npos);
}

TEST_CASE("caption and answer listings") {
  Caption c{ClipRef{"v", TemporalWindow{60, 120}, 1, 1, nullptr}, "a dog runs", 64, "m", "h"};
  const auto text = prompts::format_captions({c});
  CHECK(text.find("1 [60-120]: a dog runs") != std::string::npos);

  ScoredAnswer a;
  a.text = "red";
  a.confidence = 0.5;
  a.clip = c.clip;
  ScoredAnswer f = a;
  f.failed = true;
  const auto listing = prompts::format_answers({a, f});
  CHECK(listing.find("0 [60-120]") != std::string::npos);
  CHECK(listing.find("<evaluation failed>") != std::string::npos);
}
