#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vas/core.hpp"

namespace vas::prompts {

/// Bumped whenever any template text changes; part of every prompt hash.
inline constexpr std::string_view kVersion = "vas-prompts-v1";

inline constexpr std::string_view kCaption =
    "These frames are uniformly sampled from a short clip of a longer video. "
    "Describe what happens in the clip in one short sentence of at most {max_tokens} tokens. "
    "Mention the main people, objects and actions.";

inline constexpr std::string_view kAnswerOpen =
    "These frames are uniformly sampled from a clip of a video, shown in temporal order.\n"
    "Question: {question}\n"
    "Answer the question with a short, precise phrase based only on what is visible.";

inline constexpr std::string_view kAnswerMcq =
    "These frames are uniformly sampled from a clip of a video, shown in temporal order.\n"
    "Question: {question}\n"
    "Options:\n{options}\n"
    "Answer with the option's letter from the given choices directly.";

inline constexpr std::string_view kSummary =
    "Below are short captions of consecutive clips of a long video, in temporal order.\n"
    "{captions}\n"
    "Write a global yet brief summary of the whole video in a few sentences.";

inline constexpr std::string_view kSelectCandidates =
    "You are searching a long video for the answer to a question.\n"
    "Video summary: {summary}\n"
    "Clip captions, one per line as <ordinal> [start_s-end_s]: caption\n{captions}\n"
    "Question: {question}\n"
    "Select the clips that are most likely to contain the answer. You may select any number "
    "of clips, including none. Reply only with a JSON array of clip ordinals, for example "
    "[3, 17]. Reply [] if no clip is likely to contain the answer.";

inline constexpr std::string_view kDecide =
    "You are searching a long video for the answer to a question.\n"
    "Video summary: {summary}\n"
    "Question: {question}\n"
    "A vision model inspected the following clips and proposed answers, one per line as\n"
    "<index> [start_s-end_s] level=<1 coarse..3 fine> confidence=<0..1> caption=\"...\" "
    "answer=\"...\"\n{answers}\n"
    "Decide whether one of these answers should be the final answer. Consider whether the "
    "answer is complete, whether its confidence reaches {threshold}, whether it is consistent "
    "with the clip caption, and how precisely the clip localizes the answer in time. If none "
    "qualifies, list the clips that remain promising for a closer look.\n"
    "Reply only with JSON: {\"accept\": <index or null>, \"promising\": [<indices>]}";

inline constexpr std::string_view kFinalPick =
    "You are searching a long video for the answer to a question.\n"
    "Question: {question}\n"
    "All answers proposed during the search, one per line as\n"
    "<index> [start_s-end_s] level=<1 coarse..3 fine> confidence=<0..1> caption=\"...\" "
    "answer=\"...\"\n{answers}\n"
    "Select the most suitable answer among them. Reply only with JSON: {\"index\": <index>}";

inline constexpr std::string_view kSocratic =
    "Below are captions of consecutive clips of a long video, one per line as\n"
    "<ordinal> [start_s-end_s]: caption\n{captions}\n"
    "Video summary: {summary}\n"
    "Question: {question}\n{options}"
    "Answer the question using only the captions. Reply only with JSON: "
    "{\"answer\": \"<answer>\", \"clip\": <ordinal of the caption that supports the answer, or "
    "null>}";

inline constexpr std::string_view kJudge =
    "You evaluate answers to questions about videos. Compare the predicted answer with the "
    "correct answer and assess Correctness of Information, Detailed Orientation, Contextual "
    "Understanding, Temporal Understanding and Consistency.\n"
    "Question: {question}\n"
    "Correct answer: {gt}\n"
    "Predicted answer: {predicted}\n"
    "Reply only with JSON: {\"pred\": \"yes\" or \"no\", \"score\": <integer 0-5>, "
    "\"reason\": \"<one sentence>\"}";

/// Replaces every `{key}` in `tmpl` with the matching value. Unknown keys and
/// literal braces are left untouched.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Short stable hash identifying a template plus its parameters.
std::string prompt_hash(std::string_view tmpl, std::string_view params = {});

std::string caption_prompt(int max_tokens);
std::string caption_prompt_hash(int max_tokens);
std::string answer_prompt(const Question& q);

std::string format_captions(const std::vector<Caption>& captions);
std::string format_answers(const std::vector<ScoredAnswer>& answers);
std::string format_options(const std::vector<std::string>& options);

}  // namespace vas::prompts
