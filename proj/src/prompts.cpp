#include "vas/prompts.hpp"

#include <sstream>

#include "vas/digest.hpp"

namespace vas::prompts {

std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const std::string key(tmpl.substr(i + 1, close - i - 1));
        if (auto it = values.find(key); it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string prompt_hash(std::string_view tmpl, std::string_view params) {
  std::string material(kVersion);
  material += '\n';
  material += tmpl;
  material += '\n';
  material += params;
  return sha256_hex(material).substr(0, 16);
}

std::string caption_prompt(int max_tokens) {
  return fill(kCaption, {{"max_tokens", std::to_string(max_tokens)}});
}

std::string caption_prompt_hash(int max_tokens) {
  return prompt_hash(kCaption, "max_tokens=" + std::to_string(max_tokens));
}

std::string answer_prompt(const Question& q) {
  if (q.is_mcq()) {
    return fill(kAnswerMcq, {{"question", q.text}, {"options", format_options(q.options)}});
  }
  return fill(kAnswerOpen, {{"question", q.text}});
}

namespace {

std::string window_str(const TemporalWindow& w) {
  std::ostringstream os;
  os << '[' << w.start_s << '-' << w.end_s << ']';
  return os.str();
}

}  // namespace

std::string format_captions(const std::vector<Caption>& captions) {
  std::ostringstream os;
  for (const auto& c : captions) {
    os << c.clip.ordinal << ' ' << window_str(c.clip.window) << ": " << c.text << '\n';
  }
  return os.str();
}

std::string format_answers(const std::vector<ScoredAnswer>& answers) {
  std::ostringstream os;
  os.precision(4);
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const auto& a = answers[i];
    os << i << ' ' << window_str(a.clip.window) << " level=" << a.clip.level
       << " confidence=" << a.confidence << " caption=\""
       << (a.caption ? a.caption->text : std::string{}) << "\" answer=\""
       << (a.failed ? std::string{"<evaluation failed>"} : a.text) << "\"\n";
  }
  return os.str();
}

std::string format_options(const std::vector<std::string>& options) {
  std::ostringstream os;
  for (std::size_t i = 0; i < options.size(); ++i) {
    os << static_cast<char>('A' + i) << ". " << options[i] << '\n';
  }
  return os.str();
}

}  // namespace vas::prompts
