#include "vas/gateway.hpp"

#include <cctype>

namespace vas {

void VlmRequest::validate() const {
  if (frames.empty()) throw Error(ErrorKind::InvalidInput, "VLM request has no frames");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp_s > frames[i - 1].timestamp_s)) {
      throw Error(ErrorKind::InvalidInput, "VLM request frame timestamps must be ascending");
    }
  }
}

CompositeGateway::CompositeGateway(std::shared_ptr<Gateway> vlm, std::shared_ptr<Gateway> llm,
                                   std::shared_ptr<Gateway> judge)
    : vlm_(std::move(vlm)), llm_(std::move(llm)), judge_(std::move(judge)) {
  if (!vlm_ || !llm_ || !judge_) throw Error(ErrorKind::Config, "composite gateway needs all roles");
}

std::vector<int> sanitize_ordinals(const std::vector<int>& raw, const std::set<int>& valid) {
  std::vector<int> out;
  std::set<int> seen;
  for (int o : raw) {
    if (valid.count(o) == 0 || !seen.insert(o).second) continue;
    out.push_back(o);
  }
  return out;
}

int best_answer_index(const std::vector<ScoredAnswer>& evaluated) {
  int best = -1;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const auto& a = evaluated[i];
    const auto& b = evaluated[static_cast<std::size_t>(best)];
    if (a.confidence > b.confidence ||
        (a.confidence == b.confidence && a.clip.window.start_s < b.clip.window.start_s)) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

long approx_tokens(std::string_view text) {
  return static_cast<long>((text.size() + 3) / 4);
}

std::string normalize_answer(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  auto strip = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
  while (b < e && strip(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && strip(static_cast<unsigned char>(text[e - 1]))) --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
  }
  return out;
}

}  // namespace vas
