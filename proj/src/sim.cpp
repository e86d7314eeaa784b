#include "vas/sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "vas/confidence.hpp"
#include "vas/digest.hpp"
#include "vas/frame_sampler.hpp"
#include "vas/json_io.hpp"

namespace vas::sim {

using nlohmann::json;

namespace {

struct Scene {
  const char* descriptor;
  const char* object;
};

constexpr Scene kScenes[] = {
    {"a man opens a suitcase", "suitcase"},
    {"a cyclist passes the fountain", "helmet"},
    {"a woman waters the plants", "watering can"},
    {"a dog chases a ball", "ball"},
    {"a taxi stops at the corner", "taxi"},
    {"a child releases a balloon", "balloon"},
    {"a chef plates a dessert", "plate"},
    {"a goalkeeper saves a penalty", "glove"},
    {"a musician tunes a guitar", "guitar"},
    {"a courier drops a parcel", "parcel"},
    {"a painter climbs a ladder", "ladder"},
    {"a runner ties her shoes", "shoes"},
    {"a boat leaves the harbor", "sail"},
    {"a clerk stamps a document", "folder"},
    {"a student raises a hand", "backpack"},
    {"a referee shows a card", "card"},
    {"a barista pours latte art", "mug"},
    {"a skater jumps a rail", "skateboard"},
    {"a pilot waves from the cockpit", "scarf"},
    {"a vendor hands over flowers", "bouquet"},
    {"a crane lifts a container", "container"},
    {"a girl feeds the pigeons", "coat"},
    {"a waiter drops a tray", "tray"},
    {"a driver changes a tire", "jack"},
};

constexpr const char* kColors[] = {"red",    "blue",  "green", "yellow", "black",  "white",
                                   "orange", "purple", "pink", "brown",  "silver", "gray"};

constexpr std::size_t kSceneCount = std::size(kScenes);
constexpr std::size_t kColorCount = std::size(kColors);

std::string question_text(const Scene& s) {
  return std::string("When ") + s.descriptor + ", what color is the " + s.object + "?";
}

std::string pick_color(Rng& rng, const std::string& avoid = {}) {
  for (;;) {
    std::string c = kColors[rng.index(kColorCount)];
    if (c != avoid) return c;
  }
}

bool fits(const std::vector<Event>& events, const TemporalWindow& w, double gap) {
  for (const auto& e : events) {
    if (w.start_s < e.window.end_s + gap && e.window.start_s < w.end_s + gap) return false;
  }
  return true;
}

double clamp_conf(double c) { return std::clamp(c, 1e-3, 1.0 - 1e-3); }

std::string option_letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

}  // namespace

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

VideoRef SyntheticWorld::video() const {
  VideoRef v;
  v.video_id = question.video_id;
  v.duration_s = duration_s;
  v.source_uri = std::string(kSimScheme) + question.video_id;
  v.width = 1280;
  v.height = 720;
  v.native_fps = 30.0;
  return v;
}

const Event* SyntheticWorld::needle() const {
  for (const auto& e : events) {
    if (e.is_needle) return &e;
  }
  return nullptr;
}

SyntheticWorld generate_world(std::uint64_t seed, const WorldConfig& config) {
  if (!(config.duration_s >= 60.0)) {
    throw Error(ErrorKind::Generation, "world duration must be at least 60 s");
  }
  if (!(config.needle_min_s > 0.0 && config.needle_min_s <= config.needle_max_s &&
        config.decoy_min_s > 0.0 && config.decoy_min_s <= config.decoy_max_s)) {
    throw Error(ErrorKind::Generation, "event length bounds are inconsistent");
  }
  Rng rng(seed);
  SyntheticWorld w;
  w.seed = seed;
  w.duration_s = config.duration_s;
  const std::string id = "sim-" + std::to_string(seed);
  const double budget = 0.3 * config.duration_s;

  const auto& scene = kScenes[rng.index(kSceneCount)];
  Question& q = w.question;
  q.id = id;
  q.video_id = id;
  q.text = question_text(scene);
  q.category = config.adversarial ? "needle-free" : "needle";

  if (config.adversarial) {
    const auto clips = tile_window(TemporalWindow{0.0, config.duration_s}, config.clip_len_s);
    const double max_len = std::min(config.decoy_max_s, 0.25 * config.clip_len_s);
    if (max_len < config.decoy_min_s ||
        static_cast<double>(clips.size()) * max_len > budget) {
      throw Error(ErrorKind::Generation, "decoys do not fit in 30% of the timeline");
    }
    for (const auto& c : clips) {
      const double len = rng.uniform(config.decoy_min_s, max_len);
      const double start = rng.uniform(c.start_s, c.end_s - len);
      w.events.push_back(Event{TemporalWindow{start, start + len}, scene.descriptor, scene.object,
                               pick_color(rng), false});
    }
    q.kind = QuestionKind::Open;
    q.gt_answer = "unanswerable";
    return w;
  }

  const double max_len = std::max(config.needle_max_s, config.decoy_max_s);
  if (static_cast<double>(config.decoys + 1) * max_len > budget) {
    throw Error(ErrorKind::Generation,
                std::to_string(config.decoys + 1) + " events of up to " + std::to_string(max_len) +
                    " s do not fit in 30% of a " + std::to_string(config.duration_s) +
                    " s timeline");
  }
  const double needle_len = rng.uniform(config.needle_min_s, config.needle_max_s);
  const double needle_start = rng.uniform(0.0, config.duration_s - needle_len);
  const std::string detail = pick_color(rng);
  w.events.push_back(Event{TemporalWindow{needle_start, needle_start + needle_len},
                           scene.descriptor, scene.object, detail, true});

  for (int i = 0; i < config.decoys; ++i) {
    const Scene* s = nullptr;
    do {
      s = &kScenes[rng.index(kSceneCount)];
    } while (s == &scene);
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double len = rng.uniform(config.decoy_min_s, config.decoy_max_s);
      const double start = rng.uniform(0.0, config.duration_s - len);
      const TemporalWindow win{start, start + len};
      if (fits(w.events, win, 1.0)) {
        w.events.push_back(Event{win, s->descriptor, s->object, pick_color(rng), false});
        placed = true;
      }
    }
    if (!placed) throw Error(ErrorKind::Generation, "cannot place disjoint decoy events");
  }
  std::sort(w.events.begin(), w.events.end(),
            [](const Event& a, const Event& b) { return a.window.start_s < b.window.start_s; });

  q.gt_window = TemporalWindow{needle_start, needle_start + needle_len};
  if (config.mcq) {
    std::vector<std::string> options{detail};
    while (options.size() < 4) {
      auto c = pick_color(rng);
      if (std::find(options.begin(), options.end(), c) == options.end()) options.push_back(c);
    }
    for (std::size_t i = options.size() - 1; i > 0; --i) {
      std::swap(options[i], options[rng.index(i + 1)]);
    }
    const auto pos = std::find(options.begin(), options.end(), detail) - options.begin();
    q.kind = QuestionKind::Mcq;
    q.options = options;
    q.gt_answer = option_letter(static_cast<std::size_t>(pos));
  } else {
    q.kind = QuestionKind::Open;
    q.gt_answer = detail;
  }
  return w;
}

json to_json(const SyntheticWorld& w) {
  json events = json::array();
  for (const auto& e : w.events) {
    events.push_back(json{{"window", e.window},
                          {"descriptor", e.descriptor},
                          {"object", e.object},
                          {"detail", e.detail},
                          {"is_needle", e.is_needle}});
  }
  return json{{"seed", w.seed}, {"duration_s", w.duration_s}, {"events", events},
              {"question", w.question}};
}

SyntheticWorld world_from_json(const json& j) {
  SyntheticWorld w;
  w.seed = j.at("seed").get<std::uint64_t>();
  w.duration_s = j.at("duration_s").get<double>();
  for (const auto& e : j.at("events")) {
    w.events.push_back(Event{e.at("window").get<TemporalWindow>(),
                             e.at("descriptor").get<std::string>(),
                             e.value("object", std::string{}), e.at("detail").get<std::string>(),
                             e.at("is_needle").get<bool>()});
  }
  w.question = j.at("question").get<Question>();
  return w;
}

void MockFidelity::validate() const {
  if (!(answer_conf_hit > answer_conf_miss)) {
    throw Error(ErrorKind::Config, "answer_conf_hit must exceed answer_conf_miss");
  }
  if (!(answer_conf_hit > 0.0 && answer_conf_hit < 1.0 + 1e-12 && answer_conf_miss > 0.0)) {
    throw Error(ErrorKind::Config, "mock confidences must lie in (0, 1]");
  }
  if (!(noise >= 0.0 && noise <= 0.2)) throw Error(ErrorKind::Config, "noise must lie in [0, 0.2]");
}

MockGateway::MockGateway(SyntheticWorld world, MockFidelity fidelity)
    : world_(std::move(world)), fidelity_(fidelity) {
  fidelity_.validate();
}

std::string MockGateway::vlm_caption(const VlmRequest& request) {
  request.validate();
  const TemporalWindow window =
      request.clip_window ? *request.clip_window
                          : TemporalWindow{request.frames.front().timestamp_s,
                                           request.frames.back().timestamp_s + 1e-6};
  std::vector<std::string> parts;
  for (const auto& e : world_.events) {
    if (!e.window.overlaps(window)) continue;
    if (e.is_needle && !fidelity_.caption_reveals_needle) continue;
    if (std::find(parts.begin(), parts.end(), e.descriptor) == parts.end()) {
      parts.push_back(e.descriptor);
    }
  }
  if (parts.empty()) return std::string(kNothingNotable);
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "; ") + p;
  return out;
}

RawAnswer MockGateway::vlm_answer(const Question& question, const VlmRequest& request) {
  request.validate();
  json key = json::array({world_.seed, question.id});
  for (const auto& f : request.frames) key.push_back(f.timestamp_s);
  Rng rng(digest_u64(key.dump()));

  const Event* needle = world_.needle();
  bool hit = false;
  if (needle) {
    for (const auto& f : request.frames) hit = hit || needle->window.contains(f.timestamp_s);
  }
  double conf = hit ? fidelity_.answer_conf_hit : fidelity_.answer_conf_miss;
  if (fidelity_.noise > 0.0) {
    double noisy = -1.0;
    for (int attempt = 0; attempt < 64 && !(noisy > 0.0 && noisy < 1.0); ++attempt) {
      noisy = conf + fidelity_.noise * rng.normal();
    }
    conf = clamp_conf(noisy);
  }
  bool correct = hit;
  if (fidelity_.calibrated) correct = needle && rng.uniform() < conf;

  RawAnswer out;
  if (question.is_mcq()) {
    std::size_t right = 0;
    if (question.gt_answer && question.gt_answer->size() == 1) {
      right = static_cast<std::size_t>(std::toupper(static_cast<unsigned char>((*question.gt_answer)[0])) - 'A');
    }
    const std::size_t n = std::max<std::size_t>(question.options.size(), 1);
    std::size_t letter = right;
    if (!correct) letter = (right + 1 + rng.index(n - 1 > 0 ? n - 1 : 1)) % n;
    out.text = option_letter(letter);
    out.token_probs = {conf};
    return out;
  }
  if (correct) {
    out.text = needle->detail;
  } else if (fidelity_.calibrated && needle) {
    out.text = pick_color(rng, needle->detail);
  } else {
    out.text = std::string(kUnknownAnswer);
  }
  out.token_probs.assign(kSyntheticTokens, conf);
  return out;
}

LlmStructuredReply<std::string> MockGateway::llm_summarize(const std::vector<Caption>& captions) {
  std::vector<std::string> seen;
  long tokens = 0;
  for (const auto& c : captions) {
    tokens += approx_tokens(c.text);
    std::stringstream ss(c.text);
    std::string part;
    while (std::getline(ss, part, ';')) {
      const auto start = part.find_first_not_of(' ');
      if (start == std::string::npos) continue;
      part = part.substr(start);
      if (part == kNothingNotable) continue;
      if (std::find(seen.begin(), seen.end(), part) == seen.end()) seen.push_back(part);
    }
  }
  LlmStructuredReply<std::string> r;
  r.parsed = "The video shows: ";
  for (std::size_t i = 0; i < seen.size(); ++i) r.parsed += (i ? "; " : "") + seen[i];
  if (seen.empty()) r.parsed += "nothing notable";
  r.parsed += ".";
  r.raw_text = r.parsed;
  r.tokens = tokens + approx_tokens(r.parsed);
  return r;
}

std::vector<std::string> MockGateway::question_descriptors(const Question& question) const {
  std::vector<std::string> out;
  for (const auto& s : kScenes) {
    if (question.text.find(s.descriptor) != std::string::npos) out.emplace_back(s.descriptor);
  }
  return out;
}

LlmStructuredReply<std::vector<int>> MockGateway::llm_select_candidates(
    const Question& question, const std::string& summary, const std::vector<Caption>& captions) {
  const auto wanted = question_descriptors(question);
  LlmStructuredReply<std::vector<int>> r;
  r.tokens = approx_tokens(question.text) + approx_tokens(summary);
  for (const auto& c : captions) {
    r.tokens += approx_tokens(c.text);
    for (const auto& d : wanted) {
      if (c.text.find(d) != std::string::npos) {
        r.parsed.push_back(c.clip.ordinal);
        break;
      }
    }
  }
  r.raw_text = json(r.parsed).dump();
  r.tokens += approx_tokens(r.raw_text);
  return r;
}

LlmStructuredReply<Decision> MockGateway::llm_decide(const Question& question,
                                                     const std::string& summary,
                                                     const std::vector<ScoredAnswer>& evaluated) {
  LlmStructuredReply<Decision> r;
  r.tokens = approx_tokens(question.text) + approx_tokens(summary);
  std::vector<std::size_t> confident;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    const auto& a = evaluated[i];
    r.tokens += approx_tokens(a.text) + 8;
    if (a.failed || a.confidence < 0.5) continue;
    if (a.clip.level < 3) {
      r.parsed.promising.push_back(static_cast<int>(i));
    } else if (a.confidence >= 0.8) {
      confident.push_back(i);
    }
  }
  if (!confident.empty()) {
    std::sort(confident.begin(), confident.end(), [&](std::size_t a, std::size_t b) {
      return evaluated[a].clip.window.start_s < evaluated[b].clip.window.start_s;
    });
    // Longest run of adjacent confident clips; accept its middle clip.
    std::size_t best_begin = 0, best_len = 1, begin = 0;
    for (std::size_t k = 1; k <= confident.size(); ++k) {
      const bool adjacent =
          k < confident.size() &&
          std::abs(evaluated[confident[k]].clip.window.start_s -
                   evaluated[confident[k - 1]].clip.window.end_s) < 1e-6;
      if (adjacent) continue;
      if (k - begin > best_len) {
        best_len = k - begin;
        best_begin = begin;
      }
      begin = k;
    }
    r.parsed.accept = static_cast<int>(confident[best_begin + (best_len - 1) / 2]);
    r.parsed.promising.clear();
  }
  json j{{"accept", r.parsed.accept ? json(*r.parsed.accept) : json(nullptr)},
         {"promising", r.parsed.promising}};
  r.raw_text = j.dump();
  r.tokens += approx_tokens(r.raw_text);
  return r;
}

LlmStructuredReply<int> MockGateway::llm_final_pick(const Question& question,
                                                    const std::vector<ScoredAnswer>& evaluated) {
  LlmStructuredReply<int> r;
  r.parsed = best_answer_index(evaluated);
  r.raw_text = json{{"index", r.parsed}}.dump();
  r.tokens = approx_tokens(question.text) + approx_tokens(r.raw_text);
  for (const auto& a : evaluated) r.tokens += approx_tokens(a.text) + 8;
  return r;
}

LlmStructuredReply<SocraticAnswer> MockGateway::llm_socratic_answer(
    const Question& question, const std::string& summary, const std::vector<Caption>& captions) {
  const auto wanted = question_descriptors(question);
  LlmStructuredReply<SocraticAnswer> r;
  r.tokens = approx_tokens(question.text) + approx_tokens(summary);
  for (const auto& c : captions) {
    r.tokens += approx_tokens(c.text);
    if (r.parsed.evidence_ordinal) continue;
    for (const auto& d : wanted) {
      if (c.text.find(d) != std::string::npos) {
        r.parsed.evidence_ordinal = c.clip.ordinal;
        break;
      }
    }
  }
  // Captions carry no fine detail, so the keyword matcher cannot name it.
  r.parsed.answer = std::string(kUnknownAnswer);
  if (question.is_mcq()) r.parsed.answer = "A";
  json j{{"answer", r.parsed.answer},
         {"clip", r.parsed.evidence_ordinal ? json(*r.parsed.evidence_ordinal) : json(nullptr)}};
  r.raw_text = j.dump();
  r.tokens += approx_tokens(r.raw_text);
  return r;
}

JudgeVerdict mock_judge(const std::string& gt_answer, const std::string& predicted) {
  JudgeVerdict v;
  v.judge_model = "mock-judge";
  const auto gt = normalize_answer(gt_answer);
  const auto pred = normalize_answer(predicted);
  if (!gt.empty() && gt == pred) {
    v.accuracy = 100;
    v.score = 5;
    v.rationale = "exact match";
    return v;
  }
  auto tokens = [](const std::string& s) {
    std::set<std::string> out;
    std::stringstream ss(s);
    std::string t;
    while (ss >> t) out.insert(normalize_answer(t));
    out.erase("");
    return out;
  };
  const auto a = tokens(gt);
  const auto b = tokens(pred);
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  const double j = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  v.accuracy = j >= 0.5 ? 100 : 0;
  v.score = static_cast<int>(std::lround(5.0 * j));
  v.rationale = "token overlap " + std::to_string(j);
  return v;
}

JudgeVerdict MockGateway::llm_judge(const Question&, const std::string& gt_answer,
                                    const std::string& predicted) {
  return mock_judge(gt_answer, predicted);
}

OracleAnswer brute_force_answer(const SyntheticWorld& world, const Question& question) {
  if (question.id != world.question.id || question.text != world.question.text ||
      question.video_id != world.question.video_id) {
    throw Error(ErrorKind::OracleMismatch,
                "question '" + question.id + "' was not generated from world '" +
                    world.video_id() + "'");
  }
  const Event* needle = world.needle();
  if (!needle) {
    throw Error(ErrorKind::OracleMismatch, "world '" + world.video_id() + "' has no needle");
  }
  return OracleAnswer{needle->detail, needle->window};
}

}  // namespace vas::sim
