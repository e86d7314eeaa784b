#include "vas/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "vas/json_io.hpp"

namespace vas {

using nlohmann::json;

double gtou(const TemporalWindow& pred, const TemporalWindow& gt) {
  const double inter = std::min(pred.end_s, gt.end_s) - std::max(pred.start_s, gt.start_s);
  if (inter <= 0.0) return 0.0;
  if (gt.contains(pred)) return 1.0;
  const double uni = gt.duration() + pred.duration() - inter;
  return std::clamp(gt.duration() / uni, 0.0, 1.0);
}

double iou(const TemporalWindow& pred, const TemporalWindow& gt) {
  const double inter = std::min(pred.end_s, gt.end_s) - std::max(pred.start_s, gt.start_s);
  if (inter <= 0.0) return 0.0;
  return inter / (gt.duration() + pred.duration() - inter);
}

namespace {

std::optional<char> as_letter(const std::string& text) {
  const auto n = normalize_answer(text);
  if (n.size() != 1) return std::nullopt;
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(n[0])));
  if (c < 'A' || c > 'D') return std::nullopt;
  return c;
}

/// Ground-truth letter from either a letter or the option text.
std::optional<char> gt_letter(const Question& q) {
  if (!q.gt_answer) return std::nullopt;
  if (auto l = as_letter(*q.gt_answer)) return l;
  const auto gt = normalize_answer(*q.gt_answer);
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    if (normalize_answer(q.options[i]) == gt) return static_cast<char>('A' + i);
  }
  return std::nullopt;
}

}  // namespace

McqScore evaluate_mcq(const std::string& predicted, const std::string& gt) {
  McqScore s;
  const auto p = as_letter(predicted);
  const auto g = as_letter(gt);
  if (!g) throw Error(ErrorKind::InvalidInput, "ground-truth letter '" + gt + "' is not A-D");
  if (!p) {
    s.malformed = true;
    return s;
  }
  s.accuracy = *p == *g ? 100 : 0;
  return s;
}

OqScore evaluate_oq(const Question& question, const std::string& predicted,
                    const std::string& gt_answer, Gateway& judge) {
  const auto v = judge.llm_judge(question, gt_answer, predicted);
  OqScore s;
  s.accuracy = v.accuracy;
  s.score = v.score;
  s.judge_error = v.judge_error;
  s.judge_model = v.judge_model.empty() ? judge.judge_model_id() : v.judge_model;
  s.rationale = v.rationale;
  return s;
}

std::vector<BenchItem> load_dataset(const std::filesystem::path& dir,
                                    const DecoderConfig& decoder) {
  const auto path = dir / "questions.jsonl";
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Dataset, "cannot open " + path.string());
  std::vector<BenchItem> items;
  std::vector<std::string> problems;
  std::map<std::string, VideoRef> probed;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      BenchItem item;
      Question& q = item.question;
      q.id = j.at("question_id").get<std::string>();
      q.video_id = j.at("video_id").get<std::string>();
      q.text = j.at("question").get<std::string>();
      if (j.contains("options") && !j["options"].is_null()) {
        q.kind = QuestionKind::Mcq;
        q.options = j["options"].get<std::vector<std::string>>();
      }
      if (j.contains("answer") && !j["answer"].is_null()) q.gt_answer = j["answer"].get<std::string>();
      if (j.contains("temporal_window") && !j["temporal_window"].is_null()) {
        q.gt_window = j["temporal_window"].get<TemporalWindow>();
      }
      if (j.contains("category") && !j["category"].is_null()) {
        q.category = j["category"].get<std::string>();
      }
      item.source = j.value("source", std::string{"all"});

      std::string uri = j.at("video_path").get<std::string>();
      const bool simulated = uri.rfind(kSimScheme, 0) == 0;
      if (!simulated && std::filesystem::path(uri).is_relative()) uri = (dir / uri).string();
      if (j.contains("duration") && !j["duration"].is_null()) {
        item.video = VideoRef{q.video_id, j["duration"].get<double>(), uri, 0, 0, 0.0};
      } else if (simulated) {
        throw Error(ErrorKind::Dataset, "simulated video needs a duration");
      } else {
        auto it = probed.find(uri);
        if (it == probed.end()) it = probed.emplace(uri, probe_video(uri, decoder)).first;
        item.video = it->second;
        item.video.video_id = q.video_id;
      }
      item.video.validate();
      q.validate(item.video.duration_s);
      if (q.is_mcq() && !gt_letter(q)) {
        throw Error(ErrorKind::Dataset, "answer matches no option");
      }
      items.push_back(std::move(item));
    } catch (const std::exception& e) {
      problems.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = path.string() + " has " + std::to_string(problems.size()) + " bad line(s)";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(ErrorKind::Dataset, msg);
  }
  return items;
}

json bench_item_json(const BenchItem& item) {
  const auto& q = item.question;
  json j{{"question_id", q.id},
         {"video_id", q.video_id},
         {"video_path", item.video.source_uri},
         {"duration", item.video.duration_s},
         {"question", q.text},
         {"options", q.is_mcq() ? json(q.options) : json(nullptr)},
         {"answer", q.gt_answer ? json(*q.gt_answer) : json(nullptr)},
         {"temporal_window", q.gt_window ? json(*q.gt_window) : json(nullptr)},
         {"category", q.category ? json(*q.category) : json(nullptr)}};
  if (item.source != "all") j["source"] = item.source;
  return j;
}

std::string to_string(Agent a) {
  switch (a) {
    case Agent::FalconeyePro: return "falconeye-pro";
    case Agent::FalconeyeFlash: return "falconeye-flash";
    case Agent::Socratic: return "socratic";
    case Agent::SocraticShort: return "socratic-short";
    case Agent::Sequential: return "sequential";
    case Agent::SequentialBp: return "sequential_bp";
    case Agent::IterativeSampling: return "iterative_sampling";
  }
  return "falconeye-pro";
}

Agent agent_from_string(const std::string& s) {
  if (s == "falconeye" || s == "falconeye-pro") return Agent::FalconeyePro;
  if (s == "falconeye-flash") return Agent::FalconeyeFlash;
  if (s == "socratic") return Agent::Socratic;
  if (s == "socratic-short") return Agent::SocraticShort;
  if (s == "sequential") return Agent::Sequential;
  if (s == "sequential_bp") return Agent::SequentialBp;
  if (s == "iterative_sampling") return Agent::IterativeSampling;
  throw Error(ErrorKind::Config, "unknown agent '" + s + "'");
}

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const ItemRecord& r) {
  json j{{"question_id", r.question_id},
         {"video_id", r.video_id},
         {"source", r.source},
         {"kind", r.kind},
         {"ok", r.ok},
         {"answer", r.answer},
         {"gt_answer", r.gt_answer},
         {"confidence", r.confidence},
         {"window", opt(r.window)},
         {"gt_window", opt(r.gt_window)},
         {"gtou", opt(r.gtou)},
         {"accuracy", r.accuracy},
         {"score", opt(r.score)},
         {"malformed", r.malformed},
         {"judge_error", r.judge_error},
         {"judge_model", r.judge_model},
         {"terminated_by", r.terminated_by},
         {"vlm_calls", r.vlm_calls},
         {"llm_calls", r.llm_calls},
         {"llm_tokens", r.llm_tokens},
         {"frames", r.frames},
         {"preprocess_vlm_calls", r.preprocess_vlm_calls},
         {"wall_time_s", r.wall_time_s},
         {"trace_digest", r.trace_digest}};
  if (!r.ok) j["error"] = r.error;
  return j;
}

Aggregate aggregate_records(const std::vector<ItemRecord>& records) {
  Aggregate a;
  double mcq_acc = 0, oq_acc = 0, oq_score = 0, acc = 0, g = 0, t = 0, v = 0, l = 0, tok = 0,
         fr = 0;
  for (const auto& r : records) {
    ++a.n;
    if (!r.ok) ++a.failed;
    if (r.kind == "mcq") {
      ++a.mcq_n;
      mcq_acc += r.accuracy;
    } else {
      ++a.oq_n;
      oq_acc += r.accuracy;
      oq_score += r.score.value_or(0);
    }
    acc += r.accuracy;
    if (r.gt_window) {
      ++a.gtou_n;
      g += r.gtou.value_or(0.0);
    }
    t += r.wall_time_s;
    v += r.vlm_calls;
    l += r.llm_calls;
    tok += static_cast<double>(r.llm_tokens);
    fr += static_cast<double>(r.frames);
  }
  auto mean = [](double sum, int n) { return n ? sum / n : 0.0; };
  a.mcq_accuracy = mean(mcq_acc, a.mcq_n);
  a.oq_accuracy = mean(oq_acc, a.oq_n);
  a.oq_score = mean(oq_score, a.oq_n);
  a.accuracy = mean(acc, a.n);
  a.mgtou = mean(g, a.gtou_n);
  a.mean_time_s = mean(t, a.n);
  a.mean_vlm_calls = mean(v, a.n);
  a.mean_llm_calls = mean(l, a.n);
  a.mean_llm_tokens = mean(tok, a.n);
  a.mean_frames = mean(fr, a.n);
  return a;
}

json to_json(const Aggregate& a) {
  return json{{"n", a.n},
              {"failed", a.failed},
              {"mcq", {{"n", a.mcq_n}, {"accuracy", a.mcq_accuracy}}},
              {"oq", {{"n", a.oq_n}, {"accuracy", a.oq_accuracy}, {"score", a.oq_score}}},
              {"accuracy", a.accuracy},
              {"gtou_n", a.gtou_n},
              {"mgtou", a.mgtou},
              {"mean_time_s", a.mean_time_s},
              {"mean_vlm_calls", a.mean_vlm_calls},
              {"mean_llm_calls", a.mean_llm_calls},
              {"mean_llm_tokens", a.mean_llm_tokens},
              {"mean_frames", a.mean_frames}};
}

int BenchReport::exit_code() const {
  if (items.empty() || overall.failed == 0) return 0;
  return overall.failed == overall.n ? 1 : 2;
}

json to_json(const BenchReport& r) {
  json items = json::array();
  for (const auto& i : r.items) items.push_back(to_json(i));
  json groups = json::object();
  for (const auto& [name, agg] : r.groups) groups[name] = to_json(agg);
  return json{{"agent", r.agent}, {"items", items}, {"groups", groups}, {"overall", to_json(r.overall)}};
}

std::string report_table(const BenchReport& r) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "agent: %s\n", r.agent.c_str());
  out << buf;
  std::snprintf(buf, sizeof buf, "%-12s %5s %5s | %7s | %7s %6s | %6s | %8s %7s %7s %9s %8s\n",
                "group", "n", "fail", "MCQ acc", "OQ acc", "score", "mGToU", "time(s)", "#VLM",
                "#LLM", "#tokens", "#frames");
  out << buf;
  auto row = [&](const std::string& name, const Aggregate& a) {
    std::snprintf(buf, sizeof buf,
                  "%-12s %5d %5d | %7.1f | %7.1f %6.2f | %6.3f | %8.2f %7.1f %7.1f %9.0f %8.1f\n",
                  name.c_str(), a.n, a.failed, a.mcq_accuracy, a.oq_accuracy, a.oq_score, a.mgtou,
                  a.mean_time_s, a.mean_vlm_calls, a.mean_llm_calls, a.mean_llm_tokens,
                  a.mean_frames);
    out << buf;
  };
  for (const auto& [name, agg] : r.groups) row(name, agg);
  row("overall", r.overall);
  return out.str();
}

namespace {

CaptionIndex index_for(const BenchItem& item, const ExplorerConfig& cfg, Gateway& gateway,
                       FrameSource& frames, const CaptionCache* cache, ItemRecord& rec) {
  PreprocessStats stats;
  auto index = preprocess(item.video, gateway, frames, cfg, cache, &stats);
  rec.preprocess_vlm_calls = stats.vlm_calls;
  return index;
}

}  // namespace

ItemRecord run_item(const BenchItem& item, const BenchOptions& options, Gateway& gateway,
                    FrameSource& frames, std::optional<VASResult>* result,
                    const CaptionCache* cache) {
  const auto& q = item.question;
  ItemRecord rec;
  rec.question_id = q.id;
  rec.video_id = item.video.video_id;
  rec.source = item.source;
  rec.kind = q.is_mcq() ? "mcq" : "oq";
  rec.gt_answer = q.gt_answer.value_or("");
  rec.gt_window = q.gt_window;
  if (q.gt_window) rec.gtou = 0.0;
  if (!q.is_mcq()) rec.score = 0;

  const auto started = std::chrono::steady_clock::now();
  try {
    VASResult r;
    switch (options.agent) {
      case Agent::FalconeyePro:
      case Agent::FalconeyeFlash: {
        const auto index = index_for(item, options.explorer, gateway, frames, cache, rec);
        r = explore(q, index, options.explorer, gateway, frames);
        break;
      }
      case Agent::Socratic:
      case Agent::SocraticShort: {
        auto cfg = options.explorer;
        cfg.caption_token_budget =
            options.agent == Agent::Socratic ? options.baseline.caption_token_budget
                                             : options.explorer.caption_token_budget;
        const auto index = index_for(item, cfg, gateway, frames, cache, rec);
        r = run_socratic(q, index, gateway);
        break;
      }
      case Agent::Sequential:
        r = run_sequential(q, item.video, gateway, frames, options.baseline);
        break;
      case Agent::SequentialBp:
        r = run_sequential_bp(q, item.video, gateway, frames, options.baseline);
        break;
      case Agent::IterativeSampling:
        r = run_iterative_sampling(q, item.video, gateway, frames, options.baseline);
        break;
    }
    rec.answer = r.answer;
    rec.confidence = r.confidence;
    rec.window = r.window;
    rec.terminated_by = to_string(r.terminated_by);
    rec.vlm_calls = r.trace.vlm_answer_calls;
    rec.llm_calls = r.trace.llm_calls;
    rec.llm_tokens = r.trace.llm_tokens;
    rec.frames = r.trace.frames;
    rec.trace_digest = r.trace.digest();
    if (q.gt_window) rec.gtou = gtou(r.window, *q.gt_window);
    if (q.gt_answer) {
      if (q.is_mcq()) {
        const auto s = evaluate_mcq(r.answer, std::string(1, *gt_letter(q)));
        rec.accuracy = s.accuracy;
        rec.malformed = s.malformed;
      } else {
        const auto s = evaluate_oq(q, r.answer, *q.gt_answer, gateway);
        rec.accuracy = s.accuracy;
        rec.score = s.score;
        rec.judge_error = s.judge_error;
        rec.judge_model = s.judge_model;
      }
    }
    rec.ok = true;
    if (result) *result = std::move(r);
  } catch (const std::exception& e) {
    spdlog::error("item {} failed: {}", q.id, e.what());
    rec.ok = false;
    rec.error = e.what();
  }
  if (!options.deterministic) {
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return rec;
}

BenchReport run_benchmark(const std::vector<BenchItem>& items, const BenchOptions& options,
                          const GatewayFactory& gateways, FrameSource& frames) {
  options.explorer.validate();
  options.baseline.validate();
  BenchReport report;
  report.agent = to_string(options.agent);
  report.items.resize(items.size());
  report.results.resize(items.size());

  std::optional<CaptionCache> cache;
  if (options.cache_root) cache.emplace(*options.cache_root);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      std::shared_ptr<Gateway> gw;
      try {
        gw = gateways(items[i]);
      } catch (const std::exception& e) {
        ItemRecord rec;
        rec.question_id = items[i].question.id;
        rec.video_id = items[i].video.video_id;
        rec.source = items[i].source;
        rec.kind = items[i].question.is_mcq() ? "mcq" : "oq";
        rec.gt_answer = items[i].question.gt_answer.value_or("");
        rec.gt_window = items[i].question.gt_window;
        if (rec.gt_window) rec.gtou = 0.0;
        if (rec.kind == "oq") rec.score = 0;
        rec.error = e.what();
        report.items[i] = rec;
        continue;
      }
      report.items[i] = run_item(items[i], options, *gw, frames, &report.results[i],
                                 cache ? &*cache : nullptr);
    }
  };
  const auto width = static_cast<std::size_t>(std::max(1, options.parallelism));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(width, items.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::map<std::string, std::vector<ItemRecord>> by_source;
  for (const auto& r : report.items) by_source[r.source].push_back(r);
  for (const auto& [name, recs] : by_source) report.groups.emplace_back(name, aggregate_records(recs));
  report.overall = aggregate_records(report.items);
  if (!items.empty() && report.overall.failed == report.overall.n) {
    spdlog::error("all {} items failed", items.size());
  }
  return report;
}

namespace {

std::string safe_name(std::string s) {
  for (auto& c : s) {
    if (c == '/' || c == '\\' || c == ':') c = '_';
  }
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
  out << text;
}

}  // namespace

void write_report(const BenchReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "traces");
  write_file(out_dir / "report.json", to_json(report).dump(2) + "\n");
  write_file(out_dir / "report.txt", report_table(report));
  for (std::size_t i = 0; i < report.items.size(); ++i) {
    const auto& rec = report.items[i];
    json j{{"question_id", rec.question_id}, {"agent", report.agent}};
    if (i < report.results.size() && report.results[i]) {
      j["result"] = *report.results[i];
    } else {
      j["error"] = rec.error;
    }
    write_file(out_dir / "traces" / (safe_name(rec.question_id) + ".json"), j.dump(2) + "\n");
  }
}

}  // namespace vas
