#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vas/baselines.hpp"
#include "vas/core.hpp"
#include "vas/explorer.hpp"
#include "vas/frame_sampler.hpp"
#include "vas/gateway.hpp"

namespace vas {

/// Ground Truth over Union: |GT| / |GT u Pred| when the windows overlap, else 0.
double gtou(const TemporalWindow& pred, const TemporalWindow& gt);
double iou(const TemporalWindow& pred, const TemporalWindow& gt);

struct McqScore {
  int accuracy = 0;
  /// The prediction did not normalize to a letter A-D.
  bool malformed = false;
};

McqScore evaluate_mcq(const std::string& predicted, const std::string& gt_letter);

struct OqScore {
  int accuracy = 0;
  int score = 0;
  bool judge_error = false;
  std::string judge_model;
  std::string rationale;
};

OqScore evaluate_oq(const Question& question, const std::string& predicted,
                    const std::string& gt_answer, Gateway& judge);

struct BenchItem {
  Question question;
  VideoRef video;
  /// Source group used for aggregation ("all" when absent).
  std::string source = "all";
};

/// Reads {dir}/questions.jsonl. All malformed lines are reported together in
/// one Dataset error. Without a "duration" field the video is probed.
std::vector<BenchItem> load_dataset(const std::filesystem::path& dir,
                                    const DecoderConfig& decoder = {});

nlohmann::json bench_item_json(const BenchItem& item);

enum class Agent {
  FalconeyePro,
  FalconeyeFlash,
  Socratic,
  SocraticShort,
  Sequential,
  SequentialBp,
  IterativeSampling
};

std::string to_string(Agent a);
Agent agent_from_string(const std::string& s);

struct BenchOptions {
  Agent agent = Agent::FalconeyePro;
  ExplorerConfig explorer = ExplorerConfig::pro();
  BaselineConfig baseline;
  int parallelism = 2;
  /// Zero wall-clock fields so reports are byte-reproducible.
  bool deterministic = false;
  std::optional<std::filesystem::path> cache_root;
};

using GatewayFactory = std::function<std::shared_ptr<Gateway>(const BenchItem&)>;

struct ItemRecord {
  std::string question_id;
  std::string video_id;
  std::string source;
  std::string kind;
  bool ok = false;
  std::string error;
  std::string answer;
  std::string gt_answer;
  double confidence = 0.0;
  std::optional<TemporalWindow> window;
  std::optional<TemporalWindow> gt_window;
  std::optional<double> gtou;
  int accuracy = 0;
  std::optional<int> score;
  bool malformed = false;
  bool judge_error = false;
  std::string judge_model;
  std::string terminated_by;
  int vlm_calls = 0;
  int llm_calls = 0;
  long llm_tokens = 0;
  long frames = 0;
  int preprocess_vlm_calls = 0;
  double wall_time_s = 0.0;
  std::string trace_digest;
};

nlohmann::json to_json(const ItemRecord& r);

struct Aggregate {
  int n = 0;
  int failed = 0;
  int mcq_n = 0;
  double mcq_accuracy = 0.0;
  int oq_n = 0;
  double oq_accuracy = 0.0;
  double oq_score = 0.0;
  double accuracy = 0.0;
  int gtou_n = 0;
  double mgtou = 0.0;
  double mean_time_s = 0.0;
  double mean_vlm_calls = 0.0;
  double mean_llm_calls = 0.0;
  double mean_llm_tokens = 0.0;
  double mean_frames = 0.0;
};

Aggregate aggregate_records(const std::vector<ItemRecord>& records);
nlohmann::json to_json(const Aggregate& a);

struct BenchReport {
  std::string agent;
  std::vector<ItemRecord> items;
  std::vector<std::pair<std::string, Aggregate>> groups;  // sorted by name
  Aggregate overall;
  /// Full results keyed like `items`; used for the trace files.
  std::vector<std::optional<VASResult>> results;

  /// 0 when every item succeeded (or there were none), 1 when all failed,
  /// 2 otherwise.
  int exit_code() const;
};

nlohmann::json to_json(const BenchReport& r);
std::string report_table(const BenchReport& r);

/// Runs one item with isolation: every error becomes a failed record.
ItemRecord run_item(const BenchItem& item, const BenchOptions& options, Gateway& gateway,
                    FrameSource& frames, std::optional<VASResult>* result = nullptr,
                    const CaptionCache* cache = nullptr);

BenchReport run_benchmark(const std::vector<BenchItem>& items, const BenchOptions& options,
                          const GatewayFactory& gateways, FrameSource& frames);

/// Writes report.json, report.txt and traces/{question_id}.json.
void write_report(const BenchReport& report, const std::filesystem::path& out_dir);

}  // namespace vas
