#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vas/core.hpp"

namespace vas {

enum class Aggregator { Geometric, Likelihood, Arithmetic };

std::string to_string(Aggregator agg);
Aggregator aggregator_from_string(const std::string& s);

/// Probabilities below this floor are raised to it before aggregation.
inline constexpr double kProbFloor = 1e-12;

/// Aggregates per-token probabilities into an answer confidence.
///
/// Geometric is the s-th root of the product, computed as exp(mean(log p)) so
/// long low-probability sequences do not underflow. Likelihood is the plain
/// product, arithmetic the mean. Throws InvalidInput on an empty list or a
/// value outside [0, 1].
double aggregate(std::span<const double> probs, Aggregator agg = Aggregator::Geometric);

/// Builds a ScoredAnswer whose confidence is the geometric aggregate of
/// `token_probs`.
ScoredAnswer make_scored_answer(std::string text, std::vector<double> token_probs, ClipRef clip,
                                std::optional<Caption> caption = std::nullopt);

/// An answer recorded as failed: no tokens, confidence 0.
ScoredAnswer make_failed_answer(ClipRef clip, std::optional<Caption> caption = std::nullopt);

struct Prediction {
  double confidence = 0.0;
  bool correct = false;
};

/// Equal-width reliability bins over [0, 1]. Bin m (1-based) covers
/// ((m-1)/M, m/M]; confidence 0 falls in bin 1. Empty bins hold NaN for the
/// averages.
struct ReliabilityBins {
  int m = 10;
  std::vector<double> edges;
  std::vector<long> counts;
  std::vector<double> avg_conf;
  std::vector<double> avg_acc;

  long total() const;
  bool empty_bin(std::size_t i) const { return counts[i] == 0; }
};

/// 1-based bin index for a confidence.
int bin_index(double confidence, int m);

ReliabilityBins bin_predictions(std::span<const Prediction> preds, int m = 10);

/// Mean |C_m - A_m| over non-empty bins.
double ace(const ReliabilityBins& bins);
/// Max |C_m - A_m| over non-empty bins.
double mce(const ReliabilityBins& bins);
/// Calibration count above threshold `tau`, which must be a bin edge.
/// Sum over bins lying entirely above tau of (N_m / N) * (1 - |C_m - A_m|).
double cc_at(const ReliabilityBins& bins, double tau);
/// Mean squared difference between confidence and 0/1 correctness.
double brier(std::span<const Prediction> preds);

struct CalibrationReport {
  ReliabilityBins bins;
  double ace = 0.0;
  double mce = 0.0;
  double brier = 0.0;
  std::map<double, double> cc;
};

CalibrationReport calibration_report(std::span<const Prediction> preds, int m = 10,
                                     const std::vector<double>& thresholds = {0.9});

nlohmann::json to_json(const CalibrationReport& report);
/// Columns: bin_lo,bin_hi,count,avg_conf,avg_acc. Empty bins leave the
/// averages blank.
std::string bins_csv(const ReliabilityBins& bins);

/// Reads `{"confidence": c, "correct": b}` records, one per line. Blank lines
/// are skipped; malformed lines throw Parse with the line number.
std::vector<Prediction> read_predictions_jsonl(const std::string& path);

}  // namespace vas
