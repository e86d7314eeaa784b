#include "vas/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace vas {

std::string to_string(Aggregator agg) {
  switch (agg) {
    case Aggregator::Geometric: return "geometric";
    case Aggregator::Likelihood: return "likelihood";
    case Aggregator::Arithmetic: return "arithmetic";
  }
  return "unknown";
}

Aggregator aggregator_from_string(const std::string& s) {
  if (s == "geometric") return Aggregator::Geometric;
  if (s == "likelihood") return Aggregator::Likelihood;
  if (s == "arithmetic" || s == "average") return Aggregator::Arithmetic;
  throw Error(ErrorKind::InvalidInput, "unknown aggregator '" + s + "'");
}

double aggregate(std::span<const double> probs, Aggregator agg) {
  if (probs.empty()) throw Error(ErrorKind::InvalidInput, "cannot aggregate an empty token list");
  const auto n = static_cast<double>(probs.size());
  double log_sum = 0.0;
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorKind::InvalidInput, "token probability outside [0, 1]");
    }
    const double q = std::max(p, kProbFloor);
    log_sum += std::log(q);
    sum += q;
  }
  switch (agg) {
    case Aggregator::Geometric: return std::exp(log_sum / n);
    case Aggregator::Likelihood: return std::exp(log_sum);
    case Aggregator::Arithmetic: return sum / n;
  }
  return 0.0;
}

ScoredAnswer make_scored_answer(std::string text, std::vector<double> token_probs, ClipRef clip,
                                std::optional<Caption> caption) {
  ScoredAnswer a;
  a.confidence = aggregate(token_probs, Aggregator::Geometric);
  a.text = std::move(text);
  a.token_probs = std::move(token_probs);
  a.clip = std::move(clip);
  a.caption = std::move(caption);
  return a;
}

ScoredAnswer make_failed_answer(ClipRef clip, std::optional<Caption> caption) {
  ScoredAnswer a;
  a.clip = std::move(clip);
  a.caption = std::move(caption);
  a.failed = true;
  return a;
}

long ReliabilityBins::total() const {
  long n = 0;
  for (long c : counts) n += c;
  return n;
}

int bin_index(double confidence, int m) {
  // The small offset keeps values such as 0.3 * 10 = 3.0000000000000004 in
  // their right-closed bin.
  const int idx = static_cast<int>(std::ceil(confidence * m - 1e-9));
  return std::clamp(idx, 1, m);
}

ReliabilityBins bin_predictions(std::span<const Prediction> preds, int m) {
  if (m < 2) throw Error(ErrorKind::InvalidInput, "need at least 2 bins");
  ReliabilityBins bins;
  bins.m = m;
  bins.edges.resize(static_cast<std::size_t>(m) + 1);
  for (int i = 0; i <= m; ++i) bins.edges[static_cast<std::size_t>(i)] = static_cast<double>(i) / m;
  bins.counts.assign(static_cast<std::size_t>(m), 0);
  std::vector<double> conf_sum(static_cast<std::size_t>(m), 0.0);
  std::vector<double> acc_sum(static_cast<std::size_t>(m), 0.0);
  for (const auto& p : preds) {
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
      throw Error(ErrorKind::InvalidInput, "prediction confidence outside [0, 1]");
    }
    const auto i = static_cast<std::size_t>(bin_index(p.confidence, m) - 1);
    ++bins.counts[i];
    conf_sum[i] += p.confidence;
    acc_sum[i] += p.correct ? 1.0 : 0.0;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  bins.avg_conf.assign(static_cast<std::size_t>(m), nan);
  bins.avg_acc.assign(static_cast<std::size_t>(m), nan);
  for (std::size_t i = 0; i < bins.counts.size(); ++i) {
    if (bins.counts[i] == 0) continue;
    const auto n = static_cast<double>(bins.counts[i]);
    bins.avg_conf[i] = conf_sum[i] / n;
    bins.avg_acc[i] = acc_sum[i] / n;
  }
  return bins;
}

namespace {

std::vector<double> gaps(const ReliabilityBins& bins) {
  std::vector<double> g;
  for (std::size_t i = 0; i < bins.counts.size(); ++i) {
    if (!bins.empty_bin(i)) g.push_back(std::abs(bins.avg_conf[i] - bins.avg_acc[i]));
  }
  if (g.empty()) throw Error(ErrorKind::InvalidInput, "all reliability bins are empty");
  return g;
}

}  // namespace

double ace(const ReliabilityBins& bins) {
  const auto g = gaps(bins);
  double s = 0.0;
  for (double v : g) s += v;
  return s / static_cast<double>(g.size());
}

double mce(const ReliabilityBins& bins) {
  const auto g = gaps(bins);
  return *std::max_element(g.begin(), g.end());
}

double cc_at(const ReliabilityBins& bins, double tau) {
  constexpr double kTol = 1e-9;
  const bool on_edge = std::any_of(bins.edges.begin(), bins.edges.end(),
                                   [&](double e) { return std::abs(e - tau) < kTol; });
  if (!on_edge) {
    throw Error(ErrorKind::InvalidInput, "threshold " + std::to_string(tau) + " is not a bin edge");
  }
  const long n = bins.total();
  if (n == 0) return 0.0;
  double cc = 0.0;
  for (std::size_t i = 0; i < bins.counts.size(); ++i) {
    if (bins.edges[i] < tau - kTol || bins.empty_bin(i)) continue;
    const double weight = static_cast<double>(bins.counts[i]) / static_cast<double>(n);
    cc += weight * (1.0 - std::abs(bins.avg_conf[i] - bins.avg_acc[i]));
  }
  return cc;
}

double brier(std::span<const Prediction> preds) {
  if (preds.empty()) throw Error(ErrorKind::InvalidInput, "brier score needs predictions");
  double s = 0.0;
  for (const auto& p : preds) {
    const double d = p.confidence - (p.correct ? 1.0 : 0.0);
    s += d * d;
  }
  return s / static_cast<double>(preds.size());
}

CalibrationReport calibration_report(std::span<const Prediction> preds, int m,
                                     const std::vector<double>& thresholds) {
  if (preds.empty()) throw Error(ErrorKind::InvalidInput, "calibration report needs predictions");
  CalibrationReport r;
  r.bins = bin_predictions(preds, m);
  r.ace = ace(r.bins);
  r.mce = mce(r.bins);
  r.brier = brier(preds);
  for (double tau : thresholds) r.cc[tau] = cc_at(r.bins, tau);
  return r;
}

nlohmann::json to_json(const CalibrationReport& report) {
  using nlohmann::json;
  json bins = json::array();
  for (std::size_t i = 0; i < report.bins.counts.size(); ++i) {
    json b{{"bin_lo", report.bins.edges[i]},
           {"bin_hi", report.bins.edges[i + 1]},
           {"count", report.bins.counts[i]}};
    if (report.bins.empty_bin(i)) {
      b["avg_conf"] = nullptr;
      b["avg_acc"] = nullptr;
    } else {
      b["avg_conf"] = report.bins.avg_conf[i];
      b["avg_acc"] = report.bins.avg_acc[i];
    }
    bins.push_back(std::move(b));
  }
  json cc = json::object();
  for (const auto& [tau, v] : report.cc) {
    std::ostringstream key;
    key << tau;
    cc[key.str()] = v;
  }
  return json{{"m", report.bins.m},       {"n", report.bins.total()}, {"bins", bins},
              {"ace", report.ace},        {"mce", report.mce},        {"brier", report.brier},
              {"cc", cc}};
}

std::string bins_csv(const ReliabilityBins& bins) {
  std::ostringstream os;
  os.precision(12);
  os << "bin_lo,bin_hi,count,avg_conf,avg_acc\n";
  for (std::size_t i = 0; i < bins.counts.size(); ++i) {
    os << bins.edges[i] << ',' << bins.edges[i + 1] << ',' << bins.counts[i] << ',';
    if (!bins.empty_bin(i)) os << bins.avg_conf[i] << ',' << bins.avg_acc[i];
    else os << ',';
    os << '\n';
  }
  return os.str();
}

std::vector<Prediction> read_predictions_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open predictions file '" + path + "'");
  std::vector<Prediction> preds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Prediction p{j.at("confidence").get<double>(), false};
      const auto& c = j.at("correct");
      p.correct = c.is_boolean() ? c.get<bool>() : c.get<double>() > 0.0;
      preds.push_back(p);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Parse, path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return preds;
}

}  // namespace vas
