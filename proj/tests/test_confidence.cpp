#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "vas/confidence.hpp"

using namespace vas;
using Approx = doctest::Approx;

namespace {

double oracle_geometric(const std::vector<double>& p) {
  using big = boost::multiprecision::cpp_bin_float_50;
  big prod = 1;
  for (double x : p) prod *= big(std::max(x, kProbFloor));
  return static_cast<double>(boost::multiprecision::pow(prod, big(1) / big(p.size())));
}

}  // namespace

TEST_CASE("aggregators on hand examples") {
  const std::vector<double> one{0.7};
  CHECK(aggregate(one) == Approx(0.7).epsilon(1e-15));
  const std::vector<double> ones{1.0, 1.0, 1.0};
  for (auto agg : {Aggregator::Geometric, Aggregator::Likelihood, Aggregator::Arithmetic}) {
    CHECK(aggregate(ones, agg) == 1.0);
    CHECK(aggregate(one, agg) == Approx(0.7).epsilon(1e-15));
  }
  const std::vector<double> p{0.9, 0.4, 0.8};
  CHECK(aggregate(p) == Approx(oracle_geometric(p)).epsilon(1e-12));
  CHECK(aggregate(p) == Approx(0.66039).epsilon(1e-5));
  CHECK(aggregate(p, Aggregator::Likelihood) == Approx(0.288).epsilon(1e-12));
  CHECK(aggregate(p, Aggregator::Arithmetic) == Approx(0.7).epsilon(1e-12));
}

TEST_CASE("aggregate rejects bad input") {
  const std::vector<double> empty;
  CHECK_THROWS_AS(aggregate(empty), Error);
  const std::vector<double> bad{0.5, 1.5};
  CHECK_THROWS_AS(aggregate(bad), Error);
}

TEST_CASE("geometric aggregation is log-space") {
  const std::vector<double> tiny(64, 1e-12);
  CHECK(aggregate(tiny) == Approx(1e-12).epsilon(1e-9));
  const std::vector<double> zero{0.0, 0.5};
  CHECK(aggregate(zero) > 0.0);
}

TEST_CASE("geometric properties against a high-precision oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 64);
  std::uniform_real_distribution<double> prob(1e-6, 1.0);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> p(static_cast<std::size_t>(len(rng)));
    for (auto& x : p) x = prob(rng);
    const double g = aggregate(p);
    CHECK(g == Approx(oracle_geometric(p)).epsilon(1e-9));
    CHECK(g >= *std::min_element(p.begin(), p.end()) * (1 - 1e-12));
    CHECK(g <= *std::max_element(p.begin(), p.end()) * (1 + 1e-12));
    auto shuffled = p;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(aggregate(shuffled) == Approx(g).epsilon(1e-12));
  }
}

TEST_CASE("scored answers derive confidence from tokens") {
  ClipRef clip{"v", TemporalWindow{0, 60}, 1, 0, nullptr};
  const auto a = make_scored_answer("red", {0.9, 0.4, 0.8}, clip);
  CHECK(a.confidence == aggregate(a.token_probs));
  CHECK_FALSE(a.failed);
  const auto f = make_failed_answer(clip);
  CHECK(f.failed);
  CHECK(f.confidence == 0.0);
}

TEST_CASE("binning") {
  CHECK(bin_index(0.0, 10) == 1);
  CHECK(bin_index(1.0, 10) == 10);
  CHECK(bin_index(0.1, 10) == 1);
  CHECK(bin_index(0.95, 10) == 10);
  CHECK(bin_index(0.9, 10) == 9);

  const std::vector<Prediction> preds{{0.95, true}, {0.92, false}};
  const auto bins = bin_predictions(preds, 10);
  CHECK(bins.counts[9] == 2);
  CHECK(bins.avg_conf[9] == Approx(0.935));
  CHECK(bins.avg_acc[9] == Approx(0.5));
  CHECK(bins.total() == 2);
  CHECK(bins.edges.size() == 11);

  const std::vector<Prediction> none;
  const auto empty = bin_predictions(none, 10);
  CHECK(empty.total() == 0);
  CHECK(std::isnan(empty.avg_conf[0]));
  CHECK_THROWS_AS(ace(empty), Error);
  CHECK_THROWS_AS(bin_predictions(preds, 1), Error);
}

TEST_CASE("ace and mce") {
  std::vector<Prediction> preds;
  for (int i = 0; i < 10; ++i) preds.push_back({0.3, i < 4});  // gap 0.1
  for (int i = 0; i < 10; ++i) preds.push_back({0.8, i < 5});  // gap 0.3
  const auto bins = bin_predictions(preds, 10);
  CHECK(ace(bins) == Approx(0.2));
  CHECK(mce(bins) == Approx(0.3));
}

TEST_CASE("calibration count") {
  std::vector<Prediction> preds;
  for (int i = 0; i < 20; ++i) preds.push_back({0.95, i < 18});
  for (int i = 0; i < 80; ++i) preds.push_back({0.5, i % 2 == 0});
  const auto bins = bin_predictions(preds, 10);
  CHECK(cc_at(bins, 0.9) == Approx(0.19).epsilon(1e-12));
  CHECK_THROWS_AS(cc_at(bins, 0.93), Error);

  const std::vector<Prediction> low{{0.2, true}};
  CHECK(cc_at(bin_predictions(low, 10), 0.9) == 0.0);
  const std::vector<Prediction> sure(5, Prediction{1.0, true});
  CHECK(cc_at(bin_predictions(sure, 10), 0.9) == Approx(1.0));
}

TEST_CASE("brier") {
  const std::vector<Prediction> a{{1.0, true}};
  CHECK(brier(a) == 0.0);
  const std::vector<Prediction> b{{0.5, true}, {0.5, false}};
  CHECK(brier(b) == Approx(0.25));
  const std::vector<Prediction> c{{0.8, false}};
  CHECK(brier(c) == Approx(0.64));
  const std::vector<Prediction> none;
  CHECK_THROWS_AS(brier(none), Error);
}

TEST_CASE("Monte-Carlo calibrated sample") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Prediction> preds(100000);
  for (auto& p : preds) {
    p.confidence = u(rng);
    p.correct = u(rng) < p.confidence;
  }
  const auto report = calibration_report(preds, 10, {0.9, 0.5});
  CHECK(report.ace <= 0.02);
  CHECK(report.mce <= 0.06);
  CHECK(report.ace <= report.mce);
  CHECK(report.cc.count(0.5) == 1);
  CHECK(report.brier == Approx(1.0 / 6.0).epsilon(0.02));
}

TEST_CASE("report export") {
  const std::vector<Prediction> preds{{0.95, true}, {0.15, false}};
  const auto report = calibration_report(preds);
  const auto j = to_json(report);
  CHECK(j.contains("ace"));
  CHECK(j["bins"].is_array());
  const auto csv = bins_csv(report.bins);
  CHECK(csv.rfind("bin_lo,bin_hi,count,avg_conf,avg_acc\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
}

TEST_CASE("predictions file") {
  const std::string path = "test_predictions.jsonl";
  {
    std::ofstream out(path);
    out << R"({"confidence": 0.9, "correct": true})" << "\n\n"
        << R"({"confidence": 0.2, "correct": 0})" << "\n";
  }
  const auto preds = read_predictions_jsonl(path);
  REQUIRE(preds.size() == 2);
  CHECK(preds[0].correct);
  CHECK_FALSE(preds[1].correct);
  {
    std::ofstream out(path);
    out << R"({"confidence": 0.9, "correct": true})" << "\n" << "{oops\n";
  }
  try {
    read_predictions_jsonl(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::remove(path.c_str());
}
