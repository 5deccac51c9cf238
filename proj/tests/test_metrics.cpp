#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ovtad/error.hpp"
#include "ovtad/metrics.hpp"
#include "ovtad/rng.hpp"

using namespace ovtad;

namespace {

SegmentDetection det(double s, double e, double score, std::optional<std::string> label = "a") {
  return {Segment{s, e}, score, std::move(label)};
}

AnnotatedDataset one_video(std::vector<Annotation> anns, std::vector<std::string> vocab = {"a", "b"}) {
  return make_dataset({VideoRecord{"v", 100.0, Subset::validation, std::move(anns)}}, std::move(vocab));
}

EvalConfig config_for(std::vector<std::string> classes) {
  return make_eval_config(EvalPreset::activitynet, std::move(classes));
}

}  // namespace

TEST_CASE("temporal IoU") {
  CHECK(temporal_iou({0, 10}, {5, 15}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(temporal_iou({0, 10}, {0, 10}) == 1.0);
  CHECK(temporal_iou({0, 5}, {5, 10}) == 0.0);
  CHECK(temporal_iou({0, 2}, {7, 9}) == 0.0);
  CHECK(temporal_iou({2, 4}, {0, 10}) == doctest::Approx(0.2));
}

TEST_CASE("threshold presets") {
  const auto anet = preset_thresholds(EvalPreset::activitynet);
  REQUIRE(anet.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(anet[i] - (0.50 + 0.05 * i)) < 1e-12);
  const auto thumos = preset_thresholds(EvalPreset::thumos);
  REQUIRE(thumos.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(thumos[i] - (0.3 + 0.1 * i)) < 1e-12);
  CHECK(recall_iou_grid() == anet);
  CHECK(parse_eval_preset("thumos") == EvalPreset::thumos);
  CHECK_THROWS_AS(parse_eval_preset("coco"), ArgumentError);
}

TEST_CASE("hand-computed AP: TP, FP, TP over two ground truths") {
  const GroundTruthByVideo gt{{"v", {Segment{0, 10}, Segment{20, 30}}}};
  const std::vector<ScoredSegment> preds{
      {"v", {0, 10}, 0.9}, {"v", {50, 60}, 0.8}, {"v", {20, 30}, 0.7}};
  const auto ap = average_precision(preds, gt, 0.5);
  REQUIRE(ap);
  CHECK(std::abs(*ap - 0.8333333333333334) < 1e-9);
  CHECK(std::abs(*ap - 5.0 / 6.0) < 1e-15);
  CHECK_FALSE(average_precision(preds, {}, 0.5).has_value());
  CHECK(*average_precision({}, gt, 0.5) == 0.0);
}

TEST_CASE("duplicates of one ground truth count once") {
  const GroundTruthByVideo gt{{"v", {Segment{0, 10}}}};
  const std::vector<ScoredSegment> preds{{"v", {0, 10}, 0.9}, {"v", {0, 10}, 0.8}};
  CHECK(*average_precision(preds, gt, 0.5) == 1.0);
  const std::vector<ScoredSegment> flipped{{"v", {0, 10}, 0.8}, {"v", {40, 50}, 0.9}};
  CHECK(*average_precision(flipped, gt, 0.5) == 0.5);
}

TEST_CASE("AP and mAP agree with the exhaustive reference") {
  SplitMix64 rng(31337);
  for (int trial = 0; trial < 400; ++trial) {
    const auto inst = oracle::random_micro_instance(rng);
    const auto report = map_avg(inst.predictions, inst.dataset, config_for(inst.classes));
    for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
      const auto ref = oracle::reference_map(inst, report.thresholds[t]);
      REQUIRE(ref.per_class.size() == report.per_class_ap.size());
      for (const auto& [cls, ap] : ref.per_class) {
        CHECK(std::abs(report.per_class_ap.at(cls)[t] - ap) <= 1e-12);
      }
      CHECK(std::abs(report.map[t] - ref.map) <= 1e-12);
    }
  }
}

TEST_CASE("AP only depends on the score order") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = oracle::random_micro_instance(rng);
    const auto config = config_for(inst.classes);
    const auto before = map_avg(inst.predictions, inst.dataset, config);
    for (auto& [id, dets] : inst.predictions) {
      for (auto& d : dets) d.score = std::exp(4.0 * d.score) - 1.0;
    }
    const auto after = map_avg(inst.predictions, inst.dataset, config);
    CHECK(after.per_class_ap == before.per_class_ap);
  }
}

TEST_CASE("a trailing false positive never raises AP") {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = oracle::random_micro_instance(rng);
    std::vector<ScoredSegment> preds;
    for (const auto& [id, dets] : inst.predictions) {
      for (const auto& d : dets) preds.push_back({id, d.segment, d.score});
    }
    const auto gt = class_agnostic_ground_truth(inst.dataset);
    for (double t : {0.3, 0.5, 0.9}) {
      const auto before = average_precision(preds, gt, t);
      if (!before) continue;
      auto more = preds;
      more.push_back({"unseen", {0, 5}, 0.01});
      more.push_back({"v0", {40, 50}, 0.001});
      CHECK(*average_precision(more, gt, t) <= *before);
    }
  }
}

TEST_CASE("mAP is non-increasing in the threshold") {
  SplitMix64 rng(10);
  for (int trial = 0; trial < 400; ++trial) {
    const auto inst = oracle::random_micro_instance(rng);
    auto config = config_for(inst.classes);
    config.iou_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    const auto report = map_avg(inst.predictions, inst.dataset, config);
    for (std::size_t i = 1; i < report.map.size(); ++i) CHECK(report.map[i] <= report.map[i - 1]);
  }
}

TEST_CASE("classes are scored in isolation") {
  SplitMix64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = oracle::random_micro_instance(rng);
    inst.classes.push_back("intruder");
    const auto config = config_for(inst.classes);
    const auto base = map_avg(inst.predictions, inst.dataset, config);
    auto noisy = inst;
    for (auto& [id, video] : noisy.dataset.videos) video.annotations.push_back({Segment{1, 3}, "intruder"});
    for (auto& [id, dets] : noisy.predictions) dets.push_back(det(1, 3, 0.99, "intruder"));
    noisy.predictions["v0"].push_back(det(0, 12, 0.5, "intruder"));
    const auto mixed = map_avg(noisy.predictions, noisy.dataset, config);
    for (const auto& [cls, aps] : base.per_class_ap) CHECK(mixed.per_class_ap.at(cls) == aps);
    CHECK(mixed.per_class_ap.count("intruder") == 1);
  }
}

TEST_CASE("classes without ground truth are excluded from the mean") {
  const auto ds = one_video({{Segment{0, 10}, "a"}}, {"a", "b", "c"});
  DetectionsByVideo preds{{"v", {det(0, 10, 0.9, "a"), det(20, 30, 0.9, "b")}}};
  const auto report = map_avg(preds, ds, config_for({"a", "b", "c"}));
  CHECK(report.excluded_classes == std::vector<std::string>{"b", "c"});
  CHECK(report.per_class_ap.size() == 1);
  CHECK(report.map_avg == 1.0);
  CHECK(report.map_at(0.95) == 1.0);
  CHECK_THROWS_AS(report.map_at(0.42), ArgumentError);
}

TEST_CASE("predictions equal to ground truth score perfectly") {
  const auto ds = one_video({{Segment{0, 10}, "a"}, {Segment{20, 25}, "b"}, {Segment{40, 70}, "a"}});
  DetectionsByVideo preds{{"v", {det(0, 10, 1.0, "a"), det(20, 25, 1.0, "b"), det(40, 70, 1.0, "a")}}};
  const auto report = evaluate_detections(preds, ds, config_for({"a", "b"}));
  CHECK(report.map.map_avg == 1.0);
  for (double ar : report.average_recall) CHECK(ar == 1.0);
  CHECK(report.prediction_count == 3);
  CHECK(report.ground_truth_count == 3);
  const auto doc = report.to_json();
  CHECK(doc["map"]["0.50"] == 1.0);
  CHECK(doc["average_recall"]["100"] == 1.0);
  CHECK(report.to_table().find("1.0000") != std::string::npos);
}

TEST_CASE("an empty prediction set scores zero") {
  const auto ds = one_video({{Segment{0, 10}, "a"}});
  const auto report = evaluate_detections({}, ds, config_for({"a", "b"}));
  CHECK(report.map.map_avg == 0.0);
  for (double ar : report.average_recall) CHECK(ar == 0.0);
}

TEST_CASE("label errors") {
  const auto ds = one_video({{Segment{0, 10}, "a"}});
  DetectionsByVideo unknown{{"v", {det(0, 10, 0.9, "zzz")}}};
  CHECK_THROWS_AS(map_avg(unknown, ds, config_for({"a", "b"})), ArgumentError);
  DetectionsByVideo unlabeled{{"v", {det(0, 10, 0.9, std::nullopt)}}};
  CHECK_THROWS_AS(map_avg(unlabeled, ds, config_for({"a", "b"})), ArgumentError);
  CHECK_THROWS_AS(map_avg({}, ds, config_for({"b"})), ArgumentError);
  auto bad = config_for({"a"});
  bad.iou_thresholds = {0.5, 0.5};
  CHECK_THROWS_AS(map_avg({}, ds, bad), ArgumentError);
  bad.iou_thresholds = {0.0};
  CHECK_THROWS_AS(map_avg({}, ds, bad), ArgumentError);
}

TEST_CASE("AR@1 with one of two ground truths recalled") {
  const GroundTruthByVideo gt{{"v", {Segment{0, 10}, Segment{20, 30}}}};
  const DetectionsByVideo props{{"v", {det(0, 10, 0.9, std::nullopt), det(20, 30, 0.5, std::nullopt)}}};
  CHECK(average_recall_at_n(props, gt, 1) == 0.5);
  CHECK(average_recall_at_n(props, gt, 2) == 1.0);
  // IoU 0.75 passes half of the 0.50:0.05:0.95 grid.
  const DetectionsByVideo loose{{"v", {det(0, 7.5, 0.9, std::nullopt)}}};
  const GroundTruthByVideo single{{"v", {Segment{0, 10}}}};
  CHECK(average_recall_at_n(loose, single, 1) == doctest::Approx(0.6));
  CHECK_THROWS_AS(average_recall_at_n(props, gt, 0), ArgumentError);
}

TEST_CASE("AR is non-decreasing in N") {
  SplitMix64 rng(14);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = oracle::random_micro_instance(rng);
    const auto gt = class_agnostic_ground_truth(inst.dataset);
    double prev = 0.0;
    for (std::size_t n = 1; n <= 8; ++n) {
      const double ar = average_recall_at_n(inst.predictions, gt, n);
      CHECK(ar >= prev);
      CHECK(ar <= 1.0);
      prev = ar;
    }
  }
}

TEST_CASE("class-agnostic collapse") {
  const auto ds = one_video({{Segment{0, 10}, "a"}, {Segment{20, 25}, "b"}});
  const auto flat = strip_labels(ds);
  CHECK(flat.vocabulary == std::vector<std::string>{kAgnosticLabel});
  DetectionsByVideo preds{{"v", {det(0, 10, 0.9, "b"), det(20, 25, 0.8, "a")}}};
  const auto wrong = map_avg(preds, ds, config_for({"a", "b"}));
  CHECK(wrong.map_avg == 0.0);
  const auto agnostic = map_avg(strip_labels(preds), flat, config_for({kAgnosticLabel}));
  CHECK(agnostic.map_avg == 1.0);
}

TEST_CASE("mean and standard error") {
  const auto m = mean_and_standard_error({1, 2, 3, 4});
  CHECK(m.mean == 2.5);
  CHECK(m.standard_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-14));
  CHECK(mean_and_standard_error({0.3, 0.3, 0.3}).standard_error == 0.0);
  CHECK(mean_and_standard_error({0.7}).standard_error == 0.0);
  CHECK(mean_and_standard_error({}).mean == 0.0);
}
