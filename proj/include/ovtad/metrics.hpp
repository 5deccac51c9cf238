#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ovtad/core.hpp"

namespace ovtad {

/// |a ∩ b| / |a ∪ b|, zero for disjoint intervals.
double temporal_iou(const Segment& a, const Segment& b);

/// One scored segment from a specific video, the unit AP is computed over.
struct ScoredSegment {
  std::string video_id;
  Segment segment;
  double score = 0.0;
};

using GroundTruthByVideo = std::map<std::string, std::vector<Segment>>;

/// All-points AP for a single class. Predictions are ranked by score
/// (ties: video_id, then start, then input order) and each is greedily
/// matched to the highest-IoU unmatched ground truth of its video with
/// IoU >= threshold. Returns nullopt when there is no ground truth.
std::optional<double> average_precision(const std::vector<ScoredSegment>& predictions,
                                        const GroundTruthByVideo& ground_truth,
                                        double iou_threshold);

/// 0.50:0.05:0.95, used for AR on both datasets.
std::vector<double> recall_iou_grid();

struct EvalConfig {
  std::vector<double> iou_thresholds;
  std::vector<std::size_t> recall_ns;
  std::vector<std::string> class_list;
  /// IoU grid AR@N is averaged over.
  std::vector<double> recall_iou_grid = ovtad::recall_iou_grid();

  /// Thresholds strictly increasing in (0, 1], Ns positive.
  void validate() const;
};

enum class EvalPreset { activitynet, thumos };

EvalPreset parse_eval_preset(std::string_view text);
std::string_view to_string(EvalPreset preset);

/// 0.50:0.05:0.95 (ActivityNet) or 0.3:0.1:0.7 (Thumos).
std::vector<double> preset_thresholds(EvalPreset preset);


EvalConfig make_eval_config(EvalPreset preset, std::vector<std::string> class_list);

struct MapReport {
  std::vector<double> thresholds;
  /// ap[class][threshold index]; classes without ground truth are absent.
  std::map<std::string, std::vector<double>> per_class_ap;
  std::vector<std::string> excluded_classes;
  std::vector<double> map;  // per threshold
  double map_avg = 0.0;

  double map_at(double threshold) const;
};

/// Per-class AP over the config's threshold grid. Labels outside
/// config.class_list raise ArgumentError, as do unlabeled predictions.
MapReport map_avg(const DetectionsByVideo& predictions, const AnnotatedDataset& ground_truth,
                  const EvalConfig& config);

/// Keeps each video's top-n proposals by score and reports the mean, over
/// `iou_grid`, of the fraction of ground-truth segments matched one-to-one.
double average_recall_at_n(const DetectionsByVideo& proposals, const GroundTruthByVideo& ground_truth,
                           std::size_t n, const std::vector<double>& iou_grid = recall_iou_grid());

/// Every annotation of the dataset, labels dropped.
GroundTruthByVideo class_agnostic_ground_truth(const AnnotatedDataset& dataset);

/// Collapses every label onto a single class so the mAP machinery scores
/// class-agnostic detection.
inline constexpr const char* kAgnosticLabel = "__action__";
AnnotatedDataset strip_labels(const AnnotatedDataset& dataset);
DetectionsByVideo strip_labels(const DetectionsByVideo& detections);

struct DetectionReport {
  MapReport map;
  std::vector<std::size_t> recall_ns;
  std::vector<double> average_recall;
  std::size_t prediction_count = 0;
  std::size_t ground_truth_count = 0;

  nlohmann::ordered_json to_json() const;
  /// Aligned plain-text table: mAP at every threshold, mAP@avg, AR@N.
  std::string to_table() const;
};

DetectionReport evaluate_detections(const DetectionsByVideo& predictions,
                                    const AnnotatedDataset& ground_truth, const EvalConfig& config);

struct MeanAndError {
  double mean = 0.0;
  /// Sample standard deviation over sqrt(n); zero when n < 2.
  double standard_error = 0.0;
};

MeanAndError mean_and_standard_error(const std::vector<double>& values);

}  // namespace ovtad
