#include "ovtad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "ovtad/error.hpp"

namespace ovtad {

double temporal_iou(const Segment& a, const Segment& b) {
  const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

std::optional<double> average_precision(const std::vector<ScoredSegment>& predictions,
                                        const GroundTruthByVideo& ground_truth,
                                        double iou_threshold) {
  std::size_t n_gt = 0;
  for (const auto& [id, segs] : ground_truth) n_gt += segs.size();
  if (n_gt == 0) return std::nullopt;

  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = predictions[a];
    const auto& pb = predictions[b];
    if (pa.score != pb.score) return pa.score > pb.score;
    if (pa.video_id != pb.video_id) return pa.video_id < pb.video_id;
    return pa.segment.start < pb.segment.start;
  });

  std::map<std::string, std::vector<bool>> used;
  for (const auto& [id, segs] : ground_truth) used[id].assign(segs.size(), false);

  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto& p = predictions[order[rank]];
    auto gt = ground_truth.find(p.video_id);
    if (gt != ground_truth.end()) {
      auto& flags = used[p.video_id];
      double best_iou = -1.0;
      std::size_t best = 0;
      for (std::size_t j = 0; j < gt->second.size(); ++j) {
        if (flags[j]) continue;
        const double iou = temporal_iou(p.segment, gt->second[j]);
        if (iou >= iou_threshold && iou > best_iou) {
          best_iou = iou;
          best = j;
        }
      }
      if (best_iou >= 0.0) {
        flags[best] = true;
        ++tp;
        const double precision = static_cast<double>(tp) / static_cast<double>(rank + 1);
        const double recall = static_cast<double>(tp) / static_cast<double>(n_gt);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
      }
    }
  }
  return ap;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) {
    throw ArgumentError("at least one IoU threshold is required");
  }
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("IoU thresholds must lie in (0, 1]");
    if (i > 0 && !(t > iou_thresholds[i - 1])) {
      throw ArgumentError("IoU thresholds must be strictly increasing");
    }
  }
  for (auto n : recall_ns) {
    if (n == 0) throw ArgumentError("recall N must be positive");
  }
  if (recall_iou_grid.empty()) throw ArgumentError("the AR IoU grid is empty");
  for (double t : recall_iou_grid) {
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("AR IoU grid values must lie in (0, 1]");
  }
}

EvalPreset parse_eval_preset(std::string_view text) {
  if (text == "activitynet") return EvalPreset::activitynet;
  if (text == "thumos") return EvalPreset::thumos;
  throw ArgumentError("preset must be 'activitynet' or 'thumos'");
}

std::string_view to_string(EvalPreset preset) {
  return preset == EvalPreset::activitynet ? "activitynet" : "thumos";
}

std::vector<double> preset_thresholds(EvalPreset preset) {
  std::vector<double> out;
  if (preset == EvalPreset::activitynet) {
    for (int i = 0; i < 10; ++i) out.push_back((50 + 5 * i) / 100.0);
  } else {
    for (int i = 0; i < 5; ++i) out.push_back((3 + i) / 10.0);
  }
  return out;
}

std::vector<double> recall_iou_grid() { return preset_thresholds(EvalPreset::activitynet); }

EvalConfig make_eval_config(EvalPreset preset, std::vector<std::string> class_list) {
  EvalConfig config;
  config.iou_thresholds = preset_thresholds(preset);
  config.recall_ns = {10, 50, 100};
  config.class_list = normalize_vocabulary(std::move(class_list));
  return config;
}

double MapReport::map_at(double threshold) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - threshold) < 1e-9) return map[i];
  }
  throw ArgumentError("threshold not in the evaluated grid");
}

MapReport map_avg(const DetectionsByVideo& predictions, const AnnotatedDataset& ground_truth,
                  const EvalConfig& config) {
  config.validate();
  const auto classes = normalize_vocabulary(config.class_list);
  auto known = [&](const std::string& l) { return std::binary_search(classes.begin(), classes.end(), l); };

  std::map<std::string, GroundTruthByVideo> gt_by_class;
  std::map<std::string, std::size_t> gt_count;
  for (const auto& c : classes) {
    gt_by_class[c];
    gt_count[c] = 0;
  }
  for (const auto& [id, video] : ground_truth.videos) {
    for (const auto& ann : video.annotations) {
      if (!known(ann.label)) throw ArgumentError("ground-truth label '" + ann.label + "' is not in the class list");
      gt_by_class[ann.label][id].push_back(ann.segment);
      ++gt_count[ann.label];
    }
  }
  std::map<std::string, std::vector<ScoredSegment>> preds_by_class;
  for (const auto& [id, dets] : predictions) {
    for (const auto& d : dets) {
      if (!d.label) throw ArgumentError("prediction in video " + id + " has no label");
      if (!known(*d.label)) throw ArgumentError("prediction label '" + *d.label + "' is not in the class list");
      preds_by_class[*d.label].push_back({id, d.segment, d.score});
    }
  }

  MapReport report;
  report.thresholds = config.iou_thresholds;
  report.map.assign(report.thresholds.size(), 0.0);
  for (const auto& c : classes) {
    if (gt_count[c] == 0) {
      report.excluded_classes.push_back(c);
      continue;
    }
    std::vector<double> aps;
    aps.reserve(report.thresholds.size());
    for (double t : report.thresholds) {
      aps.push_back(*average_precision(preds_by_class[c], gt_by_class[c], t));
    }
    report.per_class_ap.emplace(c, std::move(aps));
  }
  if (!report.per_class_ap.empty()) {
    for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
      double sum = 0.0;
      for (const auto& [c, aps] : report.per_class_ap) sum += aps[i];
      report.map[i] = sum / static_cast<double>(report.per_class_ap.size());
    }
  }
  report.map_avg = std::accumulate(report.map.begin(), report.map.end(), 0.0) /
                   static_cast<double>(report.map.size());
  return report;
}

double average_recall_at_n(const DetectionsByVideo& proposals, const GroundTruthByVideo& ground_truth,
                           std::size_t n, const std::vector<double>& iou_grid) {
  if (n == 0) throw ArgumentError("recall N must be positive");
  if (iou_grid.empty()) throw ArgumentError("empty IoU grid");
  std::size_t n_gt = 0;
  for (const auto& [id, segs] : ground_truth) n_gt += segs.size();
  if (n_gt == 0) return 0.0;

  // Candidate (proposal rank, gt index, IoU) pairs per video, sorted once.
  struct Pair {
    std::size_t rank;
    std::size_t gt;
    double iou;
  };
  std::vector<std::pair<std::size_t, std::vector<Pair>>> per_video;  // (gt count, pairs)
  for (const auto& [id, gts] : ground_truth) {
    std::vector<Pair> pairs;
    auto it = proposals.find(id);
    if (it != proposals.end()) {
      std::vector<std::size_t> order(it->second.size());
      std::iota(order.begin(), order.end(), 0);
      const auto& dets = it->second;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        return dets[a].segment.start < dets[b].segment.start;
      });
      order.resize(std::min(order.size(), n));
      for (std::size_t r = 0; r < order.size(); ++r) {
        for (std::size_t g = 0; g < gts.size(); ++g) {
          const double iou = temporal_iou(dets[order[r]].segment, gts[g]);
          if (iou > 0.0) pairs.push_back({r, g, iou});
        }
      }
      std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.rank != b.rank) return a.rank < b.rank;
        return a.gt < b.gt;
      });
    }
    per_video.emplace_back(gts.size(), std::move(pairs));
  }

  double recall_sum = 0.0;
  for (double t : iou_grid) {
    std::size_t matched = 0;
    for (const auto& [gt_count, pairs] : per_video) {
      std::vector<bool> gt_used(gt_count, false);
      std::vector<bool> prop_used(n, false);
      for (const auto& p : pairs) {
        if (p.iou < t) break;
        if (gt_used[p.gt] || prop_used[p.rank]) continue;
        gt_used[p.gt] = true;
        prop_used[p.rank] = true;
        ++matched;
      }
    }
    recall_sum += static_cast<double>(matched) / static_cast<double>(n_gt);
  }
  return recall_sum / static_cast<double>(iou_grid.size());
}

GroundTruthByVideo class_agnostic_ground_truth(const AnnotatedDataset& dataset) {
  GroundTruthByVideo gt;
  for (const auto& [id, video] : dataset.videos) {
    auto& segs = gt[id];
    for (const auto& ann : video.annotations) segs.push_back(ann.segment);
  }
  return gt;
}

AnnotatedDataset strip_labels(const AnnotatedDataset& dataset) {
  AnnotatedDataset out = dataset;
  for (auto& [id, video] : out.videos) {
    for (auto& ann : video.annotations) ann.label = kAgnosticLabel;
  }
  out.vocabulary = {kAgnosticLabel};
  return out;
}

DetectionsByVideo strip_labels(const DetectionsByVideo& detections) {
  DetectionsByVideo out = detections;
  for (auto& [id, dets] : out) {
    for (auto& d : dets) d.label = kAgnosticLabel;
  }
  return out;
}

DetectionReport evaluate_detections(const DetectionsByVideo& predictions,
                                    const AnnotatedDataset& ground_truth, const EvalConfig& config) {
  DetectionReport report;
  report.map = map_avg(predictions, ground_truth, config);
  report.recall_ns = config.recall_ns;
  const auto gt = class_agnostic_ground_truth(ground_truth);
  for (auto n : config.recall_ns) {
    report.average_recall.push_back(average_recall_at_n(predictions, gt, n, config.recall_iou_grid));
  }
  for (const auto& [id, dets] : predictions) report.prediction_count += dets.size();
  report.ground_truth_count = ground_truth.annotation_count();
  return report;
}

namespace {

std::string threshold_key(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

}  // namespace

nlohmann::ordered_json DetectionReport::to_json() const {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json by_t = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < map.thresholds.size(); ++i) {
    by_t[threshold_key(map.thresholds[i])] = map.map[i];
  }
  doc["thresholds"] = map.thresholds;
  doc["map"] = std::move(by_t);
  doc["map_avg"] = map.map_avg;
  nlohmann::ordered_json ar = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < recall_ns.size(); ++i) {
    ar[std::to_string(recall_ns[i])] = average_recall[i];
  }
  doc["average_recall"] = std::move(ar);
  doc["classes_evaluated"] = map.per_class_ap.size();
  doc["classes_excluded_no_ground_truth"] = map.excluded_classes;
  doc["predictions"] = prediction_count;
  doc["ground_truth_segments"] = ground_truth_count;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (const auto& [c, aps] : map.per_class_ap) per_class[c] = aps;
  doc["per_class_ap"] = std::move(per_class);
  return doc;
}

std::string DetectionReport::to_table() const {
  std::ostringstream os;
  char buf[64];
  std::string header;
  std::string values;
  auto column = [&](const std::string& name, double v) {
    std::snprintf(buf, sizeof(buf), "%10s", name.c_str());
    header += buf;
    std::snprintf(buf, sizeof(buf), "%10.4f", v);
    values += buf;
  };
  for (std::size_t i = 0; i < map.thresholds.size(); ++i) {
    column("mAP@" + threshold_key(map.thresholds[i]), map.map[i]);
  }
  column("mAP@avg", map.map_avg);
  for (std::size_t i = 0; i < recall_ns.size(); ++i) {
    column("AR@" + std::to_string(recall_ns[i]), average_recall[i]);
  }
  os << header << "\n" << values << "\n";
  return os.str();
}

MeanAndError mean_and_standard_error(const std::vector<double>& values) {
  MeanAndError out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

}  // namespace ovtad
