#pragma once

// Independent reference implementations shared by the unit suites and the
// acceptance binary. They trade speed for obviousness on purpose.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ovtad/core.hpp"
#include "ovtad/metrics.hpp"
#include "ovtad/rng.hpp"
#include "ovtad/trainmath.hpp"

namespace ovtad::oracle {

struct BruteAssignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  double total = std::numeric_limits<double>::infinity();
};

// Every matching of size min(n, m), scored in row order; the first minimum
// in lexicographic order of the row-sorted pair list wins.
inline BruteAssignment brute_force_assignment(const CostMatrix& c) {
  const std::size_t n = c.rows(), m = c.cols();
  const bool by_row = n <= m;
  const std::size_t outer = by_row ? n : m;
  const std::size_t inner = by_row ? m : n;
  BruteAssignment best;
  std::vector<std::size_t> pick(outer);
  std::vector<bool> taken(inner, false);

  auto score = [&] {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < outer; ++k) {
      pairs.emplace_back(by_row ? k : pick[k], by_row ? pick[k] : k);
    }
    std::sort(pairs.begin(), pairs.end());
    double total = 0.0;
    for (const auto& [r, col] : pairs) total += c(r, col);
    if (total < best.total || (total == best.total && pairs < best.pairs)) {
      best.total = total;
      best.pairs = std::move(pairs);
    }
  };
  auto recurse = [&](auto&& self, std::size_t k) -> void {
    if (k == outer) {
      score();
      return;
    }
    for (std::size_t j = 0; j < inner; ++j) {
      if (taken[j]) continue;
      taken[j] = true;
      pick[k] = j;
      self(self, k + 1);
      taken[j] = false;
    }
  };
  if (outer == 0) {
    best.total = 0.0;
    return best;
  }
  recurse(recurse, 0);
  return best;
}

struct MicroPrediction {
  std::string video;
  double start = 0.0, end = 0.0, score = 0.0;
};

// Overlap over union with the union taken as the sum of lengths minus the
// overlap, unlike the library's hull form. Exact on integer endpoints.
inline double overlap_ratio(double s1, double e1, double s2, double e2) {
  const double inter = std::max(0.0, std::min(e1, e2) - std::max(s1, s2));
  if (inter == 0.0) return 0.0;
  return inter / ((e1 - s1) + (e2 - s2) - inter);
}

// AP = (1 / #gt) * sum of precision at each true-positive rank. Ranking is
// (score desc, video, start, input position).
inline double reference_ap(const std::vector<MicroPrediction>& preds,
                           const std::map<std::string, std::vector<std::pair<double, double>>>& gt,
                           double threshold) {
  std::size_t total_gt = 0;
  for (const auto& [v, segs] : gt) total_gt += segs.size();
  std::vector<std::tuple<double, std::string, double, std::size_t>> keys;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    keys.emplace_back(-preds[i].score, preds[i].video, preds[i].start, i);
  }
  std::sort(keys.begin(), keys.end());

  std::map<std::string, std::vector<int>> claimed;
  for (const auto& [v, segs] : gt) claimed[v] = std::vector<int>(segs.size(), 0);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < keys.size(); ++rank) {
    const auto& p = preds[std::get<3>(keys[rank])];
    auto it = gt.find(p.video);
    if (it == gt.end()) continue;
    int chosen = -1;
    double chosen_iou = 0.0;
    for (std::size_t j = 0; j < it->second.size(); ++j) {
      if (claimed[p.video][j]) continue;
      const double iou = overlap_ratio(p.start, p.end, it->second[j].first, it->second[j].second);
      if (iou < threshold) continue;
      if (chosen < 0 || iou > chosen_iou) {
        chosen = static_cast<int>(j);
        chosen_iou = iou;
      }
    }
    if (chosen < 0) continue;
    claimed[p.video][static_cast<std::size_t>(chosen)] = 1;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return sum / static_cast<double>(total_gt);
}

// Tiny detection problems on an integer grid, so IoU ties and score ties
// both show up and every IoU is computed exactly.
struct MicroInstance {
  AnnotatedDataset dataset;
  DetectionsByVideo predictions;
  std::vector<std::string> classes;
};

inline MicroInstance random_micro_instance(SplitMix64& rng) {
  MicroInstance inst;
  const std::size_t n_videos = 1 + rng.bounded(4);
  const std::size_t n_classes = 1 + rng.bounded(3);
  for (std::size_t c = 0; c < n_classes; ++c) inst.classes.push_back("c" + std::to_string(c));
  auto segment = [&] {
    const double s = static_cast<double>(rng.bounded(10));
    return Segment{s, s + 1.0 + static_cast<double>(rng.bounded(3))};
  };
  std::vector<VideoRecord> videos;
  for (std::size_t v = 0; v < n_videos; ++v) {
    VideoRecord rec{"v" + std::to_string(v), 12.0, Subset::validation, {}};
    const std::size_t n_gt = rng.bounded(4);
    for (std::size_t g = 0; g < n_gt; ++g) {
      rec.annotations.push_back({segment(), inst.classes[rng.bounded(n_classes)]});
    }
    videos.push_back(std::move(rec));
  }
  inst.dataset = make_dataset(std::move(videos), inst.classes);
  const std::size_t n_pred = rng.bounded(7);
  for (std::size_t i = 0; i < n_pred; ++i) {
    const std::string video = "v" + std::to_string(rng.bounded(n_videos));
    const double score = static_cast<double>(1 + rng.bounded(4)) / 5.0;
    inst.predictions[video].push_back({segment(), score, inst.classes[rng.bounded(n_classes)]});
  }
  return inst;
}

// Per-class reference AP (classes without ground truth absent) and their mean.
struct ReferenceMap {
  std::map<std::string, double> per_class;
  double map = 0.0;
};

inline ReferenceMap reference_map(const MicroInstance& inst, double threshold) {
  ReferenceMap out;
  for (const auto& cls : inst.classes) {
    std::map<std::string, std::vector<std::pair<double, double>>> gt;
    std::size_t count = 0;
    for (const auto& [id, video] : inst.dataset.videos) {
      for (const auto& a : video.annotations) {
        if (a.label != cls) continue;
        gt[id].emplace_back(a.segment.start, a.segment.end);
        ++count;
      }
    }
    if (count == 0) continue;
    std::vector<MicroPrediction> preds;
    for (const auto& [id, dets] : inst.predictions) {
      for (const auto& d : dets) {
        if (*d.label == cls) preds.push_back({id, d.segment.start, d.segment.end, d.score});
      }
    }
    out.per_class[cls] = reference_ap(preds, gt, threshold);
  }
  for (const auto& [cls, ap] : out.per_class) out.map += ap;
  if (!out.per_class.empty()) out.map /= static_cast<double>(out.per_class.size());
  return out;
}

// Random ground truth for the render/decode round trip. With `separated`,
// center cells differ by at least 3 so each bump is a strict maximum within
// the default peak window of 2. Without it, centers may share or abut cells.
struct Layout {
  std::vector<Segment> gt;
  std::size_t cells = 0;
  double stride = 1.0;
};

inline Layout random_layout(SplitMix64& rng, bool separated) {
  static constexpr double kStrides[] = {1.0, 0.5, 2.0, 0.25};
  Layout out;
  out.stride = kStrides[rng.bounded(4)];
  out.cells = 32 + rng.bounded(96);
  const std::size_t want = 1 + rng.bounded(8);
  std::vector<std::size_t> centers;
  for (std::size_t tries = 0; centers.size() < want && tries < 200; ++tries) {
    const std::size_t cell = 1 + rng.bounded(out.cells - 2);
    const bool clash = std::any_of(centers.begin(), centers.end(), [&](std::size_t c) {
      const std::size_t d = c > cell ? c - cell : cell - c;
      return separated ? d < 3 : false;
    });
    if (!clash) centers.push_back(cell);
  }
  const double total = static_cast<double>(out.cells) * out.stride;
  for (std::size_t cell : centers) {
    const double center = (static_cast<double>(cell) + rng.uniform()) * out.stride;
    const double room = std::min(center, total - center);
    const double half = std::max(room * 1e-3, rng.uniform(0.05, 1.0) * room);
    out.gt.push_back(Segment{center - half, center + half});
  }
  return out;
}

}  // namespace ovtad::oracle
