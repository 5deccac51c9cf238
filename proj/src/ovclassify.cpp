#include "ovtad/ovclassify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ovtad/error.hpp"
#include "ovtad/parallel.hpp"

namespace ovtad {

std::size_t ClassScores::top() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

std::vector<std::size_t> ClassScores::ranked(std::size_t k) const {
  std::vector<std::size_t> idx(logits.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw ArgumentError("softmax of an empty vector");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ArgumentError("temperature must be positive");
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - max_logit) / temperature);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

ClassScores classify(std::span<const double> pooled, const TextEmbeddingSet& texts,
                     double temperature) {
  if (pooled.size() != texts.dim()) {
    throw ArgumentError("pooled feature dim " + std::to_string(pooled.size()) +
                        " differs from text embedding dim " + std::to_string(texts.dim()));
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ArgumentError("temperature must be positive");
  }
  double norm = 0.0;
  for (double v : pooled) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0 || !std::isfinite(norm)) {
    throw ArgumentError("cannot classify a zero pooled vector");
  }

  ClassScores out;
  out.labels = texts.labels();
  out.logits.resize(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto row = texts.row(i);
    double dot = 0.0;
    for (std::size_t d = 0; d < row.size(); ++d) dot += pooled[d] * row[d];
    out.logits[i] = dot / norm;
  }
  out.probabilities = softmax(out.logits, temperature);
  return out;
}

TopKReport evaluate_topk(const AnnotatedDataset& dataset, const FeatureMap& features,
                         const TextEmbeddingSet& texts, const std::vector<std::size_t>& ks,
                         MissingFeatures missing, double temperature, std::size_t jobs) {
  if (ks.empty()) {
    throw ArgumentError("at least one k is required");
  }
  for (auto k : ks) {
    if (k < 1) throw ArgumentError("k must be >= 1");
  }
  for (const auto& label : dataset.vocabulary) {
    if (!texts.index_of(label)) {
      throw ArgumentError("label '" + label + "' has no text embedding");
    }
  }
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());

  struct VideoResult {
    std::vector<std::size_t> correct;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
    bool missing = false;
  };
  std::vector<const VideoRecord*> videos;
  for (const auto& [id, v] : dataset.videos) {
    if (!v.annotations.empty()) videos.push_back(&v);
  }
  std::vector<VideoResult> results(videos.size());

  parallel_for(videos.size(), jobs, [&](std::size_t i) {
    const VideoRecord& video = *videos[i];
    VideoResult& res = results[i];
    res.correct.assign(ks.size(), 0);
    auto it = features.find(video.video_id);
    if (it == features.end()) {
      if (missing == MissingFeatures::fail) {
        throw ArgumentError("no feature sequence for video " + video.video_id);
      }
      res.missing = true;
      res.skipped = video.annotations.size();
      return;
    }
    for (const auto& ann : video.annotations) {
      std::vector<double> pooled;
      try {
        pooled = pool_segment(it->second, ann.segment);
      } catch (const ArgumentError&) {
        if (missing == MissingFeatures::fail) throw;
        ++res.skipped;
        continue;
      }
      const ClassScores scores = classify(pooled, texts, temperature);
      const auto truth = *texts.index_of(ann.label);
      const auto order = scores.ranked(max_k);
      const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), truth) - order.begin());
      for (std::size_t j = 0; j < ks.size(); ++j) {
        if (pos < ks[j]) ++res.correct[j];
      }
      ++res.evaluated;
    }
  });

  TopKReport report;
  report.ks = ks;
  report.correct.assign(ks.size(), 0);
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const auto& res = results[i];
    for (std::size_t j = 0; j < ks.size(); ++j) report.correct[j] += res.correct[j];
    report.evaluated += res.evaluated;
    report.skipped += res.skipped;
    if (res.missing) report.missing_videos.push_back(videos[i]->video_id);
  }
  return report;
}

double topk_accuracy(const AnnotatedDataset& dataset, const FeatureMap& features,
                     const TextEmbeddingSet& texts, std::size_t k) {
  return evaluate_topk(dataset, features, texts, {k}).accuracy(0);
}

ScoreComposition parse_score_composition(std::string_view text) {
  if (text == "product") return ScoreComposition::product;
  if (text == "class") return ScoreComposition::class_probability;
  throw ArgumentError("score composition must be 'product' or 'class'");
}

std::string_view to_string(ScoreComposition c) {
  return c == ScoreComposition::product ? "product" : "class";
}

std::vector<SegmentDetection> classify_detections(const std::vector<SegmentDetection>& detections,
                                                  const FeatureSequence& features,
                                                  const TextEmbeddingSet& texts,
                                                  const ClassifyOptions& options) {
  std::vector<SegmentDetection> out;
  out.reserve(options.fanout ? detections.size() * texts.size() : detections.size());
  auto compose = [&](double det_score, double prob) {
    return options.composition == ScoreComposition::product ? det_score * prob : prob;
  };
  for (const auto& det : detections) {
    const ClassScores scores = classify(pool_segment(features, det.segment), texts, options.temperature);
    if (options.fanout) {
      for (std::size_t i = 0; i < scores.labels.size(); ++i) {
        out.push_back({det.segment, compose(det.score, scores.probabilities[i]), scores.labels[i]});
      }
    } else {
      const auto best = scores.top();
      out.push_back({det.segment, compose(det.score, scores.probabilities[best]), scores.labels[best]});
    }
  }
  return out;
}

}  // namespace ovtad
