#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ovtad/core.hpp"
#include "ovtad/featurestore.hpp"

namespace ovtad {

using FeatureMap = std::map<std::string, FeatureSequence>;

struct ClassScores {
  std::vector<std::string> labels;
  /// Dot products of the normalized pooled vector with each text row.
  std::vector<double> logits;
  std::vector<double> probabilities;

  /// Argmax by logit; the lowest index wins ties.
  std::size_t top() const;
  const std::string& top_label() const { return labels[top()]; }
  /// Indices of the k best labels, best first, ties to the lower index.
  std::vector<std::size_t> ranked(std::size_t k) const;
};

/// Max-subtracted softmax of logits / temperature.
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);

/// softmax(normalize(pooled) . texts / temperature).
ClassScores classify(std::span<const double> pooled, const TextEmbeddingSet& texts,
                     double temperature = 1.0);

enum class MissingFeatures { fail, skip };

struct TopKReport {
  std::vector<std::size_t> ks;
  /// correct[i] counts segments whose label is within the top ks[i].
  std::vector<std::size_t> correct;
  std::size_t evaluated = 0;
  /// Annotations of videos without features, or lying past the feature end.
  std::size_t skipped = 0;
  std::vector<std::string> missing_videos;

  double accuracy(std::size_t i) const {
    return evaluated == 0 ? 0.0 : static_cast<double>(correct[i]) / static_cast<double>(evaluated);
  }
  /// Fraction of annotations that were evaluated.
  double coverage() const {
    const auto total = evaluated + skipped;
    return total == 0 ? 0.0 : static_cast<double>(evaluated) / static_cast<double>(total);
  }
};

/// Ground-truth segment classification: every annotation is pooled,
/// classified against `texts`, and counted once per k.
TopKReport evaluate_topk(const AnnotatedDataset& dataset, const FeatureMap& features,
                         const TextEmbeddingSet& texts, const std::vector<std::size_t>& ks,
                         MissingFeatures missing = MissingFeatures::fail, double temperature = 1.0,
                         std::size_t jobs = 1);

/// Strict single-k form of evaluate_topk.
double topk_accuracy(const AnnotatedDataset& dataset, const FeatureMap& features,
                     const TextEmbeddingSet& texts, std::size_t k);

enum class ScoreComposition {
  product,            // detector score x class probability
  class_probability,  // class probability alone
};

struct ClassifyOptions {
  double temperature = 1.0;
  ScoreComposition composition = ScoreComposition::product;
  /// Emit one detection per label instead of the argmax only.
  bool fanout = false;
};

ScoreComposition parse_score_composition(std::string_view text);
std::string_view to_string(ScoreComposition c);

std::vector<SegmentDetection> classify_detections(const std::vector<SegmentDetection>& detections,
                                                  const FeatureSequence& features,
                                                  const TextEmbeddingSet& texts,
                                                  const ClassifyOptions& options = {});

}  // namespace ovtad
