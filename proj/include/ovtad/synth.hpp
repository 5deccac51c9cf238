#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "ovtad/core.hpp"
#include "ovtad/detdecode.hpp"
#include "ovtad/featurestore.hpp"
#include "ovtad/ovclassify.hpp"

namespace ovtad {

/// Parameters of a synthetic corpus. Durations and segment lengths are whole
/// seconds so planted segments align with 1 FPS feature rows.
struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t n_videos = 50;
  std::size_t n_classes = 10;
  std::size_t min_duration = 30;
  std::size_t max_duration = 120;
  std::size_t min_segments = 1;
  std::size_t max_segments = 4;
  std::size_t min_segment_length = 2;
  std::size_t max_segment_length = 20;
  std::size_t dim = 32;
  /// Per-coordinate std-dev of noise added to in-segment frames before normalization.
  double feature_sigma = 0.0;
  /// Std-dev (seconds) of start/end noise on oracle detections.
  double boundary_jitter = 0.0;
  /// Std-dev of noise around the 0.9 base oracle score.
  double score_noise = 0.0;
  /// Probability that a planted segment is an unannotated distractor.
  double distractor_rate = 0.0;
  Subset subset = Subset::validation;

  void validate() const;
};

struct SynthData {
  AnnotatedDataset dataset;
  FeatureMap features;
  TextEmbeddingSet texts;
  /// Jittered copies of every planted segment (distractors included), unlabeled.
  DetectionsByVideo oracle_detections;
  /// Rendered CenterNet targets of every planted segment, one per video.
  std::map<std::string, CenterNetOutput> heads;
  /// Annotated segments; distractors are counted separately.
  std::size_t planted = 0;
  std::size_t distractors = 0;
};

SynthData generate(const SynthSpec& spec);

/// Writes the corpus in the production formats:
///   dataset.json, texts.json, oracle_detections.jsonl,
///   features/<id>.ovtf, heads/<id>.ovth
void write_synth(const SynthData& data, const std::filesystem::path& dir);

}  // namespace ovtad
