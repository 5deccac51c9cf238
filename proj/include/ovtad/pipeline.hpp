#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ovtad/core.hpp"
#include "ovtad/detdecode.hpp"
#include "ovtad/metrics.hpp"
#include "ovtad/ovclassify.hpp"
#include "ovtad/splits.hpp"
#include "ovtad/synth.hpp"
#include "ovtad/trainmath.hpp"

namespace ovtad::pipeline {

namespace fs = std::filesystem;

/// Every tunable constant of the toolkit. Loaded from a JSON file with one
/// object per section; unknown keys are rejected so typos do not go silent.
struct PipelineConfig {
  // "dataset"
  double overshoot_tolerance = 0.5;
  /// Videos of this subset are evaluated; nullopt keeps every subset.
  std::optional<Subset> eval_subset = Subset::validation;

  // "splits"
  double eval_fraction = 0.25;
  std::uint64_t seed_base = 0;
  std::size_t seed_count = 12;

  // "classify"
  double temperature = 1.0;
  ScoreComposition composition = ScoreComposition::product;
  bool fanout = false;
  std::vector<std::size_t> topk = {1, 5};

  // "decode"
  std::size_t centernet_top_k = kDefaultCenterNetTopK;
  std::size_t peak_window = 2;
  double detr_score_threshold = 0.0;
  bool apply_nms = true;
  double nms_iou = kDefaultNmsIou;

  // "eval"
  EvalPreset preset = EvalPreset::activitynet;
  /// Replaces the preset grid when set.
  std::optional<std::vector<double>> iou_thresholds;
  std::vector<std::size_t> recall_ns = {10, 50, 100};
  std::vector<double> recall_iou_grid = ovtad::recall_iou_grid();

  // "train" (consumed by the exporter's trainer; recorded here so one file pins everything)
  GaussianTargetParams gaussian;
  FocalLossParams focal;
  MatchCostWeights match;
  double width_loss_weight = kWidthLossWeight;

  // "synth"
  SynthSpec synth;

  std::size_t jobs = 1;

  /// Overlays `doc` onto the current values.
  void merge(const nlohmann::json& doc);
  nlohmann::ordered_json to_json() const;
  void validate() const;

  EvalConfig eval_config(std::vector<std::string> class_list) const;
};

PipelineConfig load_config(const fs::path& path);

/// Applies OVTAD_SEED, when set, to the synth seed and the split seed base.
void apply_seed_environment(PipelineConfig& config);

/// A per-video (or per-label) problem that does not abort the command. Any
/// entry makes the command exit non-zero.
struct ItemError {
  std::string item;
  std::string message;
};

struct CommandResult {
  nlohmann::ordered_json report;
  std::string table;
  std::vector<ItemError> errors;

  int exit_code() const { return errors.empty() ? 0 : 2; }
};

/// Writes report.json and report.txt under `out_dir`.
void write_report(const CommandResult& result, const fs::path& out_dir);

struct FeatureLoad {
  FeatureMap features;
  std::vector<std::string> missing;
  std::vector<ItemError> errors;
};

/// Reads `<dir>/<id>.ovtf` for every id from every dir, ensembling across
/// dirs in the given order. A video absent from any dir is listed as missing.
FeatureLoad load_feature_dirs(const std::vector<fs::path>& dirs,
                              const std::vector<std::string>& video_ids, std::size_t jobs);

/// Applies the split side (when a split is given) and keeps the configured subset.
AnnotatedDataset select_videos(const AnnotatedDataset& dataset, const std::optional<LabelSplit>& split,
                               SplitSide side, std::optional<Subset> subset);

// ---- split ----

struct RandomSplitArgs {
  std::vector<std::string> vocabulary;
  std::vector<std::uint64_t> seeds;
  fs::path out_dir;
};

/// One file per seed, named split_<index>_seed<seed>.json.
CommandResult run_split_random(const RandomSplitArgs& args, const PipelineConfig& config);

struct SmartSplitArgs {
  /// Imported instead of the built-in ActivityNet split when set.
  std::optional<fs::path> split_file;
  std::optional<fs::path> taxonomy;
  fs::path out_dir;
};

/// Writes the split and, given a taxonomy, its validation report. Unsatisfied
/// eval labels are reported as errors.
CommandResult run_split_smart(const SmartSplitArgs& args);

// ---- classify-gt ----

struct ClassifyGtArgs {
  fs::path dataset;
  std::vector<fs::path> feature_dirs;
  fs::path texts;
  std::optional<fs::path> split;
  SplitSide side = SplitSide::eval;
};

CommandResult run_classify_gt(const ClassifyGtArgs& args, const PipelineConfig& config);

// ---- detect ----

enum class HeadKind { centernet, detr };

HeadKind parse_head_kind(std::string_view text);
std::string_view to_string(HeadKind kind);

struct DetectArgs {
  fs::path heads_dir;
  HeadKind kind = HeadKind::centernet;
  /// Supplies the video list and durations; required for DETR heads.
  std::optional<fs::path> dataset;
  std::optional<fs::path> split;
  SplitSide side = SplitSide::eval;
};

struct DetectOutput {
  DetectionsByVideo detections;
  CommandResult result;
};

DetectOutput run_detect(const DetectArgs& args, const PipelineConfig& config);

// ---- eval ----

struct EvalArgs {
  fs::path dataset;
  fs::path predictions;
  std::optional<fs::path> split;
  SplitSide side = SplitSide::eval;
  bool class_agnostic = false;
};

CommandResult run_eval(const EvalArgs& args, const PipelineConfig& config);

/// Evaluates every {"split", "predictions"} entry of a manifest (paths
/// relative to the manifest) and adds mean and standard error across splits.
struct MultiSplitArgs {
  fs::path dataset;
  fs::path manifest;
  SplitSide side = SplitSide::eval;
  bool class_agnostic = false;
};

CommandResult run_eval_multi(const MultiSplitArgs& args, const PipelineConfig& config);

// ---- e2e ----

struct E2eArgs {
  fs::path dataset;
  std::optional<fs::path> split;
  SplitSide side = SplitSide::eval;
  fs::path texts;
  /// Exactly one detection source: a segments file or a heads dir.
  std::optional<fs::path> detections;
  std::optional<fs::path> heads_dir;
  HeadKind head_kind = HeadKind::centernet;
  std::vector<fs::path> classifier_feature_dirs;
  /// Features the detector was run on. Checked and recorded, not used for scoring.
  std::vector<fs::path> detector_feature_dirs;
};

struct E2eOutput {
  DetectionsByVideo labeled;
  CommandResult result;
};

E2eOutput run_e2e(const E2eArgs& args, const PipelineConfig& config);

// ---- synth ----

CommandResult run_synth(const SynthSpec& spec, const fs::path& out_dir);

}  // namespace ovtad::pipeline
