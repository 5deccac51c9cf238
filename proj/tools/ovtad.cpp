// ovtad command-line front end.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ovtad/error.hpp"
#include "ovtad/io.hpp"
#include "ovtad/pipeline.hpp"
#include "ovtad/segments_file.hpp"

namespace fs = std::filesystem;
using namespace ovtad;
using namespace ovtad::pipeline;

namespace {

struct GlobalFlags {
  std::optional<fs::path> config;
  std::optional<std::size_t> jobs;
  std::optional<std::string> preset;
  std::optional<std::string> subset;
  bool timestamp = false;
};

struct SplitSideFlags {
  std::optional<fs::path> split;
  std::string side = "eval";
};

void add_split_flags(CLI::App* cmd, SplitSideFlags& f) {
  cmd->add_option("--split", f.split, "Label split file")->check(CLI::ExistingFile);
  cmd->add_option("--side", f.side, "Split side to keep")->check(CLI::IsMember({"train", "eval"}));
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int finish(CommandResult result, const std::optional<fs::path>& out, bool timestamp) {
  if (timestamp) result.report["metadata"] = {{"generated_at", utc_now()}};
  if (out) write_report(result, *out);
  std::cout << result.table;
  if (!result.errors.empty()) {
    std::cerr << "ovtad: " << result.errors.size() << " item error(s)\n";
    for (const auto& e : result.errors) std::cerr << "  " << e.item << ": " << e.message << "\n";
  }
  return result.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-vocabulary temporal action detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags global;
  app.add_option("--config", global.config, "JSON config pinning toolkit constants")->check(CLI::ExistingFile);
  app.add_option("--jobs", global.jobs, "Worker threads for per-video work")->check(CLI::PositiveNumber);
  app.add_option("--preset", global.preset, "Evaluation threshold preset")
      ->check(CLI::IsMember({"activitynet", "thumos"}));
  app.add_option("--subset", global.subset, "Dataset subset to evaluate (training, validation, testing, all)")
      ->check(CLI::IsMember({"training", "validation", "testing", "all"}));
  app.add_flag("--timestamp", global.timestamp, "Add a generation-time metadata block to reports");

  // split
  auto* split_cmd = app.add_subcommand("split", "Generate or export label splits");
  split_cmd->require_subcommand(1);
  auto* random_cmd = split_cmd->add_subcommand("random", "Random held-out label splits, one file per seed");
  std::optional<fs::path> random_vocab, random_dataset;
  std::optional<double> fraction;
  std::vector<std::uint64_t> seeds;
  fs::path random_out;
  random_cmd->add_option("--vocab", random_vocab, "Label list (JSON array or one per line)")
      ->check(CLI::ExistingFile);
  random_cmd->add_option("--dataset", random_dataset, "Take the vocabulary from a dataset file")
      ->check(CLI::ExistingFile);
  random_cmd->add_option("--fraction", fraction, "Held-out label fraction");
  random_cmd->add_option("--seeds", seeds, "Seed list")->delimiter(',');
  random_cmd->add_option("--out", random_out, "Output directory")->required();

  auto* smart_cmd = split_cmd->add_subcommand("smart", "Export (and optionally validate) a taxonomy-pair split");
  SmartSplitArgs smart_args;
  smart_cmd->add_option("--from", smart_args.split_file, "Split file to use instead of the built-in one")
      ->check(CLI::ExistingFile);
  smart_cmd->add_option("--taxonomy", smart_args.taxonomy, "Taxonomy to validate against")
      ->check(CLI::ExistingFile);
  smart_cmd->add_option("--out", smart_args.out_dir, "Output directory")->required();

  // classify-gt
  auto* gt_cmd = app.add_subcommand("classify-gt", "Top-k classification of ground-truth segments");
  ClassifyGtArgs gt_args;
  SplitSideFlags gt_split;
  std::optional<fs::path> gt_out;
  std::optional<double> temperature;
  std::vector<std::size_t> topk;
  gt_cmd->add_option("--dataset", gt_args.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  gt_cmd->add_option("--features", gt_args.feature_dirs, "Feature directories (several are ensembled)")
      ->required();
  gt_cmd->add_option("--texts", gt_args.texts, "Text embedding file")->required()->check(CLI::ExistingFile);
  gt_cmd->add_option("--temperature", temperature, "Softmax temperature");
  gt_cmd->add_option("--topk", topk, "k values")->delimiter(',');
  gt_cmd->add_option("--out", gt_out, "Report directory");
  add_split_flags(gt_cmd, gt_split);

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "Decode detector head outputs into segments");
  DetectArgs detect_args;
  SplitSideFlags detect_split;
  std::string head_kind = "centernet";
  fs::path detect_out;
  std::optional<std::size_t> top_k;
  std::optional<double> nms_iou, score_threshold;
  bool no_nms = false;
  detect_cmd->add_option("--heads", detect_args.heads_dir, "Directory of head outputs")->required();
  detect_cmd->add_option("--kind", head_kind, "Head type")->check(CLI::IsMember({"centernet", "detr"}));
  detect_cmd->add_option("--dataset", detect_args.dataset, "Dataset for video list and durations")
      ->check(CLI::ExistingFile);
  detect_cmd->add_option("--top-k", top_k, "CenterNet peaks kept per video");
  detect_cmd->add_option("--nms-iou", nms_iou, "NMS IoU threshold");
  detect_cmd->add_flag("--no-nms", no_nms, "Skip NMS");
  detect_cmd->add_option("--score-threshold", score_threshold, "DETR proposal score threshold");
  detect_cmd->add_option("--out", detect_out, "Output directory")->required();
  add_split_flags(detect_cmd, detect_split);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "mAP and AR@N of a segments file");
  fs::path eval_dataset;
  std::optional<fs::path> predictions, manifest, eval_out;
  SplitSideFlags eval_split;
  bool class_agnostic = false;
  std::vector<double> thresholds;
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  auto* pred_opt = eval_cmd->add_option("--predictions", predictions, "Segments file")->check(CLI::ExistingFile);
  auto* multi_opt = eval_cmd->add_option("--multi-split", manifest, "Manifest of {split, predictions} pairs")
                        ->check(CLI::ExistingFile);
  pred_opt->excludes(multi_opt);
  eval_cmd->add_option("--thresholds", thresholds, "Explicit IoU thresholds")->delimiter(',');
  eval_cmd->add_flag("--class-agnostic", class_agnostic, "Ignore labels");
  eval_cmd->add_option("--out", eval_out, "Report directory");
  add_split_flags(eval_cmd, eval_split);

  // e2e
  auto* e2e_cmd = app.add_subcommand("e2e", "Detect, classify and evaluate");
  E2eArgs e2e_args;
  SplitSideFlags e2e_split;
  std::string e2e_kind = "centernet";
  fs::path e2e_out;
  std::optional<std::string> composition;
  bool fanout = false;
  e2e_cmd->add_option("--dataset", e2e_args.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  e2e_cmd->add_option("--texts", e2e_args.texts, "Text embedding file")->required()->check(CLI::ExistingFile);
  auto* det_opt = e2e_cmd->add_option("--detections", e2e_args.detections, "Class-agnostic segments file")
                      ->check(CLI::ExistingFile);
  auto* heads_opt = e2e_cmd->add_option("--heads", e2e_args.heads_dir, "Directory of head outputs");
  det_opt->excludes(heads_opt);
  e2e_cmd->add_option("--kind", e2e_kind, "Head type")->check(CLI::IsMember({"centernet", "detr"}));
  e2e_cmd->add_option("--features", e2e_args.classifier_feature_dirs, "Classifier feature directories")
      ->required();
  e2e_cmd->add_option("--detector-features", e2e_args.detector_feature_dirs,
                      "Feature directories the detector ran on");
  e2e_cmd->add_option("--composition", composition, "Detection score rule")
      ->check(CLI::IsMember({"product", "class"}));
  e2e_cmd->add_flag("--fanout", fanout, "Emit one detection per label");
  e2e_cmd->add_option("--temperature", temperature, "Softmax temperature");
  e2e_cmd->add_option("--top-k", top_k, "CenterNet peaks kept per video");
  e2e_cmd->add_option("--nms-iou", nms_iou, "NMS IoU threshold");
  e2e_cmd->add_option("--out", e2e_out, "Output directory")->required();
  add_split_flags(e2e_cmd, e2e_split);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus");
  fs::path synth_out;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> n_videos, n_classes, dim;
  std::optional<double> sigma, jitter, score_noise, distractors;
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--videos", n_videos, "Video count");
  synth_cmd->add_option("--classes", n_classes, "Class count");
  synth_cmd->add_option("--dim", dim, "Embedding dimension");
  synth_cmd->add_option("--sigma", sigma, "In-segment feature noise");
  synth_cmd->add_option("--jitter", jitter, "Oracle boundary noise (seconds)");
  synth_cmd->add_option("--score-noise", score_noise, "Oracle score noise");
  synth_cmd->add_option("--distractors", distractors, "Fraction of unannotated planted segments");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig config = global.config ? load_config(*global.config) : PipelineConfig{};
    apply_seed_environment(config);
    if (global.jobs) config.jobs = *global.jobs;
    if (global.preset) config.preset = parse_eval_preset(*global.preset);
    if (global.subset) {
      config.eval_subset = *global.subset == "all" ? std::nullopt : std::optional(parse_subset(*global.subset));
    }
    if (fraction) config.eval_fraction = *fraction;
    if (temperature) config.temperature = *temperature;
    if (!topk.empty()) config.topk = topk;
    if (top_k) config.centernet_top_k = *top_k;
    if (nms_iou) config.nms_iou = *nms_iou;
    if (no_nms) config.apply_nms = false;
    if (score_threshold) config.detr_score_threshold = *score_threshold;
    if (!thresholds.empty()) config.iou_thresholds = thresholds;
    if (composition) config.composition = parse_score_composition(*composition);
    if (fanout) config.fanout = true;
    if (synth_seed) config.synth.seed = *synth_seed;
    if (n_videos) config.synth.n_videos = *n_videos;
    if (n_classes) config.synth.n_classes = *n_classes;
    if (dim) config.synth.dim = *dim;
    if (sigma) config.synth.feature_sigma = *sigma;
    if (jitter) config.synth.boundary_jitter = *jitter;
    if (score_noise) config.synth.score_noise = *score_noise;
    if (distractors) config.synth.distractor_rate = *distractors;
    config.validate();

    if (*random_cmd) {
      RandomSplitArgs args;
      if (random_vocab && random_dataset) throw ArgumentError("use either --vocab or --dataset");
      if (random_vocab) {
        args.vocabulary = load_vocabulary(*random_vocab);
      } else if (random_dataset) {
        args.vocabulary = load_dataset(*random_dataset).vocabulary;
      } else {
        args.vocabulary = activitynet_vocabulary();
      }
      args.seeds = seeds;
      if (args.seeds.empty()) {
        for (std::size_t i = 0; i < config.seed_count; ++i) args.seeds.push_back(config.seed_base + i);
      }
      args.out_dir = random_out;
      return finish(run_split_random(args, config), random_out, global.timestamp);
    }
    if (*smart_cmd) {
      return finish(run_split_smart(smart_args), smart_args.out_dir, global.timestamp);
    }
    if (*gt_cmd) {
      gt_args.split = gt_split.split;
      gt_args.side = parse_split_side(gt_split.side);
      return finish(run_classify_gt(gt_args, config), gt_out, global.timestamp);
    }
    if (*detect_cmd) {
      detect_args.kind = parse_head_kind(head_kind);
      detect_args.split = detect_split.split;
      detect_args.side = parse_split_side(detect_split.side);
      DetectOutput out = run_detect(detect_args, config);
      write_segments_file(out.detections, detect_out / "detections.jsonl");
      return finish(std::move(out.result), detect_out, global.timestamp);
    }
    if (*eval_cmd) {
      if (manifest) {
        if (eval_split.split) throw ArgumentError("--split conflicts with --multi-split");
        MultiSplitArgs args{eval_dataset, *manifest, parse_split_side(eval_split.side), class_agnostic};
        return finish(run_eval_multi(args, config), eval_out, global.timestamp);
      }
      if (!predictions) throw ArgumentError("eval needs --predictions or --multi-split");
      EvalArgs args{eval_dataset, *predictions, eval_split.split, parse_split_side(eval_split.side),
                    class_agnostic};
      return finish(run_eval(args, config), eval_out, global.timestamp);
    }
    if (*e2e_cmd) {
      e2e_args.split = e2e_split.split;
      e2e_args.side = parse_split_side(e2e_split.side);
      e2e_args.head_kind = parse_head_kind(e2e_kind);
      E2eOutput out = run_e2e(e2e_args, config);
      write_segments_file(out.labeled, e2e_out / "labeled_detections.jsonl");
      return finish(std::move(out.result), e2e_out, global.timestamp);
    }
    if (*synth_cmd) {
      return finish(run_synth(config.synth, synth_out), synth_out, global.timestamp);
    }
  } catch (const ovtad::Error& e) {
    std::cerr << "ovtad: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ovtad: internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
