// Acceptance run: one PASS/FAIL line per release criterion. Exit status is
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

#include "oracles.hpp"
#include "ovtad/detdecode.hpp"
#include "ovtad/featurestore.hpp"
#include "ovtad/io.hpp"
#include "ovtad/metrics.hpp"
#include "ovtad/ovclassify.hpp"
#include "ovtad/pipeline.hpp"
#include "ovtad/rng.hpp"
#include "ovtad/splits.hpp"
#include "ovtad/synth.hpp"
#include "ovtad/trainmath.hpp"
#include "support.hpp"

using namespace ovtad;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s [%02d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// ---- 1 ----

Outcome hungarian_vs_exhaustive() {
  SplitMix64 rng(1);
  const int trials = 1000;
  int mismatches = 0;
  double solver_time = 0.0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t n = 1 + rng.bounded(7);
    const std::size_t m = 1 + rng.bounded(7);
    std::vector<double> costs(n * m);
    const bool integral = trial % 2 == 0;
    for (auto& x : costs) x = integral ? static_cast<double>(rng.bounded(6)) : rng.uniform(0.0, 10.0);
    const auto matrix = CostMatrix::make(n, m, costs);
    const auto s = Clock::now();
    const auto got = hungarian(matrix);
    solver_time += seconds_since(s);
    const auto want = oracle::brute_force_assignment(matrix);
    if (got.total_cost != want.total || got.pairs.size() != std::min(n, m)) ++mismatches;
  }
  const double total = seconds_since(t0);
  return {mismatches == 0 && total < 5.0,
          fmt("%d matrices, %d mismatches, solver %.3f s, with oracle %.3f s (limit 5 s)", trials, mismatches,
              solver_time, total)};
}

// ---- 2 ----

Outcome ap_vs_reference() {
  SplitMix64 rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = oracle::random_micro_instance(rng);
    const auto rep = map_avg(inst.predictions, inst.dataset,
                             make_eval_config(EvalPreset::activitynet, inst.classes));
    for (std::size_t t = 0; t < rep.thresholds.size(); ++t) {
      const auto ref = oracle::reference_map(inst, rep.thresholds[t]);
      if (ref.per_class.size() != rep.per_class_ap.size()) return {false, "class sets differ"};
      for (const auto& [cls, ap] : ref.per_class) worst = std::max(worst, std::abs(rep.per_class_ap.at(cls)[t] - ap));
      worst = std::max(worst, std::abs(rep.map[t] - ref.map));
    }
  }
  const GroundTruthByVideo gt{{"v", {Segment{0, 10}, Segment{20, 30}}}};
  const std::vector<ScoredSegment> preds{{"v", {0, 10}, 0.9}, {"v", {50, 60}, 0.8}, {"v", {20, 30}, 0.7}};
  const double hand = *average_precision(preds, gt, 0.5);
  const bool ok = worst <= 1e-12 && std::abs(hand - 0.8333) <= 1e-4 && std::abs(hand - 5.0 / 6.0) <= 1e-9;
  return {ok, fmt("200 instances, max |AP - ref| = %.3g (tol 1e-12); TP,FP,TP AP = %.10f", worst, hand)};
}

// ---- 3 ----

Outcome threshold_grids() {
  const auto a = preset_thresholds(EvalPreset::activitynet);
  const auto t = preset_thresholds(EvalPreset::thumos);
  bool ok = a.size() == 10 && t.size() == 5;
  for (std::size_t i = 0; ok && i < a.size(); ++i) ok = std::abs(a[i] - (0.50 + 0.05 * static_cast<double>(i))) < 1e-12;
  for (std::size_t i = 0; ok && i < t.size(); ++i) ok = std::abs(t[i] - (0.3 + 0.1 * static_cast<double>(i))) < 1e-12;
  return {ok, fmt("ActivityNet %zu values %.2f..%.2f, Thumos %zu values %.1f..%.1f", a.size(), a.front(), a.back(),
                  t.size(), t.front(), t.back())};
}

// ---- 4 and 5 ----

SynthSpec run_spec(double sigma, double jitter) {
  SynthSpec spec;
  spec.seed = 2024;
  spec.n_videos = 50;
  spec.n_classes = 10;
  spec.dim = 32;
  spec.feature_sigma = sigma;
  spec.boundary_jitter = jitter;
  return spec;
}

Outcome clean_synthetic_run() {
  testing::TempDir dir;
  const auto t0 = Clock::now();
  pipeline::PipelineConfig config;
  config.jobs = 4;
  pipeline::run_synth(run_spec(0.0, 0.0), dir.path());
  const auto gt = pipeline::run_classify_gt(
      {dir / "dataset.json", {dir / "features"}, dir / "texts.json", std::nullopt}, config);
  pipeline::E2eArgs args;
  args.dataset = dir / "dataset.json";
  args.texts = dir / "texts.json";
  args.heads_dir = dir / "heads";
  args.classifier_feature_dirs = {dir / "features"};
  const auto e2e = pipeline::run_e2e(args, config);
  const double elapsed = seconds_since(t0);
  const double top1 = gt.report["accuracy"]["top1"].get<double>();
  const double map = e2e.result.report["metrics"]["map_avg"].get<double>();
  const double ar10 = e2e.result.report["metrics"]["average_recall"]["10"].get<double>();
  const bool ok = top1 == 1.0 && std::abs(map - 1.0) <= 1e-9 && std::abs(ar10 - 1.0) <= 1e-9 && elapsed < 10.0 &&
                  gt.exit_code() == 0 && e2e.result.exit_code() == 0;
  return {ok, fmt("Top-1 %.2f%%, mAP@avg %.4f, AR@10 %.4f, %.2f s (limit 10 s)", 100.0 * top1, map, ar10, elapsed)};
}

// Pooled mean over rows floor(s) .. ceil(e) at 1 fps, then cosine argmax
// with the first maximum winning.
std::size_t oracle_label(const FeatureSequence& seq, const Segment& s, const TextEmbeddingSet& texts) {
  const auto first = static_cast<std::size_t>(std::floor(s.start));
  const auto last = std::min(seq.frames(), static_cast<std::size_t>(std::ceil(s.end)));
  std::vector<double> mean(seq.dim, 0.0);
  for (std::size_t t = first; t < last; ++t) {
    for (std::size_t d = 0; d < seq.dim; ++d) mean[d] += seq.row(t)[d];
  }
  std::size_t best = 0;
  double best_cos = -2.0;
  for (std::size_t c = 0; c < texts.size(); ++c) {
    double dot = 0.0, nm = 0.0, nt = 0.0;
    for (std::size_t d = 0; d < seq.dim; ++d) {
      dot += mean[d] * texts.row(c)[d];
      nm += mean[d] * mean[d];
      nt += texts.row(c)[d] * texts.row(c)[d];
    }
    const double cos = dot / std::sqrt(nm * nt);
    if (cos > best_cos) {
      best_cos = cos;
      best = c;
    }
  }
  return best;
}

Outcome noisy_synthetic_run() {
  testing::TempDir dir;
  pipeline::PipelineConfig config;
  config.jobs = 4;
  pipeline::run_synth(run_spec(0.05, 0.5), dir.path());
  const auto gt = pipeline::run_classify_gt(
      {dir / "dataset.json", {dir / "features"}, dir / "texts.json", std::nullopt}, config);

  const auto dataset = load_dataset(dir / "dataset.json");
  const auto texts = load_text_embeddings(dir / "texts.json");
  std::size_t correct = 0, total = 0;
  for (const auto& [id, video] : dataset.videos) {
    const auto seq = read_features(dir / "features" / (id + ".ovtf"));
    for (const auto& a : video.annotations) {
      correct += texts.labels()[oracle_label(seq, a.segment, texts)] == a.label;
      ++total;
    }
  }
  const double oracle_top1 = static_cast<double>(correct) / static_cast<double>(total);
  const double top1 = gt.report["accuracy"]["top1"].get<double>();

  pipeline::E2eArgs args;
  args.dataset = dir / "dataset.json";
  args.texts = dir / "texts.json";
  args.detections = dir / "oracle_detections.jsonl";
  args.classifier_feature_dirs = {dir / "features"};
  const auto e2e = pipeline::run_e2e(args, config);
  const double m50 = e2e.result.report["metrics"]["map"]["0.50"].get<double>();
  const double m95 = e2e.result.report["metrics"]["map"]["0.95"].get<double>();
  return {top1 == oracle_top1 && m50 >= m95,
          fmt("Top-1 %.4f vs oracle %.4f (%zu/%zu); mAP@0.5 %.4f >= mAP@0.95 %.4f", top1, oracle_top1, correct,
              total, m50, m95)};
}

// ---- 6 ----

Outcome render_decode_round_trip() {
  SplitMix64 rng(6);
  double worst_sep = 0.0, worst_crowded = 0.0;
  std::size_t missing = 0, segments = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto layout = oracle::random_layout(rng, true);
    const auto t = render_targets(layout.gt, layout.cells, layout.stride);
    CenterNetDecodeOptions opt;
    opt.top_k = layout.gt.size();
    const auto dets = decode_centernet(t.output, opt);
    segments += layout.gt.size();
    for (const auto& g : layout.gt) {
      double best = 1e300;
      for (const auto& d : dets) {
        best = std::min(best, std::max(std::abs(d.segment.start - g.start), std::abs(d.segment.end - g.end)));
      }
      if (best > 1e-9) ++missing;
      worst_sep = std::max(worst_sep, best);
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    const auto layout = oracle::random_layout(rng, false);
    const auto t = render_targets(layout.gt, layout.cells, layout.stride);
    for (const auto& d : decode_centernet(t.output)) {
      double best = 1e300;
      for (const auto& g : layout.gt) {
        best = std::min(best, std::max(std::abs(d.segment.start - g.start), std::abs(d.segment.end - g.end)));
      }
      worst_crowded = std::max(worst_crowded, best);
    }
  }
  return {missing == 0 && worst_crowded < 0.5,
          fmt("separated: %zu segments, %zu not recovered, max error %.2g s (tol 1e-9); crowded: max error %.2g s "
              "(limit 0.5 s)",
              segments, missing, worst_sep, worst_crowded)};
}

// ---- 7 ----

Outcome nms_properties() {
  SplitMix64 rng(7);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<SegmentDetection> dets(rng.bounded(40));
    for (auto& d : dets) {
      const double s = rng.uniform(0.0, 90.0);
      d.segment = Segment{s, s + rng.uniform(0.5, 20.0)};
      d.score = static_cast<double>(rng.bounded(10)) / 10.0;
    }
    const double thr = 0.2 + 0.1 * static_cast<double>(rng.bounded(7));
    const auto kept = nms(dets, thr);
    for (const auto& k : kept) {
      if (std::count(kept.begin(), kept.end(), k) > std::count(dets.begin(), dets.end(), k)) ++violations;
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        if (temporal_iou(kept[i].segment, kept[j].segment) >= thr) ++violations;
      }
    }
    if (nms(kept, thr) != kept) ++violations;
  }
  return {violations == 0, fmt("1000 sets, %zu violations of subset / IoU bound / idempotence", violations)};
}

// ---- 8 ----

Outcome split_properties() {
  const LabelSplit smart = import_split(fs::path(OVTAD_DATA_DIR) / "activitynet_smart_split.json");
  std::vector<std::string> overlap;
  std::set_intersection(smart.train_labels.begin(), smart.train_labels.end(), smart.eval_labels.begin(),
                        smart.eval_labels.end(), std::back_inserter(overlap));
  bool ok = smart.eval_labels.size() == 50 && smart.train_labels.size() == 150 && overlap.empty() &&
            smart.vocabulary() == activitynet_vocabulary();

  const auto& vocab = activitynet_vocabulary();
  std::size_t bad_random = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = generate_random_split(vocab, 0.25, seed);
    const auto b = generate_random_split(vocab, 0.25, seed);
    if (!(a == b) || a.vocabulary() != vocab || a.eval_labels.size() != 50) ++bad_random;
  }

  SynthSpec spec;
  spec.seed = 8;
  spec.n_videos = 60;
  spec.n_classes = 12;
  const auto data = generate(spec);
  std::size_t bad_apply = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto split = generate_random_split(data.dataset.vocabulary, 0.25, seed);
    std::map<std::tuple<std::string, double, double, std::string>, int> seen;
    for (const auto& [id, v] : data.dataset.videos) {
      for (const auto& a : v.annotations) seen[{id, a.segment.start, a.segment.end, a.label}] += 0;
    }
    for (auto side : {SplitSide::train, SplitSide::eval}) {
      for (const auto& [id, v] : apply_split(data.dataset, split, side).videos) {
        for (const auto& a : v.annotations) {
          auto it = seen.find({id, a.segment.start, a.segment.end, a.label});
          if (it == seen.end()) {
            ++bad_apply;
          } else {
            ++it->second;
          }
        }
      }
    }
    for (const auto& [key, count] : seen) bad_apply += count != 1;
  }
  ok = ok && bad_random == 0 && bad_apply == 0;
  return {ok, fmt("smart %zu eval / %zu train, overlap %zu; random seeds bad %zu/50; apply_split misplaced %zu",
                  smart.eval_labels.size(), smart.train_labels.size(), overlap.size(), bad_random, bad_apply)};
}

// ---- 9 ----

Outcome file_round_trips() {
  testing::TempDir dir;
  SplitMix64 rng(9);
  std::size_t differing = 0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t dim = 1 + rng.bounded(64), frames = 1 + rng.bounded(200);
    std::vector<float> data(dim * frames);
    for (auto& x : data) x = static_cast<float>(rng.normal() * 100.0);
    const auto seq = FeatureSequence::make("video_" + std::to_string(i), 1.0f, dim, std::move(data));
    write_features(seq, dir / "a.ovtf");
    write_features(read_features(dir / "a.ovtf"), dir / "b.ovtf");
    differing += io::read_file(dir / "a.ovtf") != io::read_file(dir / "b.ovtf");

    const auto split = generate_random_split(activitynet_vocabulary(), 0.25, rng.next());
    export_split(split, dir / "a.json");
    export_split(import_split(dir / "a.json"), dir / "b.json");
    differing += io::read_file(dir / "a.json") != io::read_file(dir / "b.json");
  }
  const fs::path shipped = fs::path(OVTAD_DATA_DIR) / "activitynet_smart_split.json";
  export_split(import_split(shipped), dir / "smart.json");
  differing += io::read_file(shipped) != io::read_file(dir / "smart.json");
  return {differing == 0, fmt("41 files rewritten, %zu differ", differing)};
}

// ---- 10 ----

Outcome classification_invariance() {
  SplitMix64 rng(10);
  std::size_t bad = 0;
  double worst_sum = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + rng.bounded(20), dim = 2 + rng.bounded(40);
    std::vector<std::string> labels;
    std::vector<double> rows(n * dim);
    for (std::size_t i = 0; i < n; ++i) labels.push_back("l" + std::to_string(i));
    for (auto& x : rows) x = rng.normal();
    const auto texts = TextEmbeddingSet::make(labels, dim, rows);
    std::vector<double> pooled(dim);
    for (auto& x : pooled) x = rng.normal();
    const auto scores = classify(pooled, texts);
    const std::size_t top = scores.top();
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(scores.probabilities.begin(),
                                                             scores.probabilities.end(), 0.0) - 1.0));
    auto argmax = [](const std::vector<double>& v) {
      return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    };
    auto shifted = scores.logits;
    const double c = rng.uniform(-100.0, 100.0);
    for (auto& l : shifted) l += c;
    if (argmax(softmax(shifted)) != top) ++bad;
    auto scaled_logits = scores.logits;
    const double k = std::exp(rng.uniform(-3.0, 3.0));
    for (auto& l : scaled_logits) l *= k;
    if (argmax(scaled_logits) != top) ++bad;
    auto scaled = pooled;
    for (auto& x : scaled) x *= k;
    if (classify(scaled, texts).top() != top) ++bad;
  }
  return {bad == 0 && worst_sum <= 1e-9,
          fmt("10000 cases, %zu argmax changes, max |sum p - 1| = %.2g (tol 1e-9)", bad, worst_sum)};
}

}  // namespace

int main() {
  report(1, "Hungarian matches exhaustive search", hungarian_vs_exhaustive);
  report(2, "AP/mAP match the exhaustive reference", ap_vs_reference);
  report(3, "IoU threshold grids", threshold_grids);
  report(4, "clean synthetic run is perfect", clean_synthetic_run);
  report(5, "noisy synthetic run matches the classifier oracle", noisy_synthetic_run);
  report(6, "render/decode round trip", render_decode_round_trip);
  report(7, "NMS subset, IoU bound and idempotence", nms_properties);
  report(8, "split files and split application", split_properties);
  report(9, "feature and split files rewrite byte-identically", file_round_trips);
  report(10, "classification invariances", classification_invariance);
  std::printf("%s: %d of 10 criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
