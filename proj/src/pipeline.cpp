#include "ovtad/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "ovtad/error.hpp"
#include "ovtad/featurestore.hpp"
#include "ovtad/io.hpp"
#include "ovtad/parallel.hpp"
#include "ovtad/segments_file.hpp"

namespace ovtad::pipeline {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Reads the keys of one config section and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw ParseError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    if (const json* v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception& e) {
        throw ParseError("config: " + name_ + "." + key + ": " + e.what());
      }
    }
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  std::string string_at(const json& v, const char* key) const {
    if (!v.is_string()) throw ParseError("config: " + name_ + "." + key + " must be a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw ParseError("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json& doc_;
  std::string name_;
  std::set<std::string> seen_;
};

std::optional<Subset> parse_subset_choice(std::string_view text) {
  if (text == "all") return std::nullopt;
  return parse_subset(text);
}

std::string subset_choice_name(const std::optional<Subset>& s) {
  return s ? std::string(to_string(*s)) : "all";
}

std::string threshold_key(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

ojson errors_json(const std::vector<ItemError>& errors) {
  ojson out = ojson::array();
  for (const auto& e : errors) out.push_back({{"item", e.item}, {"message", e.message}});
  return out;
}

ojson split_json(const std::optional<LabelSplit>& split) {
  return split ? ojson(split->name) : ojson(nullptr);
}

AnnotatedDataset load_dataset_for(const fs::path& path, const PipelineConfig& config, Warnings& warnings) {
  DatasetLoadOptions options;
  options.overshoot_tolerance = config.overshoot_tolerance;
  return load_dataset(path, DatasetFormat::activitynet_json, options, &warnings);
}

std::optional<LabelSplit> load_optional_split(const std::optional<fs::path>& path) {
  if (!path) return std::nullopt;
  return import_split(*path);
}

std::vector<std::string> video_ids(const AnnotatedDataset& dataset) {
  std::vector<std::string> ids;
  for (const auto& [id, v] : dataset.videos) ids.push_back(id);
  return ids;
}

// Drops predictions for videos outside the evaluated set.
DetectionsByVideo restrict_to(const DetectionsByVideo& predictions, const AnnotatedDataset& dataset,
                              std::size_t& ignored) {
  DetectionsByVideo out;
  ignored = 0;
  for (const auto& [id, dets] : predictions) {
    if (dataset.videos.count(id)) {
      out[id] = dets;
    } else {
      ignored += dets.size();
    }
  }
  return out;
}

DetectionReport evaluate(const DetectionsByVideo& predictions, const AnnotatedDataset& selected,
                         bool class_agnostic, const PipelineConfig& config) {
  if (class_agnostic) {
    return evaluate_detections(strip_labels(predictions), strip_labels(selected),
                               config.eval_config({kAgnosticLabel}));
  }
  return evaluate_detections(predictions, selected, config.eval_config(selected.vocabulary));
}

struct HeadDecode {
  DetectionsByVideo detections;
  std::size_t decoded = 0;
  std::vector<ItemError> errors;
};

// Decodes `<dir>/<id>.ovth` or `<dir>/<id>.json` for each video, then NMS.
HeadDecode decode_heads(const std::vector<std::pair<std::string, std::optional<double>>>& videos,
                        const fs::path& dir, HeadKind kind, const PipelineConfig& config) {
  struct Slot {
    std::vector<SegmentDetection> dets;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(videos.size());
  parallel_for(videos.size(), config.jobs, [&](std::size_t i) {
    const auto& [id, duration] = videos[i];
    const fs::path path = dir / (id + (kind == HeadKind::centernet ? ".ovth" : ".json"));
    if (!fs::exists(path)) {
      slots[i].error = "no head output at " + path.string();
      return;
    }
    try {
      std::vector<SegmentDetection> dets;
      if (kind == HeadKind::centernet) {
        const CenterNetOutput head = read_centernet(path);
        if (head.video_id != id) {
          throw ParseError(path.string() + ": holds video '" + head.video_id + "'");
        }
        CenterNetDecodeOptions options;
        options.top_k = config.centernet_top_k;
        options.peak_window = config.peak_window;
        options.duration = duration;
        dets = decode_centernet(head, options);
      } else {
        if (!duration) throw ArgumentError("DETR decoding needs the video duration");
        dets = decode_detr(read_detr(path, id), *duration, config.detr_score_threshold);
      }
      if (config.apply_nms) dets = nms(dets, config.nms_iou);
      slots[i].dets = std::move(dets);
    } catch (const Error& e) {
      slots[i].error = e.what();
    }
  });
  HeadDecode out;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (slots[i].error) {
      out.errors.push_back({videos[i].first, *slots[i].error});
      continue;
    }
    ++out.decoded;
    out.detections[videos[i].first] = std::move(slots[i].dets);
  }
  return out;
}

std::size_t detection_count(const DetectionsByVideo& dets) {
  std::size_t n = 0;
  for (const auto& [id, d] : dets) n += d.size();
  return n;
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.generic_string());
  return out;
}

ojson topk_json(const TopKReport& r) {
  ojson acc = ojson::object();
  for (std::size_t i = 0; i < r.ks.size(); ++i) acc["top" + std::to_string(r.ks[i])] = r.accuracy(i);
  return acc;
}

std::string topk_table(const TopKReport& r) {
  std::string header, values;
  char buf[64];
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%10s", ("Top-" + std::to_string(r.ks[i])).c_str());
    header += buf;
    std::snprintf(buf, sizeof(buf), "%10.2f", 100.0 * r.accuracy(i));
    values += buf;
  }
  std::snprintf(buf, sizeof(buf), "%10s", "coverage");
  header += buf;
  std::snprintf(buf, sizeof(buf), "%10.2f", 100.0 * r.coverage());
  values += buf;
  return header + "\n" + values + "\n";
}

}  // namespace

// ---- config ----

void PipelineConfig::merge(const json& doc) {
  Section root(doc, "config");
  if (const json* d = root.find("dataset")) {
    Section s(*d, "dataset");
    s.read("overshoot_tolerance", overshoot_tolerance);
    if (const json* v = s.find("eval_subset")) eval_subset = parse_subset_choice(s.string_at(*v, "eval_subset"));
    s.finish();
  }
  if (const json* d = root.find("splits")) {
    Section s(*d, "splits");
    s.read("eval_fraction", eval_fraction);
    s.read("seed", seed_base);
    s.read("seed_count", seed_count);
    s.finish();
  }
  if (const json* d = root.find("classify")) {
    Section s(*d, "classify");
    s.read("temperature", temperature);
    if (const json* v = s.find("composition")) composition = parse_score_composition(s.string_at(*v, "composition"));
    s.read("fanout", fanout);
    s.read("topk", topk);
    s.finish();
  }
  if (const json* d = root.find("decode")) {
    Section s(*d, "decode");
    s.read("centernet_top_k", centernet_top_k);
    s.read("peak_window", peak_window);
    s.read("detr_score_threshold", detr_score_threshold);
    s.read("nms", apply_nms);
    s.read("nms_iou", nms_iou);
    s.finish();
  }
  if (const json* d = root.find("eval")) {
    Section s(*d, "eval");
    if (const json* v = s.find("preset")) preset = parse_eval_preset(s.string_at(*v, "preset"));
    if (const json* v = s.find("iou_thresholds")) {
      if (v->is_null()) {
        iou_thresholds.reset();
      } else {
        s.read("iou_thresholds", iou_thresholds.emplace());
      }
    }
    s.read("recall_ns", recall_ns);
    s.read("recall_iou_grid", recall_iou_grid);
    s.finish();
  }
  if (const json* d = root.find("train")) {
    Section s(*d, "train");
    s.read("gaussian_sigma_divisor", gaussian.sigma_divisor);
    s.read("gaussian_min_sigma", gaussian.min_sigma);
    s.read("focal_alpha", focal.alpha);
    s.read("focal_beta", focal.beta);
    s.read("match_l1_weight", match.l1);
    s.read("match_iou_weight", match.iou);
    s.read("width_loss_weight", width_loss_weight);
    s.finish();
  }
  if (const json* d = root.find("synth")) {
    Section s(*d, "synth");
    s.read("seed", synth.seed);
    s.read("videos", synth.n_videos);
    s.read("classes", synth.n_classes);
    s.read("min_duration", synth.min_duration);
    s.read("max_duration", synth.max_duration);
    s.read("min_segments", synth.min_segments);
    s.read("max_segments", synth.max_segments);
    s.read("min_segment_length", synth.min_segment_length);
    s.read("max_segment_length", synth.max_segment_length);
    s.read("dim", synth.dim);
    s.read("feature_sigma", synth.feature_sigma);
    s.read("boundary_jitter", synth.boundary_jitter);
    s.read("score_noise", synth.score_noise);
    s.read("distractor_rate", synth.distractor_rate);
    if (const json* v = s.find("subset")) synth.subset = parse_subset(s.string_at(*v, "subset"));
    s.finish();
  }
  root.read("jobs", jobs);
  root.finish();
}

ojson PipelineConfig::to_json() const {
  ojson doc;
  doc["dataset"] = {{"overshoot_tolerance", overshoot_tolerance},
                    {"eval_subset", subset_choice_name(eval_subset)}};
  doc["splits"] = {{"eval_fraction", eval_fraction}, {"seed", seed_base}, {"seed_count", seed_count}};
  doc["classify"] = {{"temperature", temperature},
                     {"composition", std::string(ovtad::to_string(composition))},
                     {"fanout", fanout},
                     {"topk", topk}};
  doc["decode"] = {{"centernet_top_k", centernet_top_k},
                   {"peak_window", peak_window},
                   {"detr_score_threshold", detr_score_threshold},
                   {"nms", apply_nms},
                   {"nms_iou", nms_iou}};
  doc["eval"] = {{"preset", std::string(ovtad::to_string(preset))},
                 {"iou_thresholds", iou_thresholds ? ojson(*iou_thresholds) : ojson(nullptr)},
                 {"recall_ns", recall_ns},
                 {"recall_iou_grid", recall_iou_grid}};
  doc["train"] = {{"gaussian_sigma_divisor", gaussian.sigma_divisor},
                  {"gaussian_min_sigma", gaussian.min_sigma},
                  {"focal_alpha", focal.alpha},
                  {"focal_beta", focal.beta},
                  {"match_l1_weight", match.l1},
                  {"match_iou_weight", match.iou},
                  {"width_loss_weight", width_loss_weight}};
  doc["synth"] = {{"seed", synth.seed},
                  {"videos", synth.n_videos},
                  {"classes", synth.n_classes},
                  {"min_duration", synth.min_duration},
                  {"max_duration", synth.max_duration},
                  {"min_segments", synth.min_segments},
                  {"max_segments", synth.max_segments},
                  {"min_segment_length", synth.min_segment_length},
                  {"max_segment_length", synth.max_segment_length},
                  {"dim", synth.dim},
                  {"feature_sigma", synth.feature_sigma},
                  {"boundary_jitter", synth.boundary_jitter},
                  {"score_noise", synth.score_noise},
                  {"distractor_rate", synth.distractor_rate},
                  {"subset", std::string(ovtad::to_string(synth.subset))}};
  doc["jobs"] = jobs;
  return doc;
}

void PipelineConfig::validate() const {
  if (!(overshoot_tolerance >= 0.0)) throw ArgumentError("overshoot tolerance must be >= 0");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ArgumentError("eval fraction must lie in (0, 1)");
  if (seed_count == 0) throw ArgumentError("seed count must be positive");
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be positive");
  if (topk.empty()) throw ArgumentError("at least one top-k value is required");
  for (auto k : topk) {
    if (k == 0) throw ArgumentError("top-k values must be positive");
  }
  if (centernet_top_k == 0) throw ArgumentError("CenterNet top_k must be positive");
  if (peak_window == 0) throw ArgumentError("peak window must be positive");
  if (!(detr_score_threshold >= 0.0 && detr_score_threshold <= 1.0)) {
    throw ArgumentError("DETR score threshold must lie in [0, 1]");
  }
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw ArgumentError("NMS IoU must lie in (0, 1]");
  eval_config({"x"}).validate();
  if (!(gaussian.sigma_divisor > 0.0) || !(gaussian.min_sigma > 0.0)) {
    throw ArgumentError("Gaussian target parameters must be positive");
  }
  if (!(focal.alpha >= 0.0) || !(focal.beta >= 0.0)) throw ArgumentError("focal exponents must be >= 0");
  if (!(match.l1 >= 0.0) || !(match.iou >= 0.0)) throw ArgumentError("match cost weights must be >= 0");
  if (!(width_loss_weight >= 0.0)) throw ArgumentError("width loss weight must be >= 0");
  if (jobs == 0) throw ArgumentError("jobs must be positive");
  synth.validate();
}

EvalConfig PipelineConfig::eval_config(std::vector<std::string> class_list) const {
  EvalConfig c = make_eval_config(preset, std::move(class_list));
  if (iou_thresholds) c.iou_thresholds = *iou_thresholds;
  c.recall_ns = recall_ns;
  c.recall_iou_grid = recall_iou_grid;
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  PipelineConfig config;
  try {
    config.merge(io::read_json(path));
  } catch (const Error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config;
}

void apply_seed_environment(PipelineConfig& config) {
  const char* env = std::getenv("OVTAD_SEED");
  if (env == nullptr || *env == '\0') return;
  const std::string_view text(env);
  std::uint64_t seed = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ArgumentError("OVTAD_SEED must be an unsigned integer, got '" + std::string(text) + "'");
  }
  config.synth.seed = seed;
  config.seed_base = seed;
}

void write_report(const CommandResult& result, const fs::path& out_dir) {
  io::write_file_atomic(out_dir / "report.json", io::dump_json(result.report));
  io::write_file_atomic(out_dir / "report.txt", result.table);
}

// ---- shared loading ----

FeatureLoad load_feature_dirs(const std::vector<fs::path>& dirs, const std::vector<std::string>& ids,
                              std::size_t jobs) {
  if (dirs.empty()) throw ArgumentError("at least one feature directory is required");
  struct Slot {
    std::optional<FeatureSequence> seq;
    bool missing = false;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    std::vector<FeatureSequence> parts;
    for (const auto& dir : dirs) {
      const fs::path path = dir / (ids[i] + ".ovtf");
      if (!fs::exists(path)) {
        slots[i].missing = true;
        return;
      }
      try {
        parts.push_back(read_features(path));
        if (parts.back().video_id != ids[i]) {
          throw ParseError(path.string() + ": holds video '" + parts.back().video_id + "'");
        }
      } catch (const Error& e) {
        slots[i].error = e.what();
        return;
      }
    }
    try {
      slots[i].seq = parts.size() == 1 ? std::move(parts[0]) : ensemble(parts);
    } catch (const Error& e) {
      slots[i].error = e.what();
    }
  });
  FeatureLoad out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (slots[i].missing) {
      out.missing.push_back(ids[i]);
    } else if (slots[i].error) {
      out.errors.push_back({ids[i], *slots[i].error});
    } else {
      out.features.emplace(ids[i], std::move(*slots[i].seq));
    }
  }
  return out;
}

AnnotatedDataset select_videos(const AnnotatedDataset& dataset, const std::optional<LabelSplit>& split,
                               SplitSide side, std::optional<Subset> subset) {
  AnnotatedDataset base = split ? apply_split(dataset, *split, side) : dataset;
  if (!subset) return base;
  std::vector<VideoRecord> kept;
  for (auto& [id, v] : base.videos) {
    if (v.subset == *subset) kept.push_back(std::move(v));
  }
  return make_dataset(std::move(kept), std::move(base.vocabulary));
}

HeadKind parse_head_kind(std::string_view text) {
  if (text == "centernet") return HeadKind::centernet;
  if (text == "detr") return HeadKind::detr;
  throw ArgumentError("head kind must be 'centernet' or 'detr'");
}

std::string_view to_string(HeadKind kind) { return kind == HeadKind::centernet ? "centernet" : "detr"; }

// ---- split ----

CommandResult run_split_random(const RandomSplitArgs& args, const PipelineConfig& config) {
  if (args.seeds.empty()) throw ArgumentError("at least one seed is required");
  const auto vocabulary = normalize_vocabulary(args.vocabulary);
  CommandResult result;
  ojson files = ojson::array();
  std::ostringstream table;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-28s %8s %8s\n", "file", "train", "eval");
  table << buf;
  for (std::size_t i = 0; i < args.seeds.size(); ++i) {
    const LabelSplit split = generate_random_split(vocabulary, config.eval_fraction, args.seeds[i]);
    char name[64];
    std::snprintf(name, sizeof(name), "split_%02zu_seed%llu.json", i,
                  static_cast<unsigned long long>(args.seeds[i]));
    export_split(split, args.out_dir / name);
    files.push_back({{"file", name},
                     {"seed", args.seeds[i]},
                     {"train_labels", split.train_labels.size()},
                     {"eval_labels", split.eval_labels.size()}});
    std::snprintf(buf, sizeof(buf), "%-28s %8zu %8zu\n", name, split.train_labels.size(),
                  split.eval_labels.size());
    table << buf;
  }
  result.report["command"] = "split";
  result.report["mode"] = "random";
  result.report["eval_fraction"] = config.eval_fraction;
  result.report["vocabulary_size"] = vocabulary.size();
  result.report["splits"] = std::move(files);
  result.report["errors"] = ojson::array();
  result.table = table.str();
  return result;
}

CommandResult run_split_smart(const SmartSplitArgs& args) {
  LabelSplit split = args.split_file ? import_split(*args.split_file) : activitynet_smart_split();
  CommandResult result;
  result.report["command"] = "split";
  result.report["mode"] = "smart";
  result.report["split"] = split.name;
  result.report["train_labels"] = split.train_labels.size();
  result.report["eval_labels"] = split.eval_labels.size();
  std::ostringstream table;
  table << "split " << split.name << ": " << split.train_labels.size() << " train, "
        << split.eval_labels.size() << " eval labels\n";
  if (args.taxonomy) {
    const Taxonomy taxonomy = load_taxonomy(*args.taxonomy);
    if (split.provenance.kind == SplitProvenance::Kind::smart) {
      split.provenance.taxonomy_hash = taxonomy.content_hash();
    }
    const SmartSplitReport check = validate_smart_split(split, taxonomy);
    for (const auto& e : check.entries) {
      if (!e.satisfied) result.errors.push_back({e.eval_label, "no train sibling under the same parent"});
    }
    result.report["validation"] = check.to_json();
    table << "sibling check: " << check.satisfied << " satisfied, " << check.unsatisfied
          << " unsatisfied\n";
  }
  const std::string file = split.name + ".json";
  export_split(split, args.out_dir / file);
  result.report["file"] = file;
  result.report["errors"] = errors_json(result.errors);
  result.table = table.str();
  return result;
}

// ---- classify-gt ----

CommandResult run_classify_gt(const ClassifyGtArgs& args, const PipelineConfig& config) {
  Warnings warnings;
  const AnnotatedDataset dataset = load_dataset_for(args.dataset, config, warnings);
  const auto split = load_optional_split(args.split);
  const AnnotatedDataset selected = select_videos(dataset, split, args.side, config.eval_subset);
  const TextEmbeddingSet texts = load_text_embeddings(args.texts).subset(selected.vocabulary);

  FeatureLoad load = load_feature_dirs(args.feature_dirs, video_ids(selected), config.jobs);
  const TopKReport topk = evaluate_topk(selected, load.features, texts, config.topk,
                                        MissingFeatures::skip, config.temperature, config.jobs);

  CommandResult result;
  for (const auto& id : load.missing) result.errors.push_back({id, "no feature file"});
  for (auto& e : load.errors) result.errors.push_back(std::move(e));

  auto& r = result.report;
  r["command"] = "classify-gt";
  r["split"] = split_json(split);
  r["side"] = split ? ojson(std::string(to_string(args.side))) : ojson(nullptr);
  r["subset"] = subset_choice_name(config.eval_subset);
  r["feature_dirs"] = path_strings(args.feature_dirs);
  r["classes"] = texts.size();
  r["videos"] = selected.videos.size();
  r["annotations"] = selected.annotation_count();
  r["temperature"] = config.temperature;
  r["accuracy"] = topk_json(topk);
  r["evaluated"] = topk.evaluated;
  r["skipped"] = topk.skipped;
  r["coverage"] = topk.coverage();
  r["missing_videos"] = load.missing;
  r["warnings"] = warnings;
  r["errors"] = errors_json(result.errors);
  result.table = topk_table(topk);
  return result;
}

// ---- detect ----

DetectOutput run_detect(const DetectArgs& args, const PipelineConfig& config) {
  std::vector<std::pair<std::string, std::optional<double>>> videos;
  Warnings warnings;
  std::optional<LabelSplit> split;
  if (args.dataset) {
    const AnnotatedDataset dataset = load_dataset_for(*args.dataset, config, warnings);
    split = load_optional_split(args.split);
    const AnnotatedDataset selected = select_videos(dataset, split, args.side, config.eval_subset);
    for (const auto& [id, v] : selected.videos) videos.emplace_back(id, v.duration);
  } else {
    if (args.kind == HeadKind::detr) throw ArgumentError("DETR heads need --dataset for video durations");
    if (args.split) throw ArgumentError("--split needs --dataset");
    if (!fs::is_directory(args.heads_dir)) {
      throw IoError("heads directory not found: " + args.heads_dir.string());
    }
    std::set<std::string> ids;
    for (const auto& entry : fs::directory_iterator(args.heads_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".ovth") {
        ids.insert(entry.path().stem().string());
      }
    }
    for (const auto& id : ids) videos.emplace_back(id, std::nullopt);
  }

  HeadDecode decoded = decode_heads(videos, args.heads_dir, args.kind, config);
  DetectOutput out;
  out.detections = std::move(decoded.detections);
  out.result.errors = std::move(decoded.errors);
  auto& r = out.result.report;
  r["command"] = "detect";
  r["head_kind"] = std::string(to_string(args.kind));
  r["split"] = split_json(split);
  r["videos"] = videos.size();
  r["videos_decoded"] = decoded.decoded;
  r["detections"] = detection_count(out.detections);
  r["nms_iou"] = config.apply_nms ? ojson(config.nms_iou) : ojson(nullptr);
  r["warnings"] = warnings;
  r["errors"] = errors_json(out.result.errors);
  std::ostringstream table;
  table << "videos " << videos.size() << ", decoded " << decoded.decoded << ", detections "
        << detection_count(out.detections) << "\n";
  out.result.table = table.str();
  return out;
}

// ---- eval ----

CommandResult run_eval(const EvalArgs& args, const PipelineConfig& config) {
  Warnings warnings;
  const AnnotatedDataset dataset = load_dataset_for(args.dataset, config, warnings);
  const auto split = load_optional_split(args.split);
  const AnnotatedDataset selected = select_videos(dataset, split, args.side, config.eval_subset);
  std::size_t ignored = 0;
  const DetectionsByVideo predictions = restrict_to(read_segments_file(args.predictions), selected, ignored);
  const DetectionReport metrics = evaluate(predictions, selected, args.class_agnostic, config);

  CommandResult result;
  auto& r = result.report;
  r["command"] = "eval";
  r["split"] = split_json(split);
  r["side"] = split ? ojson(std::string(to_string(args.side))) : ojson(nullptr);
  r["subset"] = subset_choice_name(config.eval_subset);
  r["preset"] = std::string(to_string(config.preset));
  r["class_agnostic"] = args.class_agnostic;
  r["videos"] = selected.videos.size();
  r["ignored_predictions"] = ignored;
  r["metrics"] = metrics.to_json();
  r["warnings"] = warnings;
  r["errors"] = ojson::array();
  result.table = metrics.to_table();
  return result;
}

CommandResult run_eval_multi(const MultiSplitArgs& args, const PipelineConfig& config) {
  Warnings warnings;
  const AnnotatedDataset dataset = load_dataset_for(args.dataset, config, warnings);
  const json manifest = io::read_json(args.manifest);
  if (!manifest.is_array() || manifest.empty()) {
    throw ParseError(args.manifest.string() + ": expected a non-empty array of {split, predictions}");
  }
  const fs::path base = args.manifest.parent_path();

  std::vector<std::string> names;
  std::vector<DetectionReport> reports;
  ojson per_split = ojson::array();
  for (const auto& entry : manifest) {
    if (!entry.is_object() || !entry.contains("split") || !entry.contains("predictions")) {
      throw ParseError(args.manifest.string() + ": every entry needs 'split' and 'predictions'");
    }
    const fs::path split_path = base / entry["split"].get<std::string>();
    const fs::path pred_path = base / entry["predictions"].get<std::string>();
    const LabelSplit split = import_split(split_path);
    const AnnotatedDataset selected = select_videos(dataset, split, args.side, config.eval_subset);
    std::size_t ignored = 0;
    const auto predictions = restrict_to(read_segments_file(pred_path), selected, ignored);
    reports.push_back(evaluate(predictions, selected, args.class_agnostic, config));
    names.push_back(split.name);
    per_split.push_back({{"split", split.name},
                         {"videos", selected.videos.size()},
                         {"ignored_predictions", ignored},
                         {"metrics", reports.back().to_json()}});
  }

  auto aggregate = [](const std::vector<double>& values) {
    const MeanAndError m = mean_and_standard_error(values);
    return ojson{{"mean", m.mean}, {"standard_error", m.standard_error}};
  };
  ojson agg;
  std::vector<double> avg;
  for (const auto& r : reports) avg.push_back(r.map.map_avg);
  agg["map_avg"] = aggregate(avg);
  ojson by_t = ojson::object();
  const auto& thresholds = reports.front().map.thresholds;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(r.map.map[t]);
    by_t[threshold_key(thresholds[t])] = aggregate(v);
  }
  agg["map"] = std::move(by_t);
  ojson ar = ojson::object();
  for (std::size_t i = 0; i < config.recall_ns.size(); ++i) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(r.average_recall[i]);
    ar[std::to_string(config.recall_ns[i])] = aggregate(v);
  }
  agg["average_recall"] = std::move(ar);

  CommandResult result;
  auto& r = result.report;
  r["command"] = "eval";
  r["multi_split"] = true;
  r["side"] = std::string(to_string(args.side));
  r["subset"] = subset_choice_name(config.eval_subset);
  r["preset"] = std::string(to_string(config.preset));
  r["class_agnostic"] = args.class_agnostic;
  r["splits"] = std::move(per_split);
  r["aggregate"] = std::move(agg);
  r["warnings"] = warnings;
  r["errors"] = ojson::array();

  std::ostringstream table;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%-32s%10s", "split", "mAP@avg");
  table << buf;
  for (auto n : config.recall_ns) {
    std::snprintf(buf, sizeof(buf), "%10s", ("AR@" + std::to_string(n)).c_str());
    table << buf;
  }
  table << "\n";
  auto row = [&](const std::string& name, double m, const std::vector<double>& ars) {
    std::snprintf(buf, sizeof(buf), "%-32s%10.4f", name.c_str(), m);
    table << buf;
    for (double a : ars) {
      std::snprintf(buf, sizeof(buf), "%10.4f", a);
      table << buf;
    }
    table << "\n";
  };
  for (std::size_t i = 0; i < reports.size(); ++i) row(names[i], reports[i].map.map_avg, reports[i].average_recall);
  std::vector<double> means, sems;
  const auto avg_stats = mean_and_standard_error(avg);
  for (std::size_t i = 0; i < config.recall_ns.size(); ++i) {
    std::vector<double> v;
    for (const auto& rep : reports) v.push_back(rep.average_recall[i]);
    const auto s = mean_and_standard_error(v);
    means.push_back(s.mean);
    sems.push_back(s.standard_error);
  }
  row("mean", avg_stats.mean, means);
  row("standard error", avg_stats.standard_error, sems);
  result.table = table.str();
  return result;
}

// ---- e2e ----

E2eOutput run_e2e(const E2eArgs& args, const PipelineConfig& config) {
  if (args.detections.has_value() == args.heads_dir.has_value()) {
    throw ArgumentError("e2e needs exactly one of a detections file or a heads directory");
  }
  Warnings warnings;
  const AnnotatedDataset dataset = load_dataset_for(args.dataset, config, warnings);
  const auto split = load_optional_split(args.split);
  const AnnotatedDataset selected = select_videos(dataset, split, args.side, config.eval_subset);
  const TextEmbeddingSet texts = load_text_embeddings(args.texts).subset(selected.vocabulary);
  const auto ids = video_ids(selected);

  E2eOutput out;
  auto& errors = out.result.errors;

  DetectionsByVideo detections;
  std::size_t ignored = 0;
  if (args.detections) {
    detections = restrict_to(read_segments_file(*args.detections), selected, ignored);
  } else {
    std::vector<std::pair<std::string, std::optional<double>>> videos;
    for (const auto& [id, v] : selected.videos) videos.emplace_back(id, v.duration);
    HeadDecode decoded = decode_heads(videos, *args.heads_dir, args.head_kind, config);
    detections = std::move(decoded.detections);
    for (auto& e : decoded.errors) errors.push_back(std::move(e));
  }

  FeatureLoad classifier = load_feature_dirs(args.classifier_feature_dirs, ids, config.jobs);
  for (const auto& id : classifier.missing) errors.push_back({id, "no classifier feature file"});
  for (auto& e : classifier.errors) errors.push_back(std::move(e));

  ojson detector_json = nullptr;
  if (!args.detector_feature_dirs.empty()) {
    const FeatureLoad detector = load_feature_dirs(args.detector_feature_dirs, ids, config.jobs);
    detector_json = {{"dirs", path_strings(args.detector_feature_dirs)},
                     {"dim", detector.features.empty() ? 0 : detector.features.begin()->second.dim},
                     {"videos_loaded", detector.features.size()},
                     {"videos_missing", detector.missing.size()},
                     {"videos_unreadable", detector.errors.size()}};
  }

  ClassifyOptions options;
  options.temperature = config.temperature;
  options.composition = config.composition;
  options.fanout = config.fanout;

  struct Slot {
    std::vector<SegmentDetection> labeled;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(ids.size());
  parallel_for(ids.size(), config.jobs, [&](std::size_t i) {
    auto dets = detections.find(ids[i]);
    if (dets == detections.end() || dets->second.empty()) return;
    auto feats = classifier.features.find(ids[i]);
    if (feats == classifier.features.end()) return;  // already reported
    try {
      std::vector<SegmentDetection> unlabeled = dets->second;
      for (auto& d : unlabeled) d.label.reset();
      slots[i].labeled = classify_detections(unlabeled, feats->second, texts, options);
    } catch (const Error& e) {
      slots[i].error = e.what();
    }
  });
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (slots[i].error) {
      errors.push_back({ids[i], *slots[i].error});
    } else if (!slots[i].labeled.empty()) {
      out.labeled[ids[i]] = std::move(slots[i].labeled);
    }
  }

  const DetectionReport metrics = evaluate(out.labeled, selected, false, config);
  const TopKReport topk = evaluate_topk(selected, classifier.features, texts, config.topk,
                                        MissingFeatures::skip, config.temperature, config.jobs);

  auto& r = out.result.report;
  r["command"] = "e2e";
  r["split"] = split_json(split);
  r["side"] = split ? ojson(std::string(to_string(args.side))) : ojson(nullptr);
  r["subset"] = subset_choice_name(config.eval_subset);
  r["preset"] = std::string(to_string(config.preset));
  r["classes"] = texts.size();
  r["videos"] = selected.videos.size();
  r["detection_source"] = args.detections ? ojson{{"segments", args.detections->generic_string()}}
                                          : ojson{{"heads", args.heads_dir->generic_string()},
                                                  {"kind", std::string(to_string(args.head_kind))}};
  r["classifier_features"] = {{"dirs", path_strings(args.classifier_feature_dirs)},
                              {"dim", classifier.features.empty() ? 0 : classifier.features.begin()->second.dim},
                              {"videos_loaded", classifier.features.size()}};
  r["detector_features"] = std::move(detector_json);
  r["composition"] = std::string(to_string(config.composition));
  r["fanout"] = config.fanout;
  r["temperature"] = config.temperature;
  r["detections_in"] = detection_count(detections);
  r["ignored_predictions"] = ignored;
  r["detections_labeled"] = detection_count(out.labeled);
  r["gt_classification"] = topk_json(topk);
  r["coverage"] = topk.coverage();
  r["metrics"] = metrics.to_json();
  r["warnings"] = warnings;
  r["errors"] = errors_json(errors);
  out.result.table = metrics.to_table() + topk_table(topk);
  return out;
}

// ---- synth ----

CommandResult run_synth(const SynthSpec& spec, const fs::path& out_dir) {
  const SynthData data = generate(spec);
  write_synth(data, out_dir);
  CommandResult result;
  auto& r = result.report;
  r["command"] = "synth";
  r["seed"] = spec.seed;
  r["videos"] = spec.n_videos;
  r["classes"] = spec.n_classes;
  r["dim"] = spec.dim;
  r["feature_sigma"] = spec.feature_sigma;
  r["boundary_jitter"] = spec.boundary_jitter;
  r["score_noise"] = spec.score_noise;
  r["distractor_rate"] = spec.distractor_rate;
  r["planted_segments"] = data.planted;
  r["distractor_segments"] = data.distractors;
  r["errors"] = ojson::array();
  std::ostringstream table;
  table << "videos " << spec.n_videos << ", classes " << spec.n_classes << ", annotated segments "
        << data.planted << ", distractors " << data.distractors << "\n";
  result.table = table.str();
  return result;
}

}  // namespace ovtad::pipeline
