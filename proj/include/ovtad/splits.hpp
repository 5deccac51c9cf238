#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ovtad/core.hpp"

namespace ovtad {

enum class SplitSide { train, eval };

std::string_view to_string(SplitSide side);
SplitSide parse_split_side(std::string_view text);

struct SplitProvenance {
  enum class Kind { random, smart, explicit_file };

  Kind kind = Kind::explicit_file;
  std::uint64_t seed = 0;        // random
  double fraction = 0.0;         // random
  std::string taxonomy_hash;     // smart; empty when not tied to a taxonomy file
  std::string file;              // explicit

  friend bool operator==(const SplitProvenance&, const SplitProvenance&) = default;
};

/// Disjoint train/eval partition of a label vocabulary. Both label lists are
/// kept sorted.
struct LabelSplit {
  std::string name;
  std::vector<std::string> train_labels;
  std::vector<std::string> eval_labels;
  SplitProvenance provenance;

  /// Sorted union of both sides.
  std::vector<std::string> vocabulary() const;
  const std::vector<std::string>& labels(SplitSide side) const;
  bool contains(SplitSide side, std::string_view label) const;

  friend bool operator==(const LabelSplit&, const LabelSplit&) = default;
};

/// Sorts both sides and checks disjointness, uniqueness and a non-empty eval side.
LabelSplit make_split(std::string name, std::vector<std::string> train,
                      std::vector<std::string> eval, SplitProvenance provenance);

/// Held-out class count: fraction * n rounded half up.
std::size_t eval_label_count(std::size_t vocabulary_size, double eval_fraction);

/// Shuffles the sorted vocabulary with SplitMix64(seed) Fisher-Yates and holds
/// out the first eval_label_count() labels.
LabelSplit generate_random_split(const std::vector<std::string>& vocabulary, double eval_fraction,
                                 std::uint64_t seed);

/// Keeps every video with at least one annotation on `side`, dropping the
/// other side's annotations. Durations and boundaries are untouched, and the
/// result's vocabulary is the side's labels.
AnnotatedDataset apply_split(const AnnotatedDataset& dataset, const LabelSplit& split,
                             SplitSide side);

struct SmartPairCheck {
  std::string eval_label;
  bool satisfied = false;
  /// Train labels sharing the eval label's immediate parent.
  std::vector<std::string> sibling_train_labels;
  /// Closest train leaf by tree distance (reported for unsatisfied entries too).
  std::string nearest_train_label;
  int nearest_train_distance = -1;
};

struct SmartSplitReport {
  std::vector<SmartPairCheck> entries;
  std::size_t satisfied = 0;
  std::size_t unsatisfied = 0;
  std::size_t eval_count = 0;
  std::size_t train_count = 0;
  bool passed = false;

  nlohmann::ordered_json to_json() const;
};

/// Structural check of a taxonomy-pair split. Throws ArgumentError when a
/// split label is not a taxonomy leaf.
SmartSplitReport validate_smart_split(const LabelSplit& split, const Taxonomy& taxonomy);

nlohmann::ordered_json split_to_json(const LabelSplit& split);
std::string serialize_split(const LabelSplit& split);
void export_split(const LabelSplit& split, const std::filesystem::path& path);

/// `origin` fills the explicit provenance when the document carries none.
LabelSplit parse_split(const nlohmann::json& doc, const std::string& origin = {});
LabelSplit import_split(const std::filesystem::path& path);

/// The 200 ActivityNet 1.3 class names, sorted.
const std::vector<std::string>& activitynet_vocabulary();

/// The 50 held-out labels of the ActivityNet taxonomy-pair ("Smart") split.
const std::vector<std::string>& activitynet_smart_eval_labels();

LabelSplit activitynet_smart_split();

}  // namespace ovtad
