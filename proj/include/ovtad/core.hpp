#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace ovtad {

/// Half-open time interval in seconds. Construct through make() to validate.
struct Segment {
  double start = 0.0;
  double end = 0.0;

  /// Throws InvariantError unless both ends are finite, start >= 0 and end > start.
  static Segment make(double start, double end);

  double length() const { return end - start; }
  double center() const { return 0.5 * (start + end); }

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct SegmentDetection {
  Segment segment;
  double score = 0.0;
  std::optional<std::string> label;

  friend bool operator==(const SegmentDetection&, const SegmentDetection&) = default;
};

/// Detections grouped per video. Ordered so every consumer iterates videos
/// in the same order.
using DetectionsByVideo = std::map<std::string, std::vector<SegmentDetection>>;

enum class Subset { training, validation, testing };

std::string_view to_string(Subset subset);
Subset parse_subset(std::string_view text);

struct Annotation {
  Segment segment;
  std::string label;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct VideoRecord {
  std::string video_id;
  double duration = 0.0;
  Subset subset = Subset::validation;
  std::vector<Annotation> annotations;

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct AnnotatedDataset {
  std::map<std::string, VideoRecord> videos;
  /// Lexicographically sorted, unique.
  std::vector<std::string> vocabulary;

  bool has_label(std::string_view label) const;
  std::size_t annotation_count() const;

  friend bool operator==(const AnnotatedDataset&, const AnnotatedDataset&) = default;
};

enum class DatasetFormat { activitynet_json };

struct DatasetLoadOptions {
  /// When set, becomes the vocabulary (sorted); every annotation label must be in it.
  std::optional<std::vector<std::string>> vocabulary;
  /// Annotation ends past the video duration by at most this much are clamped.
  double overshoot_tolerance = 0.5;
};

/// Non-fatal findings while loading (clamped annotations and the like).
using Warnings = std::vector<std::string>;

AnnotatedDataset parse_dataset(const nlohmann::json& doc,
                               const DatasetLoadOptions& options = {},
                               Warnings* warnings = nullptr);

AnnotatedDataset load_dataset(const std::filesystem::path& path,
                              DatasetFormat format = DatasetFormat::activitynet_json,
                              const DatasetLoadOptions& options = {},
                              Warnings* warnings = nullptr);

/// ActivityNet layout; videos in id order.
nlohmann::ordered_json dataset_to_json(const AnnotatedDataset& dataset);
std::string serialize_dataset(const AnnotatedDataset& dataset);
void save_dataset(const AnnotatedDataset& dataset, const std::filesystem::path& path);

/// Validates and assembles a dataset from records (used by generators and splits).
AnnotatedDataset make_dataset(std::vector<VideoRecord> videos,
                              std::optional<std::vector<std::string>> vocabulary = std::nullopt);

/// Sorted, de-duplicated copy.
std::vector<std::string> normalize_vocabulary(std::vector<std::string> labels);

/// Reads a label list: a JSON array of strings, or plain text with one label per line.
std::vector<std::string> load_vocabulary(const std::filesystem::path& path);

struct TaxonomyNode {
  int id = 0;
  std::string name;
  std::optional<int> parent;

  friend bool operator==(const TaxonomyNode&, const TaxonomyNode&) = default;
};

class Taxonomy {
 public:
  /// Throws InvariantError on duplicate ids, dangling parents, cycles, or a
  /// root count other than one.
  static Taxonomy build(std::vector<TaxonomyNode> nodes);

  const std::vector<TaxonomyNode>& nodes() const { return nodes_; }
  const TaxonomyNode& root() const { return nodes_[root_]; }
  const TaxonomyNode& node(int id) const;
  const TaxonomyNode* find_leaf(std::string_view name) const;
  const std::vector<int>& children(int id) const;
  bool is_leaf(int id) const { return children(id).empty(); }
  std::vector<std::string> leaf_names() const;

  /// Edge count of the tree path between two nodes.
  int distance(int a, int b) const;

  /// Names from `labels` that are not leaves.
  std::vector<std::string> uncovered(const std::vector<std::string>& labels) const;

  /// FNV-1a over the canonical (id-sorted) node list, as 16 hex digits.
  std::string content_hash() const;

 private:
  std::vector<TaxonomyNode> nodes_;
  std::unordered_map<int, std::size_t> index_;
  std::unordered_map<int, std::vector<int>> children_;
  std::unordered_map<std::string, int> leaf_by_name_;
  std::size_t root_ = 0;

  std::vector<int> path_to_root(int id) const;
};

/// Accepts a bare node array or an object holding it under "taxonomy"
/// (the layout of the public ActivityNet release).
Taxonomy parse_taxonomy(const nlohmann::json& doc);
Taxonomy load_taxonomy(const std::filesystem::path& path);

}  // namespace ovtad
