#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ovtad/core.hpp"

namespace ovtad {

inline constexpr char kFeatureMagic[4] = {'O', 'V', 'T', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

/// Per-second features of one video, time-major T x D.
struct FeatureSequence {
  std::string video_id;
  float fps = 1.0f;
  std::size_t dim = 0;
  std::vector<float> data;

  /// Validates T >= 1, D >= 1, fps > 0 and finite entries.
  static FeatureSequence make(std::string video_id, float fps, std::size_t dim,
                              std::vector<float> data);

  std::size_t frames() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const float> row(std::size_t t) const {
    return {data.data() + t * dim, dim};
  }

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

/// Bit-exact OVTF container: magic, u32 version, u32 D, u32 T, f32 fps,
/// u16 id length, UTF-8 id, then T*D little-endian f32.
std::string encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::string_view bytes);

FeatureSequence read_features(const std::filesystem::path& path);
void write_features(const FeatureSequence& seq, const std::filesystem::path& path);

/// Concatenates feature blocks column-wise, truncating all inputs to the
/// shortest length. Inputs must agree on video_id and fps.
FeatureSequence ensemble(std::span<const FeatureSequence> sequences);

/// Half-open row range [first, last).
struct FrameRange {
  std::size_t first = 0;
  std::size_t last = 0;
};

/// Rows i with floor(start*fps) <= i < ceil(end*fps), clamped to [0, T).
/// Throws ArgumentError when the segment misses the sequence entirely.
FrameRange covered_frames(const FeatureSequence& seq, const Segment& segment);

/// Mean of the covered rows, accumulated in double.
std::vector<double> pool_segment(const FeatureSequence& seq, const Segment& segment);

/// Label embeddings with unit-norm rows.
class TextEmbeddingSet {
 public:
  /// Normalizes each row; throws on duplicate labels, a zero row, or a shape mismatch.
  static TextEmbeddingSet make(std::vector<std::string> labels, std::size_t dim,
                               std::vector<double> rows);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return labels_.size(); }
  std::span<const double> row(std::size_t i) const { return {rows_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> index_of(std::string_view label) const;

  /// Rows for `labels`, in that order. Throws when a label is missing.
  TextEmbeddingSet subset(const std::vector<std::string>& labels) const;

  friend bool operator==(const TextEmbeddingSet&, const TextEmbeddingSet&) = default;

 private:
  std::vector<std::string> labels_;
  std::size_t dim_ = 0;
  std::vector<double> rows_;
};

TextEmbeddingSet parse_text_embeddings(const nlohmann::json& doc);
TextEmbeddingSet load_text_embeddings(const std::filesystem::path& path);
nlohmann::ordered_json text_embeddings_to_json(const TextEmbeddingSet& texts);
void save_text_embeddings(const TextEmbeddingSet& texts, const std::filesystem::path& path);

}  // namespace ovtad
