#include "ovtad/featurestore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "binary_io.hpp"
#include "ovtad/error.hpp"
#include "ovtad/io.hpp"

namespace ovtad {

FeatureSequence FeatureSequence::make(std::string video_id, float fps, std::size_t dim,
                                      std::vector<float> data) {
  if (dim == 0) {
    throw InvariantError("feature dim must be >= 1");
  }
  if (data.empty() || data.size() % dim != 0) {
    throw InvariantError("feature payload of " + std::to_string(data.size()) +
                         " values is not a positive multiple of dim " + std::to_string(dim));
  }
  if (!std::isfinite(fps) || fps <= 0.0f) {
    throw InvariantError("fps must be positive");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw InvariantError("non-finite feature value at row " + std::to_string(i / dim) +
                           " of " + video_id);
    }
  }
  if (video_id.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw InvariantError("video_id longer than 65535 bytes");
  }
  return FeatureSequence{std::move(video_id), fps, dim, std::move(data)};
}

std::string encode_features(const FeatureSequence& seq) {
  detail::ByteWriter w;
  w.reserve(22 + seq.video_id.size() + 4 * seq.data.size());
  w.bytes(std::string_view(kFeatureMagic, 4));
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(seq.dim));
  w.u32(static_cast<std::uint32_t>(seq.frames()));
  w.f32(seq.fps);
  w.u16(static_cast<std::uint16_t>(seq.video_id.size()));
  w.bytes(seq.video_id);
  for (float v : seq.data) w.f32(v);
  return w.take();
}

FeatureSequence decode_features(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.bytes(4, "magic") != std::string_view(kFeatureMagic, 4)) {
    throw ParseError("bad magic: not an OVTF feature file");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureVersion) {
    throw ParseError("unsupported feature file version " + std::to_string(version));
  }
  const std::uint32_t dim = r.u32("dim");
  const std::uint32_t frames = r.u32("frame count");
  const float fps = r.f32("fps");
  const std::uint16_t name_len = r.u16("video_id length");
  std::string video_id(r.bytes(name_len, "video_id"));
  if (dim == 0 || frames == 0) {
    throw ParseError("feature file declares an empty matrix");
  }
  const std::uint64_t count = static_cast<std::uint64_t>(dim) * frames;
  if (count * 4 > r.remaining()) {
    throw ParseError("truncated payload: header declares " + std::to_string(frames) + "x" +
                     std::to_string(dim) + " values, file holds " +
                     std::to_string(r.remaining() / 4));
  }
  if (count * 4 < r.remaining()) {
    throw ParseError("trailing bytes after feature payload");
  }
  std::vector<float> data(count);
  for (auto& v : data) v = r.f32("payload");
  try {
    return FeatureSequence::make(std::move(video_id), fps, dim, std::move(data));
  } catch (const InvariantError& e) {
    throw ParseError(e.what());
  }
}

FeatureSequence read_features(const std::filesystem::path& path) {
  try {
    return decode_features(io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_features(seq));
}

FeatureSequence ensemble(std::span<const FeatureSequence> sequences) {
  if (sequences.empty()) {
    throw ArgumentError("ensemble needs at least one feature sequence");
  }
  const auto& head = sequences.front();
  std::size_t frames = head.frames();
  std::size_t dim = 0;
  for (const auto& s : sequences) {
    if (s.video_id != head.video_id) {
      throw ArgumentError("ensemble video_id mismatch: " + head.video_id + " vs " + s.video_id);
    }
    if (s.fps != head.fps) {
      throw ArgumentError("ensemble fps mismatch for " + head.video_id);
    }
    frames = std::min(frames, s.frames());
    dim += s.dim;
  }
  std::vector<float> data;
  data.reserve(frames * dim);
  for (std::size_t t = 0; t < frames; ++t) {
    for (const auto& s : sequences) {
      auto r = s.row(t);
      data.insert(data.end(), r.begin(), r.end());
    }
  }
  return FeatureSequence::make(head.video_id, head.fps, dim, std::move(data));
}

FrameRange covered_frames(const FeatureSequence& seq, const Segment& segment) {
  const double fps = seq.fps;
  const auto frames = static_cast<double>(seq.frames());
  const double lo = std::floor(segment.start * fps);
  const double hi = std::ceil(segment.end * fps);
  if (segment.end <= 0.0 || lo >= frames) {
    throw ArgumentError("segment does not intersect the feature sequence of " + seq.video_id);
  }
  FrameRange range;
  range.first = static_cast<std::size_t>(std::clamp(lo, 0.0, frames));
  range.last = static_cast<std::size_t>(std::clamp(hi, 0.0, frames));
  if (range.last <= range.first) {
    // Nearest row when clamping empties the range.
    range.first = std::min(range.first, seq.frames() - 1);
    range.last = range.first + 1;
  }
  return range;
}

std::vector<double> pool_segment(const FeatureSequence& seq, const Segment& segment) {
  const FrameRange range = covered_frames(seq, segment);
  std::vector<double> mean(seq.dim, 0.0);
  for (std::size_t t = range.first; t < range.last; ++t) {
    auto r = seq.row(t);
    for (std::size_t d = 0; d < seq.dim; ++d) mean[d] += r[d];
  }
  const double n = static_cast<double>(range.last - range.first);
  for (auto& m : mean) m /= n;
  return mean;
}

// ---------------------------------------------------------------------------

TextEmbeddingSet TextEmbeddingSet::make(std::vector<std::string> labels, std::size_t dim,
                                        std::vector<double> rows) {
  if (labels.empty()) {
    throw InvariantError("text embedding set is empty");
  }
  if (dim == 0 || rows.size() != labels.size() * dim) {
    throw InvariantError("text embeddings: expected " + std::to_string(labels.size()) + " rows of dim " +
                         std::to_string(dim));
  }
  std::unordered_set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) {
      throw InvariantError("duplicate text label '" + l + "'");
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = rows[i * dim + d];
      if (!std::isfinite(v)) {
        throw InvariantError("non-finite embedding for '" + labels[i] + "'");
      }
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      throw InvariantError("zero embedding for '" + labels[i] + "'");
    }
    // Rows that are already unit length stay bit-identical, so re-saving a
    // loaded file reproduces it exactly.
    if (std::abs(norm - 1.0) <= 1e-12) continue;
    for (std::size_t d = 0; d < dim; ++d) rows[i * dim + d] /= norm;
  }
  TextEmbeddingSet t;
  t.labels_ = std::move(labels);
  t.dim_ = dim;
  t.rows_ = std::move(rows);
  return t;
}

std::optional<std::size_t> TextEmbeddingSet::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

TextEmbeddingSet TextEmbeddingSet::subset(const std::vector<std::string>& labels) const {
  std::vector<double> rows;
  rows.reserve(labels.size() * dim_);
  for (const auto& l : labels) {
    auto idx = index_of(l);
    if (!idx) {
      throw ArgumentError("label '" + l + "' has no text embedding");
    }
    auto r = row(*idx);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return make(labels, dim_, std::move(rows));
}

TextEmbeddingSet parse_text_embeddings(const nlohmann::json& doc) {
  try {
    const auto dim = doc.at("dim").get<std::size_t>();
    auto labels = doc.at("labels").get<std::vector<std::string>>();
    const auto& emb = doc.at("embeddings");
    if (!emb.is_array() || emb.size() != labels.size()) {
      throw ParseError("text embeddings: row count differs from label count");
    }
    std::vector<double> rows;
    rows.reserve(labels.size() * dim);
    for (const auto& r : emb) {
      if (!r.is_array() || r.size() != dim) {
        throw ParseError("text embeddings: row length differs from dim");
      }
      for (const auto& v : r) rows.push_back(v.get<double>());
    }
    return TextEmbeddingSet::make(std::move(labels), dim, std::move(rows));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("text embeddings: ") + e.what());
  } catch (const InvariantError& e) {
    throw ParseError(std::string("text embeddings: ") + e.what());
  }
}

TextEmbeddingSet load_text_embeddings(const std::filesystem::path& path) {
  return parse_text_embeddings(io::read_json(path));
}

nlohmann::ordered_json text_embeddings_to_json(const TextEmbeddingSet& texts) {
  nlohmann::ordered_json doc;
  doc["dim"] = texts.dim();
  doc["labels"] = texts.labels();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (double v : texts.row(i)) r.push_back(v);
    rows.push_back(std::move(r));
  }
  doc["embeddings"] = std::move(rows);
  return doc;
}

void save_text_embeddings(const TextEmbeddingSet& texts, const std::filesystem::path& path) {
  io::write_file_atomic(path, io::dump_json(text_embeddings_to_json(texts)));
}

}  // namespace ovtad
