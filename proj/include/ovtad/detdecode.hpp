#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ovtad/core.hpp"

namespace ovtad {

inline constexpr char kHeadMagic[4] = {'O', 'V', 'T', 'H'};
inline constexpr std::uint32_t kHeadVersion = 1;
inline constexpr std::size_t kMaxDetrProposals = 64;
inline constexpr std::size_t kDefaultCenterNetTopK = 512;
inline constexpr double kDefaultNmsIou = 0.6;

/// 1-D CenterNet head tensors for one video. Cell i covers seconds
/// [i*stride, (i+1)*stride) at 1 FPS features.
struct CenterNetOutput {
  std::string video_id;
  double stride = 1.0;
  std::vector<double> heatmap;
  std::vector<double> widths;   // cell units
  std::vector<double> offsets;  // sub-cell center offset
  bool heatmap_is_logits = false;

  std::size_t cells() const { return heatmap.size(); }
  /// Heatmap in [0, 1], applying a sigmoid when it holds logits.
  std::vector<double> activated_heatmap() const;

  friend bool operator==(const CenterNetOutput&, const CenterNetOutput&) = default;
};

struct CenterNetDecodeOptions {
  std::size_t top_k = kDefaultCenterNetTopK;
  /// A peak must strictly exceed every neighbour within this radius.
  std::size_t peak_window = 2;
  /// Clip bound in seconds; defaults to cells * stride.
  std::optional<double> duration;
};

/// Class-agnostic segments from local heatmap maxima, best first.
std::vector<SegmentDetection> decode_centernet(const CenterNetOutput& out,
                                               const CenterNetDecodeOptions& options = {});

struct DetrProposal {
  double center = 0.0;  // normalized [0, 1]
  double width = 0.0;   // normalized (0, 1]
  double score = 0.0;   // [0, 1]

  friend bool operator==(const DetrProposal&, const DetrProposal&) = default;
};

struct DetrOutput {
  std::string video_id;
  std::vector<DetrProposal> proposals;

  friend bool operator==(const DetrOutput&, const DetrOutput&) = default;
};

/// Scales proposals to [0, duration], drops those scoring below
/// `score_threshold` and those with no length left after clipping.
std::vector<SegmentDetection> decode_detr(const DetrOutput& out, double duration,
                                          double score_threshold);

/// Greedy temporal NMS. Output is score-descending (ties: earlier start, then
/// input order). With class_aware, only detections sharing a label suppress
/// each other.
std::vector<SegmentDetection> nms(const std::vector<SegmentDetection>& detections,
                                  double iou_threshold, bool class_aware = false);

/// OVTH container: the OVTF header layout (with the fps slot carrying the
/// stride), then u8 flags (bit 0: heatmap holds logits), the channel names
/// as u16-length strings, and L x 3 little-endian f32 values, time-major.
std::string encode_centernet(const CenterNetOutput& out);
CenterNetOutput decode_centernet_bytes(std::string_view bytes);
CenterNetOutput read_centernet(const std::filesystem::path& path);
void write_centernet(const CenterNetOutput& out, const std::filesystem::path& path);

/// `[{"center": f, "width": f, "score": f}, ...]`, at most 64 entries.
DetrOutput parse_detr(const nlohmann::json& doc, std::string video_id);
DetrOutput read_detr(const std::filesystem::path& path, std::string video_id);
nlohmann::ordered_json detr_to_json(const DetrOutput& out);

}  // namespace ovtad
