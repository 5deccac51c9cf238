#include "ovtad/detdecode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "binary_io.hpp"
#include "ovtad/error.hpp"
#include "ovtad/io.hpp"
#include "ovtad/metrics.hpp"

namespace ovtad {

namespace {

constexpr std::array<std::string_view, 3> kChannels = {"heatmap", "width", "offset"};

void check_centernet(const CenterNetOutput& out) {
  if (out.widths.size() != out.heatmap.size() || out.offsets.size() != out.heatmap.size()) {
    throw ArgumentError("centernet output " + out.video_id + ": channel lengths differ");
  }
  if (!(out.stride > 0.0) || !std::isfinite(out.stride)) {
    throw ArgumentError("centernet output " + out.video_id + ": stride must be positive");
  }
  for (std::size_t i = 0; i < out.cells(); ++i) {
    if (!std::isfinite(out.heatmap[i]) || !std::isfinite(out.widths[i]) || !std::isfinite(out.offsets[i])) {
      throw ArgumentError("centernet output " + out.video_id + ": non-finite value at cell " +
                          std::to_string(i));
    }
    if (out.widths[i] < 0.0) {
      throw ArgumentError("centernet output " + out.video_id + ": negative width at cell " +
                          std::to_string(i));
    }
    if (out.offsets[i] < -0.5 || out.offsets[i] > 1.5) {
      throw ArgumentError("centernet output " + out.video_id + ": offset outside [-0.5, 1.5] at cell " +
                          std::to_string(i));
    }
  }
}

}  // namespace

std::vector<double> CenterNetOutput::activated_heatmap() const {
  std::vector<double> h = heatmap;
  if (heatmap_is_logits) {
    for (auto& v : h) v = 1.0 / (1.0 + std::exp(-v));
  }
  for (double v : h) {
    if (v < 0.0 || v > 1.0) {
      throw ArgumentError("centernet output " + video_id + ": heatmap value outside [0, 1]");
    }
  }
  return h;
}

std::vector<SegmentDetection> decode_centernet(const CenterNetOutput& out,
                                               const CenterNetDecodeOptions& options) {
  check_centernet(out);
  if (options.top_k < 1) {
    throw ArgumentError("top_k must be >= 1");
  }
  const std::vector<double> heat = out.activated_heatmap();
  const std::size_t n = heat.size();
  const std::size_t w = options.peak_window;

  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= w ? i - w : 0;
    const std::size_t hi = std::min(n - 1, i + w);
    bool strict = true;
    for (std::size_t j = lo; j <= hi && strict; ++j) {
      if (j != i && heat[j] >= heat[i]) strict = false;
    }
    if (strict) peaks.push_back(i);
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](std::size_t a, std::size_t b) { return heat[a] > heat[b]; });
  if (peaks.size() > options.top_k) peaks.resize(options.top_k);

  const double bound = options.duration.value_or(static_cast<double>(n) * out.stride);
  std::vector<SegmentDetection> dets;
  dets.reserve(peaks.size());
  for (std::size_t i : peaks) {
    const double center = (static_cast<double>(i) + out.offsets[i]) * out.stride;
    const double half = out.widths[i] * out.stride / 2.0;
    const double start = std::clamp(center - half, 0.0, bound);
    const double end = std::clamp(center + half, 0.0, bound);
    if (!(end > start)) continue;
    dets.push_back({Segment{start, end}, heat[i], std::nullopt});
  }
  return dets;
}

std::vector<SegmentDetection> decode_detr(const DetrOutput& out, double duration,
                                          double score_threshold) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ArgumentError("detr decode for " + out.video_id + ": duration must be positive");
  }
  std::vector<SegmentDetection> dets;
  for (const auto& p : out.proposals) {
    if (p.score < score_threshold) continue;
    const double start = std::clamp((p.center - p.width / 2.0) * duration, 0.0, duration);
    const double end = std::clamp((p.center + p.width / 2.0) * duration, 0.0, duration);
    if (!(end > start)) continue;
    dets.push_back({Segment{start, end}, p.score, std::nullopt});
  }
  return dets;
}

std::vector<SegmentDetection> nms(const std::vector<SegmentDetection>& detections,
                                  double iou_threshold, bool class_aware) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ArgumentError("NMS IoU threshold must lie in (0, 1]");
  }
  for (const auto& d : detections) {
    if (!std::isfinite(d.score)) throw ArgumentError("NMS input has a non-finite score");
  }
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = detections[a];
    const auto& db = detections[b];
    if (da.score != db.score) return da.score > db.score;
    return da.segment.start < db.segment.start;
  });
  std::vector<SegmentDetection> kept;
  for (std::size_t idx : order) {
    const auto& cand = detections[idx];
    bool keep = true;
    for (const auto& k : kept) {
      if (class_aware && k.label != cand.label) continue;
      if (temporal_iou(k.segment, cand.segment) >= iou_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(cand);
  }
  return kept;
}

std::string encode_centernet(const CenterNetOutput& out) {
  check_centernet(out);
  if (out.cells() == 0) throw ArgumentError("centernet output " + out.video_id + " is empty");
  detail::ByteWriter w;
  w.bytes(std::string_view(kHeadMagic, 4));
  w.u32(kHeadVersion);
  w.u32(static_cast<std::uint32_t>(kChannels.size()));
  w.u32(static_cast<std::uint32_t>(out.cells()));
  w.f32(static_cast<float>(out.stride));
  w.u16(static_cast<std::uint16_t>(out.video_id.size()));
  w.bytes(out.video_id);
  w.u8(out.heatmap_is_logits ? 1 : 0);
  for (auto name : kChannels) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
  }
  for (std::size_t i = 0; i < out.cells(); ++i) {
    w.f32(static_cast<float>(out.heatmap[i]));
    w.f32(static_cast<float>(out.widths[i]));
    w.f32(static_cast<float>(out.offsets[i]));
  }
  return w.take();
}

CenterNetOutput decode_centernet_bytes(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.bytes(4, "magic") != std::string_view(kHeadMagic, 4)) {
    throw ParseError("bad magic: not an OVTH head-output file");
  }
  const auto version = r.u32("version");
  if (version != kHeadVersion) {
    throw ParseError("unsupported head-output version " + std::to_string(version));
  }
  const auto channels = r.u32("channel count");
  const auto cells = r.u32("cell count");
  const float stride = r.f32("stride");
  const auto name_len = r.u16("video_id length");
  CenterNetOutput out;
  out.video_id = std::string(r.bytes(name_len, "video_id"));
  out.stride = stride;
  out.heatmap_is_logits = (r.u8("flags") & 1u) != 0;
  if (channels == 0 || cells == 0) {
    throw ParseError("head-output file declares no data");
  }
  std::vector<int> slot(channels, -1);
  for (std::uint32_t c = 0; c < channels; ++c) {
    const auto len = r.u16("channel name length");
    const auto name = r.bytes(len, "channel name");
    for (std::size_t k = 0; k < kChannels.size(); ++k) {
      if (name == kChannels[k]) slot[c] = static_cast<int>(k);
    }
  }
  for (std::size_t k = 0; k < kChannels.size(); ++k) {
    if (std::count(slot.begin(), slot.end(), static_cast<int>(k)) != 1) {
      throw ParseError("head-output file must name channel '" + std::string(kChannels[k]) + "' exactly once");
    }
  }
  const std::uint64_t count = static_cast<std::uint64_t>(channels) * cells;
  if (count * 4 > r.remaining()) throw ParseError("truncated head-output payload");
  if (count * 4 < r.remaining()) throw ParseError("trailing bytes after head-output payload");
  out.heatmap.resize(cells);
  out.widths.resize(cells);
  out.offsets.resize(cells);
  for (std::uint32_t i = 0; i < cells; ++i) {
    for (std::uint32_t c = 0; c < channels; ++c) {
      const double v = r.f32("payload");
      switch (slot[c]) {
        case 0:
          out.heatmap[i] = v;
          break;
        case 1:
          out.widths[i] = v;
          break;
        case 2:
          out.offsets[i] = v;
          break;
        default:
          break;  // unknown extra channel
      }
    }
  }
  try {
    check_centernet(out);
  } catch (const ArgumentError& e) {
    throw ParseError(e.what());
  }
  return out;
}

CenterNetOutput read_centernet(const std::filesystem::path& path) {
  try {
    return decode_centernet_bytes(io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_centernet(const CenterNetOutput& out, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_centernet(out));
}

DetrOutput parse_detr(const nlohmann::json& doc, std::string video_id) {
  if (!doc.is_array()) throw ParseError("detr proposals for " + video_id + ": expected an array");
  if (doc.size() > kMaxDetrProposals) {
    throw ParseError("detr proposals for " + video_id + ": " + std::to_string(doc.size()) +
                     " entries exceed the maximum of " + std::to_string(kMaxDetrProposals));
  }
  DetrOutput out;
  out.video_id = std::move(video_id);
  try {
    for (const auto& p : doc) {
      DetrProposal prop{p.at("center").get<double>(), p.at("width").get<double>(),
                        p.at("score").get<double>()};
      if (!(prop.center >= 0.0 && prop.center <= 1.0) || !(prop.width > 0.0 && prop.width <= 1.0) ||
          !(prop.score >= 0.0 && prop.score <= 1.0)) {
        throw ParseError("detr proposal for " + out.video_id + " outside the normalized ranges");
      }
      out.proposals.push_back(prop);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("detr proposals for " + out.video_id + ": " + e.what());
  }
  return out;
}

DetrOutput read_detr(const std::filesystem::path& path, std::string video_id) {
  return parse_detr(io::read_json(path), std::move(video_id));
}

nlohmann::ordered_json detr_to_json(const DetrOutput& out) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& p : out.proposals) {
    arr.push_back({{"center", p.center}, {"width", p.width}, {"score", p.score}});
  }
  return arr;
}

}  // namespace ovtad
