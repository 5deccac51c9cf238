#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ovtad/core.hpp"

namespace ovtad {

/// Newline-delimited JSON, one detection per line:
/// {"video_id": str, "start": f, "end": f, "score": f, "label": str|null}.
/// Videos are written in id order, detections in stored order.
std::string serialize_segments(const DetectionsByVideo& detections);
DetectionsByVideo parse_segments(std::string_view text);

DetectionsByVideo read_segments_file(const std::filesystem::path& path);
void write_segments_file(const DetectionsByVideo& detections, const std::filesystem::path& path);

}  // namespace ovtad
