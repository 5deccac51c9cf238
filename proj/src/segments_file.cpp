#include "ovtad/segments_file.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "ovtad/error.hpp"
#include "ovtad/io.hpp"

namespace ovtad {

std::string serialize_segments(const DetectionsByVideo& detections) {
  std::string out;
  for (const auto& [id, dets] : detections) {
    for (const auto& d : dets) {
      nlohmann::ordered_json row;
      row["video_id"] = id;
      row["start"] = d.segment.start;
      row["end"] = d.segment.end;
      row["score"] = d.score;
      if (d.label) {
        row["label"] = *d.label;
      } else {
        row["label"] = nullptr;
      }
      out += row.dump();
      out += '\n';
    }
  }
  return out;
}

DetectionsByVideo parse_segments(std::string_view text) {
  DetectionsByVideo out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "segments line " + std::to_string(line_no);
    try {
      const auto row = nlohmann::json::parse(line);
      SegmentDetection det;
      const auto id = row.at("video_id").get<std::string>();
      try {
        det.segment = Segment::make(row.at("start").get<double>(), row.at("end").get<double>());
      } catch (const InvariantError& e) {
        throw ParseError(where + ": " + e.what());
      }
      det.score = row.at("score").get<double>();
      if (!std::isfinite(det.score) || det.score < 0.0) {
        throw ParseError(where + ": score must be finite and >= 0");
      }
      if (row.contains("label") && !row["label"].is_null()) {
        det.label = row["label"].get<std::string>();
      }
      out[id].push_back(std::move(det));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

DetectionsByVideo read_segments_file(const std::filesystem::path& path) {
  try {
    return parse_segments(io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_segments_file(const DetectionsByVideo& detections, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_segments(detections));
}

}  // namespace ovtad
