#include "ovtad/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "ovtad/error.hpp"
#include "ovtad/io.hpp"

namespace ovtad {

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

double require_number(const nlohmann::json& value, const std::string& what) {
  if (!value.is_number()) {
    throw ParseError(what + ": expected a number");
  }
  return value.get<double>();
}

}  // namespace

Segment Segment::make(double start, double end) {
  if (!std::isfinite(start) || !std::isfinite(end)) {
    throw InvariantError("segment bounds must be finite");
  }
  if (start < 0.0) {
    throw InvariantError("segment start " + fmt_num(start) + " is negative");
  }
  if (!(end > start)) {
    throw InvariantError("segment end " + fmt_num(end) + " must exceed start " + fmt_num(start));
  }
  return Segment{start, end};
}

std::string_view to_string(Subset subset) {
  switch (subset) {
    case Subset::training:
      return "training";
    case Subset::validation:
      return "validation";
    case Subset::testing:
      return "testing";
  }
  return "validation";
}

Subset parse_subset(std::string_view text) {
  if (text == "training") return Subset::training;
  if (text == "validation") return Subset::validation;
  if (text == "testing") return Subset::testing;
  throw ParseError("unknown subset '" + std::string(text) + "'");
}

bool AnnotatedDataset::has_label(std::string_view label) const {
  return std::binary_search(vocabulary.begin(), vocabulary.end(), label);
}

std::size_t AnnotatedDataset::annotation_count() const {
  std::size_t n = 0;
  for (const auto& [id, video] : videos) {
    n += video.annotations.size();
  }
  return n;
}

std::vector<std::string> normalize_vocabulary(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

AnnotatedDataset make_dataset(std::vector<VideoRecord> videos,
                              std::optional<std::vector<std::string>> vocabulary) {
  AnnotatedDataset ds;
  std::vector<std::string> seen;
  for (auto& video : videos) {
    if (video.video_id.empty()) {
      throw InvariantError("empty video_id");
    }
    if (!std::isfinite(video.duration) || video.duration <= 0.0) {
      throw InvariantError("video " + video.video_id + ": duration must be positive");
    }
    for (const auto& ann : video.annotations) {
      if (!(ann.segment.end > ann.segment.start) || ann.segment.start < 0.0 ||
          ann.segment.end > video.duration) {
        throw InvariantError("video " + video.video_id + ": annotation [" +
                             fmt_num(ann.segment.start) + ", " + fmt_num(ann.segment.end) +
                             "] outside [0, duration]");
      }
      seen.push_back(ann.label);
    }
    std::string id = video.video_id;
    if (!ds.videos.emplace(id, std::move(video)).second) {
      throw InvariantError("duplicate video_id " + id);
    }
  }
  if (vocabulary) {
    ds.vocabulary = normalize_vocabulary(std::move(*vocabulary));
    for (const auto& label : seen) {
      if (!ds.has_label(label)) {
        throw InvariantError("annotation label '" + label + "' is not in the vocabulary");
      }
    }
  } else {
    ds.vocabulary = normalize_vocabulary(std::move(seen));
  }
  return ds;
}

AnnotatedDataset parse_dataset(const nlohmann::json& doc, const DatasetLoadOptions& options,
                               Warnings* warnings) {
  if (!doc.is_object() || !doc.contains("database") || !doc["database"].is_object()) {
    throw ParseError("dataset: missing top-level \"database\" object");
  }
  std::vector<VideoRecord> videos;
  for (const auto& [id, entry] : doc["database"].items()) {
    if (!entry.is_object()) {
      throw ParseError("video " + id + ": expected an object");
    }
    VideoRecord video;
    video.video_id = id;
    if (!entry.contains("duration")) {
      throw ParseError("video " + id + ": missing duration");
    }
    video.duration = require_number(entry["duration"], "video " + id + " duration");
    if (entry.contains("subset")) {
      if (!entry["subset"].is_string()) {
        throw ParseError("video " + id + ": subset must be a string");
      }
      video.subset = parse_subset(entry["subset"].get<std::string>());
    }
    if (entry.contains("annotations")) {
      const auto& anns = entry["annotations"];
      if (!anns.is_array()) {
        throw ParseError("video " + id + ": annotations must be an array");
      }
      for (const auto& a : anns) {
        if (!a.is_object() || !a.contains("segment") || !a.contains("label")) {
          throw ParseError("video " + id + ": annotation needs segment and label");
        }
        const auto& seg = a["segment"];
        if (!seg.is_array() || seg.size() != 2) {
          throw ParseError("video " + id + ": segment must be [start, end]");
        }
        if (!a["label"].is_string()) {
          throw ParseError("video " + id + ": label must be a string");
        }
        double start = require_number(seg[0], "video " + id + " segment start");
        double end = require_number(seg[1], "video " + id + " segment end");
        Segment s;
        try {
          s = Segment::make(start, end);
        } catch (const InvariantError& e) {
          throw InvariantError("video " + id + ": " + e.what());
        }
        if (s.end > video.duration) {
          const double over = s.end - video.duration;
          if (over > options.overshoot_tolerance) {
            throw InvariantError("video " + id + ": annotation end " + fmt_num(s.end) +
                                 " exceeds duration " + fmt_num(video.duration));
          }
          if (warnings) {
            warnings->push_back("video " + id + ": annotation end " + fmt_num(s.end) +
                                " clamped to duration " + fmt_num(video.duration));
          }
          s.end = video.duration;
          if (!(s.end > s.start)) {
            throw InvariantError("video " + id + ": annotation starts at or after the video end");
          }
        }
        video.annotations.push_back(Annotation{s, a["label"].get<std::string>()});
      }
    }
    videos.push_back(std::move(video));
  }
  return make_dataset(std::move(videos), options.vocabulary);
}

AnnotatedDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                              const DatasetLoadOptions& options, Warnings* warnings) {
  switch (format) {
    case DatasetFormat::activitynet_json:
      try {
        return parse_dataset(io::read_json(path), options, warnings);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
      }
  }
  throw ArgumentError("unsupported dataset format");
}

nlohmann::ordered_json dataset_to_json(const AnnotatedDataset& dataset) {
  nlohmann::ordered_json db = nlohmann::ordered_json::object();
  for (const auto& [id, video] : dataset.videos) {
    nlohmann::ordered_json anns = nlohmann::ordered_json::array();
    for (const auto& a : video.annotations) {
      anns.push_back({{"segment", {a.segment.start, a.segment.end}}, {"label", a.label}});
    }
    db[id] = {{"duration", video.duration},
              {"subset", std::string(to_string(video.subset))},
              {"annotations", std::move(anns)}};
  }
  nlohmann::ordered_json doc;
  doc["database"] = std::move(db);
  return doc;
}

std::string serialize_dataset(const AnnotatedDataset& dataset) {
  return io::dump_json(dataset_to_json(dataset));
}

void save_dataset(const AnnotatedDataset& dataset, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_dataset(dataset));
}

std::vector<std::string> load_vocabulary(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      return normalize_vocabulary(nlohmann::json::parse(text).get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  std::vector<std::string> labels;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  return normalize_vocabulary(std::move(labels));
}

// ---------------------------------------------------------------------------
// Taxonomy

Taxonomy Taxonomy::build(std::vector<TaxonomyNode> nodes) {
  if (nodes.empty()) {
    throw InvariantError("taxonomy is empty");
  }
  Taxonomy t;
  std::sort(nodes.begin(), nodes.end(),
            [](const TaxonomyNode& a, const TaxonomyNode& b) { return a.id < b.id; });
  t.nodes_ = std::move(nodes);
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    if (!t.index_.emplace(t.nodes_[i].id, i).second) {
      throw InvariantError("duplicate taxonomy node id " + std::to_string(t.nodes_[i].id));
    }
    t.children_[t.nodes_[i].id];
  }
  for (const auto& n : t.nodes_) {
    if (!n.parent) continue;
    if (*n.parent == n.id) {
      throw InvariantError("taxonomy cycle: node " + std::to_string(n.id) + " is its own parent");
    }
    if (!t.index_.count(*n.parent)) {
      throw InvariantError("taxonomy node " + std::to_string(n.id) + " has unknown parent " +
                           std::to_string(*n.parent));
    }
    t.children_[*n.parent].push_back(n.id);
  }
  // Every walk towards a root must terminate within |nodes| steps.
  for (const auto& n : t.nodes_) {
    std::size_t steps = 0;
    const TaxonomyNode* cur = &n;
    while (cur->parent) {
      if (++steps > t.nodes_.size()) {
        throw InvariantError("taxonomy cycle through node " + std::to_string(n.id));
      }
      cur = &t.nodes_[t.index_.at(*cur->parent)];
    }
  }
  std::size_t roots = 0;
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    if (!t.nodes_[i].parent) {
      ++roots;
      t.root_ = i;
    }
  }
  if (roots > 1) {
    throw InvariantError("taxonomy has multiple roots (" + std::to_string(roots) + ")");
  }
  if (roots == 0) throw InvariantError("taxonomy has no root");
  for (const auto& n : t.nodes_) {
    if (!t.children_[n.id].empty()) continue;
    if (!t.leaf_by_name_.emplace(n.name, n.id).second) {
      throw InvariantError("duplicate taxonomy leaf name '" + n.name + "'");
    }
  }
  return t;
}

const TaxonomyNode& Taxonomy::node(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw ArgumentError("unknown taxonomy node " + std::to_string(id));
  }
  return nodes_[it->second];
}

const TaxonomyNode* Taxonomy::find_leaf(std::string_view name) const {
  auto it = leaf_by_name_.find(std::string(name));
  return it == leaf_by_name_.end() ? nullptr : &node(it->second);
}

const std::vector<int>& Taxonomy::children(int id) const {
  auto it = children_.find(id);
  if (it == children_.end()) {
    throw ArgumentError("unknown taxonomy node " + std::to_string(id));
  }
  return it->second;
}

std::vector<std::string> Taxonomy::leaf_names() const {
  std::vector<std::string> names;
  names.reserve(leaf_by_name_.size());
  for (const auto& [name, id] : leaf_by_name_) names.push_back(name);
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<int> Taxonomy::path_to_root(int id) const {
  std::vector<int> path{id};
  const TaxonomyNode* cur = &node(id);
  while (cur->parent) {
    path.push_back(*cur->parent);
    cur = &node(*cur->parent);
  }
  return path;
}

int Taxonomy::distance(int a, int b) const {
  const auto pa = path_to_root(a);
  const auto pb = path_to_root(b);
  // Both paths end at the root; strip the shared suffix.
  std::size_t i = pa.size();
  std::size_t j = pb.size();
  while (i > 0 && j > 0 && pa[i - 1] == pb[j - 1]) {
    --i;
    --j;
  }
  return static_cast<int>(i + j);
}

std::vector<std::string> Taxonomy::uncovered(const std::vector<std::string>& labels) const {
  std::vector<std::string> out;
  for (const auto& l : labels) {
    if (!find_leaf(l)) out.push_back(l);
  }
  return out;
}

std::string Taxonomy::content_hash() const {
  std::string canon;
  for (const auto& n : nodes_) {
    canon += std::to_string(n.id);
    canon += '\x1f';
    canon += n.name;
    canon += '\x1f';
    canon += n.parent ? std::to_string(*n.parent) : std::string("null");
    canon += '\x1e';
  }
  return io::hex64(io::fnv1a64(canon));
}

Taxonomy parse_taxonomy(const nlohmann::json& doc) {
  const nlohmann::json* arr = &doc;
  if (doc.is_object() && doc.contains("taxonomy")) {
    arr = &doc["taxonomy"];
  }
  if (!arr->is_array()) {
    throw ParseError("taxonomy: expected an array of nodes");
  }
  std::vector<TaxonomyNode> nodes;
  for (const auto& n : *arr) {
    if (!n.is_object() || !n.contains("nodeId") || !n.contains("nodeName") ||
        !n["nodeId"].is_number_integer() || !n["nodeName"].is_string()) {
      throw ParseError("taxonomy: node needs integer nodeId and string nodeName");
    }
    TaxonomyNode node;
    node.id = n["nodeId"].get<int>();
    node.name = n["nodeName"].get<std::string>();
    if (n.contains("parentId") && !n["parentId"].is_null()) {
      if (!n["parentId"].is_number_integer()) {
        throw ParseError("taxonomy: parentId must be an integer or null");
      }
      node.parent = n["parentId"].get<int>();
    }
    nodes.push_back(std::move(node));
  }
  return Taxonomy::build(std::move(nodes));
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  return parse_taxonomy(io::read_json(path));
}

}  // namespace ovtad
