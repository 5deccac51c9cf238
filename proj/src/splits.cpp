#include "ovtad/splits.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ovtad/error.hpp"
#include "ovtad/io.hpp"
#include "ovtad/rng.hpp"

namespace ovtad {

namespace {

bool sorted_contains(const std::vector<std::string>& v, std::string_view x) {
  return std::binary_search(v.begin(), v.end(), x);
}

std::string_view kind_name(SplitProvenance::Kind kind) {
  switch (kind) {
    case SplitProvenance::Kind::random:
      return "random";
    case SplitProvenance::Kind::smart:
      return "smart";
    case SplitProvenance::Kind::explicit_file:
      return "explicit";
  }
  return "explicit";
}

}  // namespace

std::string_view to_string(SplitSide side) { return side == SplitSide::train ? "train" : "eval"; }

SplitSide parse_split_side(std::string_view text) {
  if (text == "train") return SplitSide::train;
  if (text == "eval") return SplitSide::eval;
  throw ArgumentError("split side must be 'train' or 'eval', got '" + std::string(text) + "'");
}

std::vector<std::string> LabelSplit::vocabulary() const {
  std::vector<std::string> all;
  all.reserve(train_labels.size() + eval_labels.size());
  std::merge(train_labels.begin(), train_labels.end(), eval_labels.begin(), eval_labels.end(),
             std::back_inserter(all));
  return all;
}

const std::vector<std::string>& LabelSplit::labels(SplitSide side) const {
  return side == SplitSide::train ? train_labels : eval_labels;
}

bool LabelSplit::contains(SplitSide side, std::string_view label) const {
  return sorted_contains(labels(side), label);
}

LabelSplit make_split(std::string name, std::vector<std::string> train,
                      std::vector<std::string> eval, SplitProvenance provenance) {
  auto check_unique = [](std::vector<std::string>& v, const char* side) {
    std::sort(v.begin(), v.end());
    auto dup = std::adjacent_find(v.begin(), v.end());
    if (dup != v.end()) {
      throw InvariantError(std::string("label '") + *dup + "' listed twice in " + side);
    }
  };
  check_unique(train, "train");
  check_unique(eval, "eval");
  if (eval.empty()) {
    throw InvariantError("split '" + name + "' has no eval labels");
  }
  std::vector<std::string> both;
  std::set_intersection(train.begin(), train.end(), eval.begin(), eval.end(),
                        std::back_inserter(both));
  if (!both.empty()) {
    throw InvariantError("label '" + both.front() + "' is on both sides of split '" + name + "'");
  }
  return LabelSplit{std::move(name), std::move(train), std::move(eval), std::move(provenance)};
}

std::size_t eval_label_count(std::size_t vocabulary_size, double eval_fraction) {
  return static_cast<std::size_t>(std::floor(eval_fraction * static_cast<double>(vocabulary_size) + 0.5));
}

LabelSplit generate_random_split(const std::vector<std::string>& vocabulary, double eval_fraction,
                                 std::uint64_t seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ArgumentError("eval fraction must lie in (0, 1)");
  }
  std::vector<std::string> labels = normalize_vocabulary(vocabulary);
  if (labels.empty()) {
    throw ArgumentError("cannot split an empty vocabulary");
  }
  const std::size_t k = eval_label_count(labels.size(), eval_fraction);
  if (k < 1) {
    throw ArgumentError("eval fraction selects no labels from a vocabulary of " +
                        std::to_string(labels.size()));
  }
  SplitMix64 rng(seed);
  fisher_yates(labels, rng);
  std::vector<std::string> eval(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::string> train(labels.begin() + static_cast<std::ptrdiff_t>(k), labels.end());

  SplitProvenance prov;
  prov.kind = SplitProvenance::Kind::random;
  prov.seed = seed;
  prov.fraction = eval_fraction;
  char name[64];
  std::snprintf(name, sizeof(name), "random-%g-seed%llu", eval_fraction,
                static_cast<unsigned long long>(seed));
  return make_split(name, std::move(train), std::move(eval), prov);
}

AnnotatedDataset apply_split(const AnnotatedDataset& dataset, const LabelSplit& split,
                             SplitSide side) {
  if (split.vocabulary() != dataset.vocabulary) {
    throw ArgumentError("split '" + split.name + "' vocabulary (" +
                        std::to_string(split.vocabulary().size()) +
                        " labels) does not match the dataset vocabulary (" +
                        std::to_string(dataset.vocabulary.size()) + " labels)");
  }
  AnnotatedDataset out;
  out.vocabulary = split.labels(side);
  for (const auto& [id, video] : dataset.videos) {
    VideoRecord kept = video;
    kept.annotations.clear();
    for (const auto& ann : video.annotations) {
      if (split.contains(side, ann.label)) kept.annotations.push_back(ann);
    }
    if (!kept.annotations.empty()) out.videos.emplace(id, std::move(kept));
  }
  return out;
}

nlohmann::ordered_json SmartSplitReport::to_json() const {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json row;
    row["eval_label"] = e.eval_label;
    row["satisfied"] = e.satisfied;
    row["sibling_train_labels"] = e.sibling_train_labels;
    row["nearest_train_label"] = e.nearest_train_label;
    row["nearest_train_distance"] = e.nearest_train_distance;
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json doc;
  doc["passed"] = passed;
  doc["eval_labels"] = eval_count;
  doc["train_labels"] = train_count;
  doc["satisfied"] = satisfied;
  doc["unsatisfied"] = unsatisfied;
  doc["perceptual_similarity"] = "unverifiable: pair selection was a subjective judgement";
  doc["entries"] = std::move(rows);
  return doc;
}

SmartSplitReport validate_smart_split(const LabelSplit& split, const Taxonomy& taxonomy) {
  for (const auto* side : {&split.train_labels, &split.eval_labels}) {
    for (const auto& label : *side) {
      if (!taxonomy.find_leaf(label)) {
        throw ArgumentError("split label '" + label + "' is not a taxonomy leaf");
      }
    }
  }
  SmartSplitReport report;
  report.eval_count = split.eval_labels.size();
  report.train_count = split.train_labels.size();
  for (const auto& label : split.eval_labels) {
    const TaxonomyNode& leaf = *taxonomy.find_leaf(label);
    SmartPairCheck check;
    check.eval_label = label;
    if (leaf.parent) {
      for (int sib : taxonomy.children(*leaf.parent)) {
        const TaxonomyNode& s = taxonomy.node(sib);
        if (sib != leaf.id && taxonomy.is_leaf(sib) && split.contains(SplitSide::train, s.name)) {
          check.sibling_train_labels.push_back(s.name);
        }
      }
      std::sort(check.sibling_train_labels.begin(), check.sibling_train_labels.end());
    }
    for (const auto& train : split.train_labels) {
      const int d = taxonomy.distance(leaf.id, taxonomy.find_leaf(train)->id);
      if (check.nearest_train_distance < 0 || d < check.nearest_train_distance) {
        check.nearest_train_distance = d;
        check.nearest_train_label = train;
      }
    }
    check.satisfied = !check.sibling_train_labels.empty();
    (check.satisfied ? report.satisfied : report.unsatisfied) += 1;
    report.entries.push_back(std::move(check));
  }
  report.passed = report.unsatisfied == 0;
  return report;
}

nlohmann::ordered_json split_to_json(const LabelSplit& split) {
  nlohmann::ordered_json prov;
  prov["kind"] = kind_name(split.provenance.kind);
  switch (split.provenance.kind) {
    case SplitProvenance::Kind::random:
      prov["seed"] = split.provenance.seed;
      prov["fraction"] = split.provenance.fraction;
      break;
    case SplitProvenance::Kind::smart:
      if (split.provenance.taxonomy_hash.empty()) {
        prov["taxonomy_hash"] = nullptr;
      } else {
        prov["taxonomy_hash"] = split.provenance.taxonomy_hash;
      }
      break;
    case SplitProvenance::Kind::explicit_file:
      prov["file"] = split.provenance.file;
      break;
  }
  nlohmann::ordered_json doc;
  doc["name"] = split.name;
  doc["train"] = split.train_labels;
  doc["eval"] = split.eval_labels;
  doc["provenance"] = std::move(prov);
  return doc;
}

std::string serialize_split(const LabelSplit& split) { return io::dump_json(split_to_json(split)); }

void export_split(const LabelSplit& split, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_split(split));
}

LabelSplit parse_split(const nlohmann::json& doc, const std::string& origin) {
  try {
    if (!doc.is_object() || !doc.contains("train") || !doc.contains("eval")) {
      throw ParseError("split file needs \"train\" and \"eval\" arrays");
    }
    SplitProvenance prov;
    prov.file = origin;
    if (doc.contains("provenance") && doc["provenance"].is_object()) {
      const auto& p = doc["provenance"];
      const std::string kind = p.value("kind", "explicit");
      if (kind == "random") {
        prov.kind = SplitProvenance::Kind::random;
        prov.file.clear();
        prov.seed = p.at("seed").get<std::uint64_t>();
        prov.fraction = p.at("fraction").get<double>();
      } else if (kind == "smart") {
        prov.kind = SplitProvenance::Kind::smart;
        prov.file.clear();
        if (p.contains("taxonomy_hash") && p["taxonomy_hash"].is_string()) {
          prov.taxonomy_hash = p["taxonomy_hash"].get<std::string>();
        }
      } else if (kind == "explicit") {
        prov.kind = SplitProvenance::Kind::explicit_file;
        if (p.contains("file") && p["file"].is_string()) prov.file = p["file"].get<std::string>();
      } else {
        throw ParseError("unknown split provenance kind '" + kind + "'");
      }
    }
    return make_split(doc.value("name", std::string("unnamed")),
                      doc["train"].get<std::vector<std::string>>(),
                      doc["eval"].get<std::vector<std::string>>(), std::move(prov));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("split file: ") + e.what());
  }
}

LabelSplit import_split(const std::filesystem::path& path) {
  return parse_split(io::read_json(path), path.string());
}

}  // namespace ovtad
