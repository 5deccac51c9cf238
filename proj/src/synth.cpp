#include "ovtad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ovtad/error.hpp"
#include "ovtad/rng.hpp"
#include "ovtad/segments_file.hpp"
#include "ovtad/trainmath.hpp"

namespace ovtad {

namespace {

std::size_t uniform_int(SplitMix64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.bounded(hi - lo + 1));
}

std::vector<double> random_unit(SplitMix64& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

// Modified Gram-Schmidt over Gaussian draws.
std::vector<std::vector<double>> orthonormal_rows(SplitMix64& rng, std::size_t rows, std::size_t dim) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < rows) {
    std::vector<double> v = random_unit(rng, dim);
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += v[d] * b[d];
      for (std::size_t d = 0; d < dim; ++d) v[d] -= dot * b[d];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

struct Planted {
  Segment segment;
  std::size_t direction;  // class index, or n_classes for a distractor
};

}  // namespace

void SynthSpec::validate() const {
  if (n_videos == 0 || n_classes == 0) throw ArgumentError("synth: need at least one video and class");
  if (min_duration == 0 || max_duration < min_duration) throw ArgumentError("synth: bad duration range");
  if (max_segments < min_segments) throw ArgumentError("synth: bad segments-per-video range");
  if (min_segment_length == 0 || max_segment_length < min_segment_length) {
    throw ArgumentError("synth: bad segment length range");
  }
  if (min_duration < min_segment_length) {
    throw ArgumentError("synth: videos shorter than the minimum segment length");
  }
  const std::size_t directions = n_classes + (distractor_rate > 0.0 ? 1 : 0);
  if (dim < directions) {
    throw ArgumentError("synth: embedding dim " + std::to_string(dim) + " cannot hold " +
                        std::to_string(directions) + " orthonormal directions");
  }
  if (!(feature_sigma >= 0.0) || !(boundary_jitter >= 0.0) || !(score_noise >= 0.0)) {
    throw ArgumentError("synth: noise levels must be >= 0");
  }
  if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0)) {
    throw ArgumentError("synth: distractor rate must lie in [0, 1]");
  }
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const std::size_t directions = spec.n_classes + (spec.distractor_rate > 0.0 ? 1 : 0);
  const auto basis = orthonormal_rows(rng, directions, spec.dim);

  SynthData out;
  std::vector<std::string> labels;
  std::vector<double> text_rows;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    char name[32];
    std::snprintf(name, sizeof(name), "class_%02zu", c);
    labels.emplace_back(name);
    for (double x : basis[c]) text_rows.push_back(static_cast<float>(x));
  }
  out.texts = TextEmbeddingSet::make(labels, spec.dim, std::move(text_rows));

  std::vector<VideoRecord> videos;
  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    char vid[32];
    std::snprintf(vid, sizeof(vid), "synth_%04zu", v);
    const std::size_t duration = uniform_int(rng, spec.min_duration, spec.max_duration);

    // Whole-second segments separated by at least one empty second.
    std::size_t k = uniform_int(rng, spec.min_segments, spec.max_segments);
    const std::size_t max_len = std::min(spec.max_segment_length, duration);
    std::vector<std::size_t> lengths(k);
    for (auto& len : lengths) len = uniform_int(rng, spec.min_segment_length, max_len);
    auto needed = [&] {
      std::size_t total = 0;
      for (auto len : lengths) total += len;
      return total + (lengths.empty() ? 0 : lengths.size() - 1);
    };
    while (!lengths.empty() && needed() > duration) lengths.pop_back();
    k = lengths.size();
    const std::size_t slack = duration - needed();
    std::vector<std::size_t> cuts(k);
    for (auto& c : cuts) c = uniform_int(rng, 0, slack);
    std::sort(cuts.begin(), cuts.end());

    std::vector<Planted> planted;
    std::size_t pos = k > 0 ? cuts[0] : 0;
    for (std::size_t i = 0; i < k; ++i) {
      const bool distractor = spec.distractor_rate > 0.0 && rng.uniform() < spec.distractor_rate;
      const std::size_t cls = static_cast<std::size_t>(rng.bounded(spec.n_classes));
      planted.push_back({Segment{static_cast<double>(pos), static_cast<double>(pos + lengths[i])},
                         distractor ? spec.n_classes : cls});
      const std::size_t gap = i + 1 < k ? cuts[i + 1] - cuts[i] : 0;
      pos += lengths[i] + 1 + gap;
    }

    std::vector<float> frames;
    frames.reserve(duration * spec.dim);
    std::vector<std::size_t> owner(duration, SIZE_MAX);
    for (std::size_t i = 0; i < planted.size(); ++i) {
      for (auto t = static_cast<std::size_t>(planted[i].segment.start);
           t < static_cast<std::size_t>(planted[i].segment.end); ++t) {
        owner[t] = i;
      }
    }
    for (std::size_t t = 0; t < duration; ++t) {
      std::vector<double> f;
      if (owner[t] == SIZE_MAX) {
        f = random_unit(rng, spec.dim);
      } else {
        f = basis[planted[owner[t]].direction];
        double norm = 0.0;
        for (auto& x : f) {
          x += spec.feature_sigma * rng.normal();
          norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : f) x /= norm;
      }
      for (double x : f) frames.push_back(static_cast<float>(x));
    }
    out.features.emplace(vid, FeatureSequence::make(vid, 1.0f, spec.dim, std::move(frames)));

    VideoRecord record;
    record.video_id = vid;
    record.duration = static_cast<double>(duration);
    record.subset = spec.subset;
    std::vector<Segment> all_segments;
    auto& oracle = out.oracle_detections[vid];
    const double d = static_cast<double>(duration);
    for (const auto& p : planted) {
      all_segments.push_back(p.segment);
      if (p.direction < spec.n_classes) {
        record.annotations.push_back({p.segment, labels[p.direction]});
        ++out.planted;
      } else {
        ++out.distractors;
      }
      double s = std::clamp(p.segment.start + spec.boundary_jitter * rng.normal(), 0.0, d);
      double e = std::clamp(p.segment.end + spec.boundary_jitter * rng.normal(), 0.0, d);
      if (e < s) std::swap(s, e);
      if (e - s < 0.5) {
        const double c = std::clamp(0.5 * (s + e), 0.25, d - 0.25);
        s = c - 0.25;
        e = c + 0.25;
      }
      const double score = std::clamp(0.9 + spec.score_noise * rng.normal(), 0.01, 1.0);
      oracle.push_back({Segment{s, e}, score, std::nullopt});
    }
    videos.push_back(std::move(record));

    CenterNetOutput head = render_targets(all_segments, duration, 1.0).output;
    head.video_id = vid;
    out.heads.emplace(vid, std::move(head));
  }
  out.dataset = make_dataset(std::move(videos), labels);
  return out;
}

void write_synth(const SynthData& data, const std::filesystem::path& dir) {
  save_dataset(data.dataset, dir / "dataset.json");
  save_text_embeddings(data.texts, dir / "texts.json");
  write_segments_file(data.oracle_detections, dir / "oracle_detections.jsonl");
  for (const auto& [id, seq] : data.features) write_features(seq, dir / "features" / (id + ".ovtf"));
  for (const auto& [id, head] : data.heads) write_centernet(head, dir / "heads" / (id + ".ovth"));
}

}  // namespace ovtad
