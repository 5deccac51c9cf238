#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "ovtad/error.hpp"
#include "ovtad/featurestore.hpp"
#include "ovtad/io.hpp"
#include "ovtad/rng.hpp"
#include "support.hpp"

using namespace ovtad;

namespace {

FeatureSequence random_sequence(SplitMix64& rng, std::string id, std::size_t frames, std::size_t dim,
                                float fps = 1.0f) {
  std::vector<float> data(frames * dim);
  for (auto& x : data) x = static_cast<float>(rng.normal());
  return FeatureSequence::make(std::move(id), fps, dim, std::move(data));
}

// Row t: every coordinate equals t, plus d/100 in coordinate d.
FeatureSequence ramp(std::size_t frames, std::size_t dim) {
  std::vector<float> data;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < dim; ++d) data.push_back(static_cast<float>(t) + static_cast<float>(d) / 100.0f);
  }
  return FeatureSequence::make("ramp", 1.0f, dim, std::move(data));
}

std::vector<double> brute_force_pool(const FeatureSequence& seq, double start, double end) {
  // Enumerates rows directly from the rule: row i is covered iff
  // floor(start*fps) <= i < ceil(end*fps).
  std::vector<double> sum(seq.dim, 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < seq.frames(); ++i) {
    const double lo = std::floor(start * seq.fps);
    const double hi = std::ceil(end * seq.fps);
    if (static_cast<double>(i) >= lo && static_cast<double>(i) < hi) {
      for (std::size_t d = 0; d < seq.dim; ++d) sum[d] += seq.row(i)[d];
      ++n;
    }
  }
  for (auto& s : sum) s /= static_cast<double>(n);
  return sum;
}

std::string put_u32(std::string bytes, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return bytes;
}

}  // namespace

TEST_CASE("pooling [1, 3) averages rows 1 and 2") {
  const auto seq = ramp(5, 3);
  const auto pooled = pool_segment(seq, Segment{1.0, 3.0});
  for (std::size_t d = 0; d < 3; ++d) {
    const double r1 = static_cast<double>(seq.row(1)[d]);
    const double r2 = static_cast<double>(seq.row(2)[d]);
    CHECK(pooled[d] == (r1 + r2) / 2.0);
    CHECK(pooled[d] == doctest::Approx(1.5 + static_cast<double>(d) / 100.0).epsilon(1e-7));
  }
  const auto range = covered_frames(seq, Segment{1.0, 3.0});
  CHECK(range.first == 1);
  CHECK(range.last == 3);
}

TEST_CASE("pooling [0.4, 2.6) covers rows 0 to 2") {
  const auto seq = ramp(5, 2);
  const auto range = covered_frames(seq, Segment{0.4, 2.6});
  CHECK(range.first == 0);
  CHECK(range.last == 3);
  const auto pooled = pool_segment(seq, Segment{0.4, 2.6});
  const auto oracle = brute_force_pool(seq, 0.4, 2.6);
  for (std::size_t d = 0; d < 2; ++d) CHECK(pooled[d] == oracle[d]);
}

TEST_CASE("pooling matches the brute-force row rule on random segments") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const float fps = trial % 3 == 0 ? 2.0f : 1.0f;
    const auto seq = random_sequence(rng, "v", 5 + rng.bounded(40), 1 + rng.bounded(6), fps);
    const double duration = static_cast<double>(seq.frames()) / fps;
    const double s = rng.uniform(0.0, duration - 0.1);
    const double e = std::min(duration, s + rng.uniform(0.05, duration));
    if (!(e > s)) continue;
    const auto pooled = pool_segment(seq, Segment{s, e});
    const auto oracle = brute_force_pool(seq, s, e);
    const auto range = covered_frames(seq, Segment{s, e});
    for (std::size_t d = 0; d < seq.dim; ++d) {
      CHECK(pooled[d] == doctest::Approx(oracle[d]).epsilon(1e-12));
      // Mean convexity.
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t t = range.first; t < range.last; ++t) {
        lo = std::min<double>(lo, seq.row(t)[d]);
        hi = std::max<double>(hi, seq.row(t)[d]);
      }
      CHECK(pooled[d] >= lo - 1e-12);
      CHECK(pooled[d] <= hi + 1e-12);
    }
  }
}

TEST_CASE("segments past the feature end clamp, and misses are errors") {
  const auto seq = ramp(4, 1);
  auto r = covered_frames(seq, Segment{2.5, 9.0});
  CHECK(r.first == 2);
  CHECK(r.last == 4);
  CHECK_THROWS_AS(covered_frames(seq, Segment{4.0, 6.0}), ArgumentError);
  // A sub-row segment still covers its row.
  r = covered_frames(seq, Segment{1.2, 1.3});
  CHECK(r.first == 1);
  CHECK(r.last == 2);
}

TEST_CASE("ensemble truncates to the shortest input and concatenates dims") {
  SplitMix64 rng(3);
  const auto a = random_sequence(rng, "v", 120, 4);
  const auto b = random_sequence(rng, "v", 119, 2);
  const std::vector<FeatureSequence> parts{a, b};
  const auto e = ensemble(parts);
  CHECK(e.frames() == 119);
  CHECK(e.dim == 6);
  for (std::size_t t = 0; t < 119; ++t) {
    for (std::size_t d = 0; d < 4; ++d) REQUIRE(e.row(t)[d] == a.row(t)[d]);
    for (std::size_t d = 0; d < 2; ++d) REQUIRE(e.row(t)[4 + d] == b.row(t)[d]);
  }
}

TEST_CASE("ensemble of 512 + 1024 + 128 dims gives 1664") {
  SplitMix64 rng(4);
  const std::vector<FeatureSequence> parts{random_sequence(rng, "v", 6, 512), random_sequence(rng, "v", 7, 1024),
                                           random_sequence(rng, "v", 6, 128)};
  const auto e = ensemble(parts);
  CHECK(e.dim == 1664);
  CHECK(e.frames() == 6);
}

TEST_CASE("ensemble then pool equals the concatenated pools") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t = 3 + rng.bounded(30);
    const std::vector<FeatureSequence> parts{random_sequence(rng, "v", t + rng.bounded(3), 1 + rng.bounded(5)),
                                             random_sequence(rng, "v", t, 1 + rng.bounded(5))};
    const auto e = ensemble(parts);
    const double s = rng.uniform(0.0, static_cast<double>(t) - 1.0);
    const Segment seg{s, s + rng.uniform(0.1, static_cast<double>(t) - s)};
    const auto joint = pool_segment(e, seg);
    std::vector<double> concat;
    for (const auto& p : parts) {
      FeatureSequence trimmed = p;
      trimmed.data.resize(t * p.dim);
      const auto pooled = pool_segment(trimmed, seg);
      concat.insert(concat.end(), pooled.begin(), pooled.end());
    }
    CHECK(joint == concat);
  }
}

TEST_CASE("ensemble rejects mismatched inputs") {
  SplitMix64 rng(1);
  const std::vector<FeatureSequence> ids{random_sequence(rng, "a", 3, 2), random_sequence(rng, "b", 3, 2)};
  CHECK_THROWS_AS(ensemble(ids), ArgumentError);
  const std::vector<FeatureSequence> fps{random_sequence(rng, "a", 3, 2), random_sequence(rng, "a", 3, 2, 2.0f)};
  CHECK_THROWS_AS(ensemble(fps), ArgumentError);
  CHECK_THROWS_AS(ensemble(std::span<const FeatureSequence>{}), ArgumentError);
}

TEST_CASE("feature files survive write, read, write byte-identically") {
  testing::TempDir dir;
  SplitMix64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto seq = random_sequence(rng, "video_" + std::to_string(trial), 1 + rng.bounded(50), 1 + rng.bounded(40),
                               trial % 2 ? 1.0f : 2.5f);
    seq.data[0] = -0.0f;
    write_features(seq, dir / "a.ovtf");
    const auto back = read_features(dir / "a.ovtf");
    CHECK(back == seq);
    CHECK(std::signbit(back.data[0]));
    write_features(back, dir / "b.ovtf");
    CHECK(io::read_file(dir / "a.ovtf") == io::read_file(dir / "b.ovtf"));
  }
}

TEST_CASE("feature container layout") {
  const auto seq = FeatureSequence::make("ab", 1.0f, 2, {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f});
  const std::string bytes = encode_features(seq);
  CHECK(bytes.size() == 4 + 4 + 4 + 4 + 4 + 2 + 2 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "OVTF");
  CHECK(bytes[4] == 1);   // version
  CHECK(bytes[8] == 2);   // D
  CHECK(bytes[12] == 3);  // T
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + 24, 4);
  CHECK(first == 1.0f);
}

TEST_CASE("feature decoder rejects corrupt files") {
  const auto seq = FeatureSequence::make("ab", 1.0f, 2, {1.0f, 2.0f, 3.0f, 4.0f});
  const std::string good = encode_features(seq);
  CHECK(decode_features(good) == seq);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_features(bad_magic), ParseError);
  CHECK_THROWS_AS(decode_features(put_u32(good, 4, 2)), ParseError);
  CHECK_THROWS_AS(decode_features(good.substr(0, good.size() - 1)), ParseError);
  CHECK_THROWS_AS(decode_features(good.substr(0, 10)), ParseError);
  CHECK_THROWS_AS(decode_features(good + "x"), ParseError);
  CHECK_THROWS_AS(decode_features(put_u32(good, 12, 0)), ParseError);
  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + good.size() - 4, &q, 4);
  CHECK_THROWS_AS(decode_features(nan), ParseError);
}

TEST_CASE("feature sequence validation") {
  CHECK_THROWS_AS(FeatureSequence::make("v", 1.0f, 0, {}), InvariantError);
  CHECK_THROWS_AS(FeatureSequence::make("v", 1.0f, 2, {1.0f, 2.0f, 3.0f}), InvariantError);
  CHECK_THROWS_AS(FeatureSequence::make("v", 0.0f, 1, {1.0f}), InvariantError);
  CHECK_THROWS_AS(FeatureSequence::make("v", 1.0f, 1, {std::numeric_limits<float>::infinity()}), InvariantError);
  CHECK_THROWS_AS(FeatureSequence::make("v", 1.0f, 1, {}), InvariantError);
}

TEST_CASE("text embeddings are unit rows and round trip exactly") {
  const auto t = TextEmbeddingSet::make({"a", "b"}, 2, {3.0, 4.0, 0.0, -2.0});
  CHECK(t.row(0)[0] == doctest::Approx(0.6));
  CHECK(t.row(0)[1] == doctest::Approx(0.8));
  CHECK(t.row(1)[1] == -1.0);
  CHECK(t.index_of("b") == 1u);
  CHECK_FALSE(t.index_of("c"));

  const auto sub = t.subset({"b"});
  CHECK(sub.size() == 1);
  CHECK(sub.row(0)[1] == -1.0);
  CHECK_THROWS_AS(t.subset({"zzz"}), ArgumentError);

  testing::TempDir dir;
  SplitMix64 rng(2);
  std::vector<double> rows(5 * 7);
  for (auto& x : rows) x = rng.normal();
  const auto big = TextEmbeddingSet::make({"p", "q", "r", "s", "t"}, 7, rows);
  save_text_embeddings(big, dir / "a.json");
  const auto back = load_text_embeddings(dir / "a.json");
  CHECK(back == big);
  save_text_embeddings(back, dir / "b.json");
  CHECK(io::read_file(dir / "a.json") == io::read_file(dir / "b.json"));
}

TEST_CASE("text embedding validation") {
  CHECK_THROWS_AS(TextEmbeddingSet::make({"a", "a"}, 1, {1.0, 1.0}), InvariantError);
  CHECK_THROWS_AS(TextEmbeddingSet::make({"a"}, 2, {0.0, 0.0}), InvariantError);
  CHECK_THROWS_AS(TextEmbeddingSet::make({"a"}, 2, {1.0}), InvariantError);
  CHECK_THROWS_AS(TextEmbeddingSet::make({}, 2, {}), InvariantError);
  CHECK_THROWS_AS(parse_text_embeddings(nlohmann::json::parse(R"({"dim": 2, "labels": ["a"], "embeddings": [[1]]})")),
                  ParseError);
  CHECK_THROWS_AS(parse_text_embeddings(nlohmann::json::parse(R"({"dim": 1, "labels": ["a", "b"], "embeddings": [[1]]})")),
                  ParseError);
  CHECK_THROWS_AS(parse_text_embeddings(nlohmann::json::parse(R"({"labels": ["a"], "embeddings": [[1]]})")), ParseError);
}
