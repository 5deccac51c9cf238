#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ovtad/core.hpp"
#include "ovtad/detdecode.hpp"

namespace ovtad {

/// Default weight of the width regression term for the (external) trainer.
inline constexpr double kWidthLossWeight = 0.1;

struct GaussianTargetParams {
  /// sigma = max(min_sigma, width / (sigma_divisor * stride)), in cells.
  double sigma_divisor = 6.0;
  double min_sigma = 1.0;
};

struct CenterNetTargets {
  CenterNetOutput output;
  /// 1 where width/offset carry a regression target.
  std::vector<std::uint8_t> mask;
};

/// Renders heatmap, width and offset targets for `gt` over `cells` cells.
/// Each bump peaks at 1.0 on the cell holding the segment center, so
/// decode_centernet() recovers the segment from that cell's width/offset.
CenterNetTargets render_targets(const std::vector<Segment>& gt, std::size_t cells, double stride,
                                const GaussianTargetParams& params = {});

struct FocalLossParams {
  double alpha = 2.0;
  double beta = 4.0;
};

/// Penalty-reduced focal loss, summed over positions and divided by the
/// number of exact-1 targets (at least 1).
double focal_loss(std::span<const double> pred, std::span<const double> target,
                  const FocalLossParams& params = {});

/// A segment in normalized (center, width) form.
struct NormalizedSpan {
  double center = 0.0;
  double width = 0.0;
};

struct MatchCostWeights {
  double l1 = 5.0;
  double iou = 2.0;
};

/// l1 * (|dc| + |dw|) + iou * (1 - IoU).
double match_cost(NormalizedSpan pred, NormalizedSpan gt, const MatchCostWeights& weights = {});

/// Dense n x m matrix of finite costs, row-major.
class CostMatrix {
 public:
  static CostMatrix make(std::size_t rows, std::size_t cols, std::vector<double> costs);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return costs_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> costs_;
};

struct Assignment {
  /// (row, col) pairs in row order; min(n, m) of them.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

/// Minimum-cost matching of size min(n, m). Among optimal matchings the
/// lexicographically smallest (row, col) list is returned.
Assignment hungarian(const CostMatrix& costs);

}  // namespace ovtad
