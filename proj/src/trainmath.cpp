#include "ovtad/trainmath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ovtad/error.hpp"
#include "ovtad/metrics.hpp"

namespace ovtad {

CenterNetTargets render_targets(const std::vector<Segment>& gt, std::size_t cells, double stride,
                                const GaussianTargetParams& params) {
  if (cells == 0) throw ArgumentError("render_targets needs at least one cell");
  if (!(stride > 0.0)) throw ArgumentError("stride must be positive");
  CenterNetTargets t;
  t.output.stride = stride;
  t.output.heatmap.assign(cells, 0.0);
  t.output.widths.assign(cells, 0.0);
  t.output.offsets.assign(cells, 0.0);
  t.mask.assign(cells, 0);
  for (const auto& seg : gt) {
    const double c = seg.center() / stride;
    if (!(c >= 0.0 && c < static_cast<double>(cells))) {
      throw ArgumentError("ground-truth center " + std::to_string(seg.center()) +
                          " s lies outside the rendered range");
    }
    const double cell = std::floor(c);
    const auto idx = static_cast<std::size_t>(cell);
    const double sigma = std::max(params.min_sigma, seg.length() / (params.sigma_divisor * stride));
    for (std::size_t i = 0; i < cells; ++i) {
      const double d = static_cast<double>(i) - cell;
      t.output.heatmap[i] = std::max(t.output.heatmap[i], std::exp(-d * d / (2.0 * sigma * sigma)));
    }
    t.output.widths[idx] = seg.length() / stride;
    t.output.offsets[idx] = c - cell;
    t.mask[idx] = 1;
  }
  return t;
}

double focal_loss(std::span<const double> pred, std::span<const double> target,
                  const FocalLossParams& params) {
  if (pred.size() != target.size()) {
    throw ArgumentError("focal loss: prediction and target shapes differ");
  }
  double sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    const double y = target[i];
    if (!(p > 0.0 && p < 1.0)) {
      throw ArgumentError("focal loss: prediction outside (0, 1)");
    }
    if (!(y >= 0.0 && y <= 1.0)) {
      throw ArgumentError("focal loss: target outside [0, 1]");
    }
    if (y == 1.0) {
      sum += std::pow(1.0 - p, params.alpha) * -std::log(p);
      ++positives;
    } else {
      sum += std::pow(1.0 - y, params.beta) * std::pow(p, params.alpha) * -std::log1p(-p);
    }
  }
  return sum / static_cast<double>(std::max<std::size_t>(positives, 1));
}

double match_cost(NormalizedSpan pred, NormalizedSpan gt, const MatchCostWeights& weights) {
  if (!(pred.width > 0.0) || !(gt.width > 0.0)) {
    throw ArgumentError("match cost: widths must be positive");
  }
  const double l1 = std::abs(pred.center - gt.center) + std::abs(pred.width - gt.width);
  const Segment a{pred.center - pred.width / 2.0, pred.center + pred.width / 2.0};
  const Segment b{gt.center - gt.width / 2.0, gt.center + gt.width / 2.0};
  return weights.l1 * l1 + weights.iou * (1.0 - temporal_iou(a, b));
}

CostMatrix CostMatrix::make(std::size_t rows, std::size_t cols, std::vector<double> costs) {
  if (rows == 0 || cols == 0) throw ArgumentError("cost matrix needs at least one row and column");
  if (costs.size() != rows * cols) throw ArgumentError("cost matrix size mismatch");
  for (double c : costs) {
    if (!std::isfinite(c)) throw ArgumentError("cost matrix has a non-finite entry");
  }
  CostMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.costs_ = std::move(costs);
  return m;
}

namespace {

// Square assignment solver with shortest augmenting paths and dual
// potentials (u, v). On return reduced costs a - u - v are >= 0 and zero on
// the matching.
struct SquareSolution {
  std::vector<double> u, v;
  std::vector<std::size_t> row_to_col;
};

SquareSolution solve_square(const std::vector<double>& a, std::size_t n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based internally; index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  SquareSolution s;
  s.u.assign(u.begin() + 1, u.end());
  s.v.assign(v.begin() + 1, v.end());
  s.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) s.row_to_col[p[j] - 1] = j - 1;
  return s;
}

// Finds the lexicographically smallest perfect matching inside the
// equality subgraph of an optimal dual, which is exactly the set of
// optimal assignments.
class LexMatcher {
 public:
  LexMatcher(const std::vector<double>& a, std::size_t n, const SquareSolution& s, double eps)
      : a_(a), n_(n), s_(s), eps_(eps), row_to_col_(s.row_to_col), col_to_row_(n),
        fixed_row_(n, false), fixed_col_(n, false), visited_(n, false) {
    for (std::size_t r = 0; r < n; ++r) col_to_row_[row_to_col_[r]] = r;
  }

  void fix_rows(std::size_t real_rows) {
    for (std::size_t r = 0; r < real_rows; ++r) {
      for (std::size_t c = 0; c < n_; ++c) {
        if (fixed_col_[c] || !tight(r, c)) continue;
        if (force(r, c)) {
          fixed_row_[r] = true;
          fixed_col_[c] = true;
          break;
        }
      }
    }
  }

  const std::vector<std::size_t>& row_to_col() const { return row_to_col_; }

 private:
  bool tight(std::size_t r, std::size_t c) const {
    return std::abs(a_[r * n_ + c] - s_.u[r] - s_.v[c]) <= eps_;
  }

  bool force(std::size_t r, std::size_t c) {
    if (row_to_col_[r] == c) return true;
    const std::size_t other = col_to_row_[c];
    freed_ = row_to_col_[r];
    blocked_row_ = r;
    blocked_col_ = c;
    std::fill(visited_.begin(), visited_.end(), false);
    if (!augment(other)) return false;
    row_to_col_[r] = c;
    col_to_row_[c] = r;
    return true;
  }

  // Re-matches row x along an alternating path that ends on the freed column.
  bool augment(std::size_t x) {
    for (std::size_t y = 0; y < n_; ++y) {
      if (visited_[y] || fixed_col_[y] || y == blocked_col_ || !tight(x, y)) continue;
      visited_[y] = true;
      if (y == freed_ || (col_to_row_[y] != blocked_row_ && augment(col_to_row_[y]))) {
        row_to_col_[x] = y;
        col_to_row_[y] = x;
        return true;
      }
    }
    return false;
  }

  const std::vector<double>& a_;
  std::size_t n_;
  const SquareSolution& s_;
  double eps_;
  std::vector<std::size_t> row_to_col_;
  std::vector<std::size_t> col_to_row_;
  std::vector<bool> fixed_row_;
  std::vector<bool> fixed_col_;
  std::vector<bool> visited_;
  std::size_t freed_ = 0;
  std::size_t blocked_row_ = 0;
  std::size_t blocked_col_ = 0;
};

}  // namespace

Assignment hungarian(const CostMatrix& costs) {
  const std::size_t n = std::max(costs.rows(), costs.cols());
  // Pad with zero-cost dummy rows/columns; dummy columns sort after real ones.
  std::vector<double> a(n * n, 0.0);
  double scale = 1.0;
  for (std::size_t r = 0; r < costs.rows(); ++r) {
    for (std::size_t c = 0; c < costs.cols(); ++c) {
      a[r * n + c] = costs(r, c);
      scale = std::max(scale, std::abs(costs(r, c)));
    }
  }
  const SquareSolution sol = solve_square(a, n);
  LexMatcher lex(a, n, sol, 1e-9 * scale);
  lex.fix_rows(costs.rows());

  Assignment out;
  for (std::size_t r = 0; r < costs.rows(); ++r) {
    const std::size_t c = lex.row_to_col()[r];
    if (c < costs.cols()) {
      out.pairs.emplace_back(r, c);
      out.total_cost += costs(r, c);
    }
  }
  return out;
}

}  // namespace ovtad
