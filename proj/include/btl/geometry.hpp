#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <vector>

#include "btl/errors.hpp"

namespace btl {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;
using Point = Point2<double>;

// Axis-aligned pixel rectangle, corners (x0, y0) top-left and (x1, y1)
// bottom-right.
template <typename Scalar>
struct Box {
  Scalar x0{};
  Scalar y0{};
  Scalar x1{};
  Scalar y1{};

  bool valid() const {
    return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1) &&
           x0 >= Scalar(0) && y0 >= Scalar(0) && x0 < x1 && y0 < y1;
  }

  Scalar width() const { return x1 - x0; }
  Scalar height() const { return y1 - y0; }
  Scalar area() const { return width() * height(); }

  Point2<Scalar> center() const { return {(x0 + x1) / Scalar(2), (y0 + y1) / Scalar(2)}; }

  // Boundary inclusive.
  bool contains(const Point2<Scalar>& p) const {
    return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
  }

  bool operator==(const Box&) const = default;
};

using BBox = Box<double>;

template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const Scalar h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (w <= Scalar(0) || h <= Scalar(0)) return Scalar(0);
  const Scalar inter = w * h;
  return inter / (a.area() + b.area() - inter);
}

// rows index `preds`, columns index `gts`.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> iou_matrix(std::span<const Box<Scalar>> preds,
                                                                 std::span<const Box<Scalar>> gts) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(preds.size(), gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j) out(i, j) = iou(preds[i], gts[j]);
  return out;
}

// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
// row/column potentials, O(n^3)). Returns the column assigned to each row.
template <typename Derived>
std::vector<Eigen::Index> min_cost_assignment(const Eigen::MatrixBase<Derived>& cost) {
  using Scalar = typename Derived::Scalar;
  using Eigen::Index;
  const Index n = cost.rows();
  if (cost.cols() != n) throw DomainError("min_cost_assignment: cost matrix must be square");
  if (n == 0) return {};

  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  // 1-based potentials; column 0 is a virtual start column.
  std::vector<Scalar> u(n + 1, Scalar(0)), v(n + 1, Scalar(0));
  std::vector<Index> owner(n + 1, 0), way(n + 1, 0);

  for (Index row = 1; row <= n; ++row) {
    owner[0] = row;
    Index col0 = 0;
    std::vector<Scalar> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const Index row0 = owner[col0];
      Scalar delta = inf;
      Index col1 = 0;
      for (Index col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const Scalar reduced = cost(row0 - 1, col - 1) - u[row0] - v[col];
        if (reduced < minv[col]) {
          minv[col] = reduced;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (Index col = 0; col <= n; ++col) {
        if (used[col]) {
          u[owner[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (owner[col0] != 0);
    do {
      const Index col1 = way[col0];
      owner[col0] = owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<Index> assignment(n, -1);
  for (Index col = 1; col <= n; ++col) assignment[owner[col] - 1] = col - 1;
  return assignment;
}

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;

  bool operator==(const MatchPair&) const = default;
};

struct Matching {
  // Surviving pairs (iou >= tau), ordered by prediction index.
  std::vector<MatchPair> pairs;
  std::set<std::size_t> matched_gt;
  // Summed IoU of the full optimal assignment before thresholding.
  double assignment_iou = 0.0;

  bool empty() const { return pairs.empty(); }
};

inline constexpr double kDefaultTau = 0.5;

// Maximum-total-IoU one-to-one assignment between predicted and ground-truth
// boxes, then drops pairs whose IoU falls below tau. Rectangular instances are
// padded with zero-IoU dummies. Throws DomainError unless 0 < tau <= 1.
Matching hungarian_match(std::span<const BBox> preds, std::span<const BBox> gts, double tau = kDefaultTau);

}  // namespace btl
