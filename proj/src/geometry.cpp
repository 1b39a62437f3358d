#include "btl/geometry.hpp"

#include <string>

namespace btl {

Matching hungarian_match(std::span<const BBox> preds, std::span<const BBox> gts, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("hungarian_match: tau must lie in (0, 1], got " + std::to_string(tau));

  Matching out;
  if (preds.empty() || gts.empty()) return out;

  const Eigen::MatrixXd overlap = iou_matrix(preds, gts);
  const Eigen::Index rows = overlap.rows();
  const Eigen::Index cols = overlap.cols();
  const Eigen::Index size = std::max(rows, cols);

  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(size, size);
  cost.topLeftCorner(rows, cols) = -overlap;

  const auto assignment = min_cost_assignment(cost);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index j = assignment[i];
    if (j >= cols) continue;
    const double value = overlap(i, j);
    out.assignment_iou += value;
    if (value >= tau) {
      out.pairs.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), value});
      out.matched_gt.insert(static_cast<std::size_t>(j));
    }
  }
  return out;
}

}  // namespace btl
