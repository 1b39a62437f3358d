#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "btl/errors.hpp"

namespace btl {

struct GrpoConfig {
  double beta = 0.04;          // KL coefficient
  double epsilon_std = 1e-8;   // floor on the group standard deviation
  double kl_cap = 30.0;        // largest logp_ref - logp_policy accepted by kl_estimate
};

// Summed sequence log-probabilities of one completion under the current,
// behaviour and reference policies.
struct CompletionStats {
  double logp_policy = 0.0;
  double logp_old = 0.0;
  double logp_ref = 0.0;
};

struct ScoredCompletion {
  CompletionStats stats;
  double advantage = 0.0;
};

// (R_i - mean) / max(std, epsilon_std) with the population std. Sums run
// left to right so results do not depend on vectorization. A group whose
// rewards are all equal yields exact zeros.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> group_advantages(const Eigen::MatrixBase<Derived>& rewards,
                                                                           const GrpoConfig& cfg = {}) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::IsVectorAtCompileTime || Derived::ColsAtCompileTime == Eigen::Dynamic,
                "group_advantages expects a vector of rewards");
  const Eigen::Index n = rewards.size();
  if (n < 1) throw DomainError("group_advantages: empty reward group");

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
  bool all_equal = true;
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(rewards(i))) throw DomainError("group_advantages: non-finite reward");
    sum += rewards(i);
    all_equal = all_equal && rewards(i) == rewards(0);
  }
  if (all_equal) return out;

  const Scalar mean = sum / Scalar(n);
  Scalar sq = 0;
  for (Eigen::Index i = 0; i < n; ++i) sq += (rewards(i) - mean) * (rewards(i) - mean);
  const Scalar std_dev = std::max(std::sqrt(sq / Scalar(n)), Scalar(cfg.epsilon_std));
  for (Eigen::Index i = 0; i < n; ++i) out(i) = (rewards(i) - mean) / std_dev;
  return out;
}

// Non-negative single-sample estimate of KL(policy || ref):
// exp(d) - d - 1 with d = logp_ref - logp_policy. Throws OverflowGuard when d
// exceeds cfg.kl_cap.
double kl_estimate(const CompletionStats& stats, const GrpoConfig& cfg = {});

// (1/N) sum_i [ exp(logp_policy_i - logp_old_i) * A_i - beta * KL_i ],
// unclipped, summed in input order.
double grpo_objective(std::span<const ScoredCompletion> completions, const GrpoConfig& cfg = {});

}  // namespace btl
