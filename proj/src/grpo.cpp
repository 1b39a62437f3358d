#include "btl/grpo.hpp"

#include <limits>

namespace btl {

namespace {

void require_finite(const CompletionStats& s) {
  if (!std::isfinite(s.logp_policy) || !std::isfinite(s.logp_old) || !std::isfinite(s.logp_ref))
    throw DomainError("completion log-probabilities must be finite");
}

}  // namespace

double kl_estimate(const CompletionStats& stats, const GrpoConfig& cfg) {
  require_finite(stats);
  const double d = stats.logp_ref - stats.logp_policy;
  if (d > cfg.kl_cap)
    throw OverflowGuard("kl_estimate: logp_ref - logp_policy = " + std::to_string(d) + " exceeds cap " +
                        std::to_string(cfg.kl_cap));
  if (d == 0.0) return 0.0;
  // expm1(d) - d cancels badly near zero; use the series there.
  const double value = std::abs(d) < 1e-4 ? d * d * (0.5 + d * (1.0 / 6.0 + d / 24.0)) : std::expm1(d) - d;
  // Keep the estimate strictly positive when the inputs differ, even if d * d underflows.
  return std::max(value, std::numeric_limits<double>::denorm_min());
}

double grpo_objective(std::span<const ScoredCompletion> completions, const GrpoConfig& cfg) {
  if (completions.empty()) throw DomainError("grpo_objective: no completions");
  double total = 0.0;
  for (const auto& c : completions) {
    const double kl = kl_estimate(c.stats, cfg);
    const double ratio = std::exp(c.stats.logp_policy - c.stats.logp_old);
    total += ratio * c.advantage - cfg.beta * kl;
  }
  return total / static_cast<double>(completions.size());
}

}  // namespace btl
