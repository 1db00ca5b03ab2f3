#pragma once

#include <random>

#include "attacks/attacks.hpp"

namespace facebb::detail {

// Per-attack state shared by all four loops: cached source embedding, query
// accounting against the limit, and the recorded d_t history.
class AttackRun {
 public:
  AttackRun(std::string name, const FacePair& pair, Oracle& oracle, const AttackConfig& cfg,
            std::int64_t query_limit);

  const Image& origin() const noexcept { return origin_; }
  const AttackConfig& config() const noexcept { return cfg_; }
  double eps() const noexcept { return cfg_.budget.epsilon_norm(); }
  std::mt19937_64& rng() noexcept { return rng_; }

  std::int64_t remaining() const noexcept { return limit_ - ledger_.count(); }
  bool can_spend(std::int64_t n) const noexcept { return remaining() >= n; }

  // One charged query.
  double evaluate(const Image& candidate);

  // Records d_t for the current iterate; returns true when d_t >= d_b.
  bool record(double distance);

  double current() const noexcept { return trace_.steps.back().distance; }

  AttackTrace finish(Image final_image);

 private:
  Oracle& oracle_;
  AttackConfig cfg_;
  Image origin_;
  Embedding source_embedding_;
  QueryLedger ledger_;
  std::int64_t limit_;
  std::mt19937_64 rng_;
  AttackTrace trace_;
};

inline double sign(double v) noexcept { return (v > 0.0) - (v < 0.0); }

// x + step * sign(direction), projected back into the eps-ball around origin.
Image signed_step(const Image& origin, const Image& x, const std::vector<double>& direction,
                  double step, const EpsilonBudget& budget);

}  // namespace facebb::detail
