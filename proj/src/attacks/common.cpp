#include <algorithm>
#include <cmath>

#include "attacks/attacks.hpp"
#include "attacks/detail.hpp"
#include "core/error.hpp"

namespace facebb {

void AttackConfig::validate() const {
  if (query_limit < 1) fail(ErrorCode::InvalidArgument, "query_limit must be >= 1");
  if (!(step_rate > 0.0)) fail(ErrorCode::InvalidArgument, "step_rate must be > 0");
  VerifierConfig{d_b}.validate();
  if (nes.population < 2 || nes.population % 2 != 0)
    fail(ErrorCode::InvalidArgument, "nes population must be an even integer >= 2");
  if (!(nes.sigma > 0.0)) fail(ErrorCode::InvalidArgument, "nes sigma must be > 0");
  if (bandits.tile_size < 0) fail(ErrorCode::InvalidArgument, "bandits tile_size must be >= 0");
  if (!(bandits.exploration > 0.0) || !(bandits.prior_step > 0.0) ||
      !(bandits.finite_diff_probe > 0.0))
    fail(ErrorCode::InvalidArgument, "bandits exploration, prior_step and probe must be > 0");
  if (!(simba.step >= 0.0)) fail(ErrorCode::InvalidArgument, "simba step must be >= 0");
  if (simba.budget_queries < 0)
    fail(ErrorCode::InvalidArgument, "simba budget_queries must be >= 0");
  if (!(square.p_init > 0.0 && square.p_init <= 1.0))
    fail(ErrorCode::InvalidArgument, "square p_init must lie in (0, 1]");
}

std::string_view to_string(Outcome o) { return o == Outcome::Success ? "SUCCESS" : "FAILURE"; }

double objective(Oracle& oracle, const Embedding& source_embedding, const Image& candidate,
                 QueryLedger& ledger) {
  return feature_distance(oracle.embed(candidate, ledger), source_embedding);
}

namespace detail {

AttackRun::AttackRun(std::string name, const FacePair& pair, Oracle& oracle,
                     const AttackConfig& cfg, std::int64_t query_limit)
    : oracle_(oracle), cfg_(cfg), origin_(pair.target), limit_(query_limit), rng_(cfg.seed) {
  cfg_.validate();
  require_same_shape(pair.source, pair.target, name.c_str());
  trace_.attack = std::move(name);
  trace_.config = cfg_;

  source_embedding_ = oracle_.embed_uncharged(pair.source);
  const double d0 = evaluate(origin_);
  if (d0 >= cfg_.d_b)
    fail(ErrorCode::Precondition, trace_.attack + ": pair does not match (d_0 = " +
                                      std::to_string(d0) + " >= d_b = " +
                                      std::to_string(cfg_.d_b) + ")");
  record(d0);
}

double AttackRun::evaluate(const Image& candidate) {
  if (!can_spend(1)) fail(ErrorCode::Internal, "query budget overrun");
  return objective(oracle_, source_embedding_, candidate, ledger_);
}

bool AttackRun::record(double distance) {
  trace_.steps.push_back({ledger_.count(), distance});
  return distance >= cfg_.d_b;
}

AttackTrace AttackRun::finish(Image final_image) {
  trace_.final_image = std::move(final_image);
  trace_.queries_used = ledger_.count();
  trace_.outcome = current() >= cfg_.d_b ? Outcome::Success : Outcome::Failure;
  return std::move(trace_);
}

Image signed_step(const Image& origin, const Image& x, const std::vector<double>& direction,
                  double step, const EpsilonBudget& budget) {
  Image next = x;
  auto v = next.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += step * sign(direction[i]);
  return project(origin, next, budget);
}

}  // namespace detail
}  // namespace facebb
