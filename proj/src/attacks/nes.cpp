#include <algorithm>

#include "attacks/attacks.hpp"
#include "attacks/detail.hpp"
#include "core/error.hpp"

namespace facebb {

std::vector<double> nes_gradient_estimate(const ObjectiveFn& f, const Image& x, int population,
                                          double sigma, std::mt19937_64& rng) {
  if (population < 2 || population % 2 != 0)
    fail(ErrorCode::InvalidArgument, "nes population must be an even integer >= 2");
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = x.size();
  std::vector<double> grad(n, 0.0);
  std::vector<double> u(n);
  Image plus = x, minus = x;
  auto xs = x.data();
  for (int k = 0; k < population / 2; ++k) {
    for (double& v : u) v = normal(rng);
    auto p = plus.data();
    auto m = minus.data();
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = std::clamp(xs[i] + sigma * u[i], 0.0, 1.0);
      m[i] = std::clamp(xs[i] - sigma * u[i], 0.0, 1.0);
    }
    const double diff = f(plus) - f(minus);
    for (std::size_t i = 0; i < n; ++i) grad[i] += diff * u[i];
  }
  const double scale = 1.0 / (population * sigma);
  for (double& g : grad) g *= scale;
  return grad;
}

AttackTrace attack_nes(const FacePair& pair, Oracle& oracle, const AttackConfig& cfg) {
  detail::AttackRun run("nes", pair, oracle, cfg, cfg.query_limit);
  Image x = run.origin();
  if (run.eps() == 0.0) return run.finish(std::move(x));

  const int population = cfg.nes.population;
  const double step = cfg.step_rate * run.eps();
  const ObjectiveFn f = [&run](const Image& img) { return run.evaluate(img); };

  // Each iteration: population probes for the estimate plus one query for d_t.
  while (run.can_spend(population + 1)) {
    const auto grad = nes_gradient_estimate(f, x, population, cfg.nes.sigma, run.rng());
    x = detail::signed_step(run.origin(), x, grad, step, cfg.budget);
    if (run.record(run.evaluate(x))) break;
  }
  return run.finish(std::move(x));
}

}  // namespace facebb
