#include <algorithm>
#include <cmath>

#include "attacks/attacks.hpp"
#include "attacks/detail.hpp"
#include "core/error.hpp"

namespace facebb {

double square_p_selection(double p_init, std::int64_t iteration, std::int64_t query_limit) {
  const std::int64_t it =
      query_limit > 0 ? static_cast<std::int64_t>(static_cast<double>(iteration) /
                                                  static_cast<double>(query_limit) * 10000.0)
                      : 0;
  // Breakpoints on a 10,000-iteration scale.
  struct Band {
    std::int64_t upto;
    double divisor;
  };
  static constexpr Band bands[] = {{10, 1},     {50, 2},      {200, 4},     {500, 8},
                                   {1000, 16},  {2000, 32},   {4000, 64},   {6000, 128},
                                   {8000, 256}, {10000, 512}};
  for (const auto& b : bands)
    if (it <= b.upto) return p_init / b.divisor;
  return p_init;
}

namespace {

// Every sample is origin +/- eps before clipping; signs live in `sign_`.
class SignedDelta {
 public:
  SignedDelta(const Image& origin, double eps)
      : origin_(&origin), eps_(eps), sign_(origin.size()) {}

  double& sign(std::size_t i) { return sign_[i]; }
  double sign(std::size_t i) const { return sign_[i]; }

  double value(std::size_t i) const {
    return std::clamp(origin_->data()[i] + sign_[i] * eps_, 0.0, 1.0);
  }

  Image render() const {
    Image out = *origin_;
    auto p = out.data();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = value(i);
    return out;
  }

 private:
  const Image* origin_;
  double eps_;
  std::vector<double> sign_;
};

}  // namespace

AttackTrace attack_square(const FacePair& pair, Oracle& oracle, const AttackConfig& cfg) {
  detail::AttackRun run("square", pair, oracle, cfg, cfg.query_limit);
  const Image& x0 = run.origin();
  if (run.eps() == 0.0 || !run.can_spend(1)) return run.finish(x0);

  const int h = x0.height(), w = x0.width(), ch = x0.channels();
  auto& rng = run.rng();
  std::bernoulli_distribution coin(0.5);
  auto random_sign = [&] { return coin(rng) ? 1.0 : -1.0; };

  // Vertical stripes: one sign per (column, channel).
  SignedDelta best(x0, run.eps());
  for (int col = 0; col < w; ++col)
    for (int c = 0; c < ch; ++c) {
      const double s = random_sign();
      for (int row = 0; row < h; ++row) best.sign(x0.index(row, col, c)) = s;
    }
  Image x = best.render();
  if (run.record(run.evaluate(x))) return run.finish(std::move(x));

  const int max_side = std::max(1, std::min(h, w) - 1);
  for (std::int64_t it = 0; run.can_spend(1); ++it) {
    const double p = square_p_selection(cfg.square.p_init, it, cfg.query_limit);
    int side = static_cast<int>(std::lround(std::sqrt(p * h * w)));
    side = std::clamp(side, 1, max_side);
    std::uniform_int_distribution<int> pick_row(0, h - side);
    std::uniform_int_distribution<int> pick_col(0, w - side);
    const int r0 = pick_row(rng);
    const int c0 = pick_col(rng);

    SignedDelta cand = best;
    // Resample the per-channel window signs until the clipped window differs
    // from the current best (bounded, in case every pixel saturates).
    for (int attempt = 0; attempt < 16; ++attempt) {
      bool changed = false;
      for (int c = 0; c < ch; ++c) {
        const double s = random_sign();
        for (int y = r0; y < r0 + side; ++y)
          for (int xx = c0; xx < c0 + side; ++xx) {
            const std::size_t i = x0.index(y, xx, c);
            cand.sign(i) = s;
            if (cand.value(i) != best.value(i)) changed = true;
          }
      }
      if (changed) break;
    }

    Image next = cand.render();
    const double f = run.evaluate(next);
    if (f > run.current()) {
      best = std::move(cand);
      x = std::move(next);
      if (run.record(f)) break;
    }
  }
  return run.finish(std::move(x));
}

}  // namespace facebb
