#include <algorithm>
#include <cmath>

#include "attacks/attacks.hpp"
#include "attacks/detail.hpp"
#include "core/error.hpp"

namespace facebb {

TilePrior::TilePrior(int height, int width, int channels, int tile_size)
    : height_(height), width_(width), channels_(channels), tile_(tile_size) {
  if (tile_ <= 0) tile_ = std::max(1, std::min(height, width) / 4);
  if (tile_ > std::min(height, width))
    fail(ErrorCode::InvalidArgument, "bandits tile_size exceeds image side");
  tiles_y_ = (height + tile_ - 1) / tile_;
  tiles_x_ = (width + tile_ - 1) / tile_;
  values_.assign(static_cast<std::size_t>(tiles_y_) * tiles_x_ * channels_, 0.0);
}

std::vector<double> TilePrior::upsample(const std::vector<double>& extra, double scale) const {
  std::vector<double> out(static_cast<std::size_t>(height_) * width_ * channels_);
  for (int y = 0; y < height_; ++y) {
    const int ty = y / tile_;
    for (int x = 0; x < width_; ++x) {
      const int tx = x / tile_;
      for (int c = 0; c < channels_; ++c) {
        const std::size_t t = (static_cast<std::size_t>(ty) * tiles_x_ + tx) * channels_ + c;
        double v = values_[t];
        if (!extra.empty()) v += scale * extra[t];
        out[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c] = v;
      }
    }
  }
  return out;
}

namespace {

Image probe(const Image& x, const std::vector<double>& dir, double length) {
  double sq = 0.0;
  for (double v : dir) sq += v * v;
  const double norm = std::sqrt(sq);
  Image out = x;
  if (norm == 0.0) return out;
  auto p = out.data();
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = std::clamp(p[i] + length * dir[i] / norm, 0.0, 1.0);
  return out;
}

}  // namespace

AttackTrace attack_bandits(const FacePair& pair, Oracle& oracle, const AttackConfig& cfg) {
  detail::AttackRun run("bandits", pair, oracle, cfg, cfg.query_limit);
  Image x = run.origin();
  if (run.eps() == 0.0) return run.finish(std::move(x));

  const auto& bp = cfg.bandits;
  TilePrior prior(x.height(), x.width(), x.channels(), bp.tile_size);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(prior.size());
  const double noise_scale = bp.exploration / std::sqrt(static_cast<double>(prior.size()));
  const double step = cfg.step_rate * run.eps();

  // Two finite-difference probes plus one query for d_t per iteration.
  while (run.can_spend(3)) {
    for (double& v : noise) v = noise_scale * normal(run.rng());
    const double l1 = run.evaluate(probe(x, prior.upsample(noise, 1.0), bp.finite_diff_probe));
    const double l2 = run.evaluate(probe(x, prior.upsample(noise, -1.0), bp.finite_diff_probe));
    const double est_deriv = (l1 - l2) / (bp.finite_diff_probe * bp.exploration);
    auto& pv = prior.values();
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] += bp.prior_step * est_deriv * noise[i];

    x = detail::signed_step(run.origin(), x, prior.upsample(), step, cfg.budget);
    if (run.record(run.evaluate(x))) break;
  }
  return run.finish(std::move(x));
}

}  // namespace facebb
