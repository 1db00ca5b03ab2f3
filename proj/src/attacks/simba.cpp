#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "attacks/attacks.hpp"
#include "attacks/detail.hpp"
#include "core/error.hpp"

namespace facebb {

namespace {

// DCT directions are indexed as (channel, u, v) and visited in bands of
// increasing max(u, v), shuffled within each band.
struct DctIndex {
  int c, u, v;
};

double dct_coeff(int freq, int pos, int len) {
  const double alpha = freq == 0 ? std::sqrt(1.0 / len) : std::sqrt(2.0 / len);
  return alpha * std::cos(std::numbers::pi * (2.0 * pos + 1.0) * freq / (2.0 * len));
}

std::vector<DctIndex> dct_order(const Image& shape) {
  std::vector<DctIndex> all;
  all.reserve(shape.size());
  for (int u = 0; u < shape.height(); ++u)
    for (int v = 0; v < shape.width(); ++v)
      for (int c = 0; c < shape.channels(); ++c) all.push_back({c, u, v});
  std::stable_sort(all.begin(), all.end(), [](const DctIndex& a, const DctIndex& b) {
    return std::max(a.u, a.v) < std::max(b.u, b.v);
  });
  return all;
}

std::vector<double> dct_vector(const Image& shape, const DctIndex& k) {
  std::vector<double> out(shape.size(), 0.0);
  for (int y = 0; y < shape.height(); ++y) {
    const double cy = dct_coeff(k.u, y, shape.height());
    for (int x = 0; x < shape.width(); ++x)
      out[shape.index(y, x, k.c)] = cy * dct_coeff(k.v, x, shape.width());
  }
  return out;
}

}  // namespace

std::vector<double> simba_direction(const Image& shape, SimbaBasis basis, std::size_t k) {
  if (k >= shape.size()) fail(ErrorCode::InvalidArgument, "simba direction out of range");
  if (basis == SimbaBasis::Pixel) {
    std::vector<double> out(shape.size(), 0.0);
    out[k] = 1.0;
    return out;
  }
  return dct_vector(shape, dct_order(shape)[k]);
}

AttackTrace attack_simba(const FacePair& pair, Oracle& oracle, const AttackConfig& cfg) {
  const auto& sp = cfg.simba;
  const std::int64_t limit =
      sp.budget_queries > 0 ? std::min(sp.budget_queries, cfg.query_limit) : cfg.query_limit;
  detail::AttackRun run("simba", pair, oracle, cfg, limit);
  Image x = run.origin();
  if (sp.step == 0.0) return run.finish(std::move(x));

  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::vector<DctIndex> dct;
  if (sp.basis == SimbaBasis::Pixel) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), run.rng());
  } else {
    dct = dct_order(x);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t lo = 0; lo < n;) {
      const int band = std::max(dct[lo].u, dct[lo].v);
      std::size_t hi = lo;
      while (hi < n && std::max(dct[hi].u, dct[hi].v) == band) ++hi;
      std::shuffle(order.begin() + static_cast<std::ptrdiff_t>(lo),
                   order.begin() + static_cast<std::ptrdiff_t>(hi), run.rng());
      lo = hi;
    }
  }

  // Try +step then -step along each direction once; keep strict improvements.
  for (std::size_t k : order) {
    if (!run.can_spend(1)) break;
    std::vector<double> dir;
    if (sp.basis == SimbaBasis::Dct) dir = dct_vector(x, dct[k]);

    bool halted = false;
    for (const double sgn : {1.0, -1.0}) {
      if (!run.can_spend(1)) break;
      Image cand = x;
      auto c = cand.data();
      if (sp.basis == SimbaBasis::Pixel) {
        const double o = run.origin().data()[k];
        c[k] = std::clamp(c[k] + sgn * sp.step, std::max(0.0, o - run.eps()), std::min(1.0, o + run.eps()));
        if (c[k] == x.data()[k]) continue;  // saturated, nothing to try
      } else {
        for (std::size_t i = 0; i < n; ++i) c[i] += sgn * sp.step * dir[i];
        cand = project(run.origin(), cand, cfg.budget);
        if (cand == x) continue;
      }
      const double f = run.evaluate(cand);
      if (f > run.current()) {
        x = std::move(cand);
        halted = run.record(f);
        break;
      }
    }
    if (halted) break;
  }
  return run.finish(std::move(x));
}

}  // namespace facebb
