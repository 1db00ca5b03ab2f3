#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "metrics/metrics.hpp"

namespace facebb {

std::vector<double> SsimConfig::taps() const {
  std::vector<double> g(static_cast<std::size_t>(window));
  const double center = (window - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - center;
    g[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

double magnitude(const Image& adv, const Image& orig) { return l2_diff(adv, orig); }

bool ssim_applicable(const Image& img, const SsimConfig& cfg) {
  return std::min(img.height(), img.width()) >= cfg.window;
}

namespace {

// Valid-mode separable filtering of one channel: rows first, then columns.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * src[static_cast<std::size_t>(y) * w + x + t];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimConfig& cfg) {
  require_same_shape(a, b, "ssim");
  if (!ssim_applicable(a, cfg))
    fail(ErrorCode::InvalidArgument, "ssim: image smaller than the " +
                                         std::to_string(cfg.window) + "x" +
                                         std::to_string(cfg.window) + " window");
  const int h = a.height(), w = a.width(), ch = a.channels();
  const auto taps = cfg.taps();
  const double c1 = cfg.c1(), c2 = cfg.c2();
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
  for (int c = 0; c < ch; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double va = a.at(y, x, c), vb = b.at(y, x, c);
        pa[i] = va;
        pb[i] = vb;
        paa[i] = va * va;
        pbb[i] = vb * vb;
        pab[i] = va * vb;
      }
    const auto mu_a = filter_valid(pa, h, w, taps);
    const auto mu_b = filter_valid(pb, h, w, taps);
    const auto e_aa = filter_valid(paa, h, w, taps);
    const auto e_bb = filter_valid(pbb, h, w, taps);
    const auto e_ab = filter_valid(pab, h, w, taps);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double var_a = e_aa[i] - ma * ma;
      const double var_b = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
      const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double dssim(const Image& a, const Image& b, const SsimConfig& cfg) {
  return (1.0 - ssim(a, b, cfg)) / 2.0;
}

}  // namespace facebb
