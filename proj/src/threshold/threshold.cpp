#include "threshold/threshold.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "core/error.hpp"

namespace facebb {

std::vector<ScoredPair> score_pairs(const std::vector<FacePair>& pairs, Oracle& oracle) {
  if (pairs.empty()) fail(ErrorCode::InvalidArgument, "score_pairs: empty pair list");
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      require_same_shape(pairs[i].source, pairs[i].target, "score_pairs");
      const Embedding a = oracle.embed_uncharged(pairs[i].source);
      const Embedding b = oracle.embed_uncharged(pairs[i].target);
      out.push_back({feature_distance(a, b), pairs[i].label});
    } catch (const Error& e) {
      fail(e.code(), "pair " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

PRPoint pr_point(double threshold, long tp, long fp, long fn) {
  PRPoint p;
  p.threshold = threshold;
  p.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
  p.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  p.f1 = (p.precision + p.recall) > 0.0
             ? 2.0 * p.precision * p.recall / (p.precision + p.recall)
             : 0.0;
  return p;
}

ThresholdSelection select_threshold(const std::vector<ScoredPair>& scores) {
  long positives = 0;
  for (const auto& s : scores) {
    if (!(s.distance >= 0.0)) fail(ErrorCode::InvalidArgument, "negative or NaN distance");
    if (s.label == 1) ++positives;
  }
  const long negatives = static_cast<long>(scores.size()) - positives;
  if (positives == 0 || negatives == 0)
    fail(ErrorCode::Degenerate, "threshold selection needs both matching and non-matching pairs");

  std::vector<ScoredPair> sorted = scores;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredPair& a, const ScoredPair& b) { return a.distance < b.distance; });

  ThresholdSelection sel;
  // Sweep thresholds upward; everything strictly below the threshold is
  // predicted MATCH. Start with the sentinel below the minimum.
  long tp = 0, fp = 0;
  sel.curve.push_back(pr_point(sorted.front().distance - 1.0, tp, fp, positives - tp));
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double d = sorted[i].distance;
    while (i < sorted.size() && sorted[i].distance == d) {
      (sorted[i].label == 1 ? tp : fp) += 1;
      ++i;
    }
    const double next = i < sorted.size() ? 0.5 * (d + sorted[i].distance) : d + 1.0;
    sel.curve.push_back(pr_point(next, tp, fp, positives - tp));
  }

  const PRPoint* best = &sel.curve.front();
  for (const auto& p : sel.curve)
    if (p.f1 > best->f1) best = &p;
  sel.d_b = best->threshold;
  sel.f1 = best->f1;
  return sel;
}

void write_curve_csv(const std::vector<PRPoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "threshold,precision,recall,f1\n";
  char buf[160];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.threshold, p.precision,
                  p.recall, p.f1);
    out << buf;
  }
  if (!out) fail(ErrorCode::Io, "write failed: " + path.string());
}

}  // namespace facebb
