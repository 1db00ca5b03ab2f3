#pragma once

#include <filesystem>
#include <vector>

#include "core/image.hpp"
#include "oracle/oracle.hpp"

namespace facebb {

struct ScoredPair {
  double distance = 0.0;
  int label = 0;  // 1 = same identity
};

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ThresholdSelection {
  double d_b = 0.0;
  double f1 = 0.0;
  std::vector<PRPoint> curve;  // ascending threshold
};

// One score per pair, order preserved. Oracle calls are uncharged.
std::vector<ScoredPair> score_pairs(const std::vector<FacePair>& pairs, Oracle& oracle);

// Max-F1 threshold over midpoints between consecutive distinct distances plus
// one sentinel below the minimum and one above the maximum. A pair is
// predicted MATCH iff distance < threshold. Ties go to the smaller threshold.
ThresholdSelection select_threshold(const std::vector<ScoredPair>& scores);

// F1 from confusion counts; precision is 1 when nothing is predicted.
PRPoint pr_point(double threshold, long tp, long fp, long fn);

void write_curve_csv(const std::vector<PRPoint>& curve, const std::filesystem::path& path);

}  // namespace facebb
