#include <algorithm>
#include <cmath>
#include <cstdio>

#include "core/error.hpp"
#include "metrics/metrics.hpp"

namespace facebb {

namespace {

// Sorting first makes the mean independent of input order, bit for bit.
std::optional<double> order_free_mean(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

SummaryRow aggregate_summary(const std::vector<AttackTrace>& traces,
                             std::optional<double> human_accuracy) {
  if (traces.empty()) fail(ErrorCode::InvalidArgument, "aggregate_summary: no traces");
  SummaryRow row;
  row.attack = traces.front().attack;
  row.epsilon_255 = traces.front().config.budget.epsilon_255();
  row.human_accuracy = human_accuracy;

  std::vector<double> mags, dssims;
  std::int64_t queries = 0;
  for (const auto& t : traces) {
    if (t.attack != row.attack || t.config.budget.epsilon_255() != row.epsilon_255)
      fail(ErrorCode::InvalidArgument, "aggregate_summary: traces mix attacks or epsilons");
    queries += t.queries_used;
    if (t.outcome != Outcome::Success) continue;
    ++row.successes;
    if (t.magnitude) mags.push_back(*t.magnitude);
    if (t.dssim) dssims.push_back(*t.dssim);
  }
  row.traces = traces.size();
  row.success_rate = static_cast<double>(row.successes) / static_cast<double>(row.traces);
  row.avg_queries = static_cast<double>(queries) / static_cast<double>(row.traces);
  row.avg_magnitude = order_free_mean(std::move(mags));
  row.avg_dssim = order_free_mean(std::move(dssims));
  return row;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) fail(ErrorCode::InvalidArgument, "pearson: length mismatch");
  if (xs.size() < 3) fail(ErrorCode::InvalidArgument, "pearson: need at least 3 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::Degenerate, "pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

std::string summary_csv_header() {
  return "attack,epsilon,success_rate,human_accuracy,avg_magnitude,avg_dssim,avg_queries";
}

std::string summary_csv_row(const SummaryRow& row) {
  return row.attack + "," + format_number(row.epsilon_255) + "," +
         format_number(row.success_rate) + "," + format_optional(row.human_accuracy) + "," +
         format_optional(row.avg_magnitude) + "," + format_optional(row.avg_dssim) + "," +
         format_number(row.avg_queries);
}

}  // namespace facebb
