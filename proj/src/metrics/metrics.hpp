#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attacks/attacks.hpp"
#include "core/image.hpp"

namespace facebb {

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double dynamic_range = 1.0;
  double k1 = 0.01;
  double k2 = 0.03;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  // Normalized 1-D Gaussian taps; the 2-D window is their outer product.
  std::vector<double> taps() const;
};

double magnitude(const Image& adv, const Image& orig);

// Mean SSIM over every valid window position and channel (no padding).
double ssim(const Image& a, const Image& b, const SsimConfig& cfg = {});
double dssim(const Image& a, const Image& b, const SsimConfig& cfg = {});
bool ssim_applicable(const Image& img, const SsimConfig& cfg = {});

struct SummaryRow {
  std::string attack;
  double epsilon_255 = 0.0;
  double success_rate = 0.0;
  std::optional<double> human_accuracy;
  std::optional<double> avg_magnitude;  // over successful traces
  std::optional<double> avg_dssim;      // over successful traces with a DSSIM value
  double avg_queries = 0.0;             // actual spend over all traces
  std::size_t traces = 0;
  std::size_t successes = 0;
};

SummaryRow aggregate_summary(const std::vector<AttackTrace>& traces,
                             std::optional<double> human_accuracy = std::nullopt);

double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Columns: attack,epsilon,success_rate,human_accuracy,avg_magnitude,avg_dssim,avg_queries.
// Absent values are empty fields.
std::string summary_csv_header();
std::string summary_csv_row(const SummaryRow& row);
std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);

}  // namespace facebb
