#pragma once

// Shared by sweep.cpp and report.cpp: output-directory layout and run.json.

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>

#include "harness/harness.hpp"

namespace facebb::harness_detail {

struct RunInfo {
  std::string config_hash;
  std::uint64_t seed = 0;
  double d_b = 0.0;
  bool d_b_selected = false;  // chosen by max-F1 rather than configured
  std::size_t eligible_pairs = 0;
  std::size_t skipped_pairs = 0;
  nlohmann::json config;  // canonical_config()
};

std::filesystem::path cell_dir(const std::filesystem::path& out, const std::string& attack,
                               double epsilon_255);
std::filesystem::path trace_file(const std::filesystem::path& out, const std::string& attack,
                                 double epsilon_255, std::size_t pair_index);
std::filesystem::path image_file(const std::filesystem::path& out, const std::string& attack,
                                 double epsilon_255, std::size_t pair_index);

void write_run_info(const std::filesystem::path& out, const RunInfo& info);
std::optional<RunInfo> read_run_info(const std::filesystem::path& out);

// "# seed=<s> config_hash=<h>"
std::string provenance_line(const RunInfo& info);

// Enough of a SweepConfig to rebuild the pairs and the oracle of a past run.
SweepConfig config_from_canonical(const nlohmann::json& j);

std::vector<FacePair> load_pairs_for(const SweepConfig& cfg, Oracle& oracle);

}  // namespace facebb::harness_detail
