#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "attacks/attacks.hpp"
#include "metrics/metrics.hpp"
#include "oracle/oracle.hpp"
#include "threshold/threshold.hpp"

namespace facebb {

// ---------------------------------------------------------------------------
// Configuration

struct OracleSpec {
  enum class Kind { Toy, External };
  Kind kind = Kind::Toy;
  std::uint64_t toy_seed = 7;
  int toy_embed_dim = 128;
  std::string endpoint;  // external; falls back to $FACEBB_ORACLE
};

struct SurveyInput {
  std::filesystem::path manifest;
  std::filesystem::path votes;
};

struct SweepConfig {
  std::filesystem::path pairs_file;
  OracleSpec oracle;
  std::optional<double> d_b;  // nullopt: select by max-F1 over the pair list
  std::vector<std::string> attacks{"nes", "bandits", "simba", "square"};
  std::vector<double> epsilon_grid_255{12, 14, 16, 18, 20};
  bool nes_extended = false;  // adds 10, 25, 30, 50 for NES
  std::int64_t query_limit = 10000;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "facebb-out";
  int workers = 0;  // 0: hardware concurrency
  double simba_k = 1.0;
  AttackConfig attack;  // per-attack knobs; epsilon, d_b, seed set per cell
  std::vector<SurveyInput> surveys;

  void validate() const;
  // Grid for one attack, ascending, duplicates removed.
  std::vector<double> grid_for(const std::string& attack) const;
};

// Sets one key using the config-file value syntax ("12", "\"x\"", "[1, 2]").
void apply_setting(SweepConfig& cfg, const std::string& key, const std::string& value);

// Parses the key = value config format (TOML subset, see docs/config.md).
// Relative paths resolve against the config file's directory.
SweepConfig load_sweep_config(const std::filesystem::path& path);

// Canonical form used for hashing. Excludes output_dir, workers and the
// survey inputs, none of which change any trace.
nlohmann::json canonical_config(const SweepConfig& cfg);
std::string config_hash(const SweepConfig& cfg);

// Implicit SimBA query budget for one epsilon:
// round(k^2 * eps_norm^2 * pixels / step^2), so step * sqrt(budget) equals
// k * eps_norm * sqrt(pixels).
std::int64_t simba_budget_for(double epsilon_255, std::size_t pixel_count, double step, double k);

// Per-cell seed: derived from the run seed, the attack name, epsilon and the
// pair index, so any cell can be reproduced alone.
std::uint64_t cell_seed(std::uint64_t run_seed, const std::string& attack, double epsilon_255,
                        std::size_t pair_index);

// ---------------------------------------------------------------------------
// Pairs

struct PairRecord {
  std::filesystem::path source_path;
  std::filesystem::path target_path;
  int label = 1;
};

// CSV with header source,target,label; relative paths resolve against the
// CSV's directory.
std::vector<PairRecord> read_pair_records(const std::filesystem::path& path);
// Loads and dimension-checks every image. want_channels (1 or 3, 0 = as is)
// broadcasts grayscale to RGB when an oracle needs it.
std::vector<FacePair> load_pairs(const std::filesystem::path& path, int want_channels = 0);

// ---------------------------------------------------------------------------
// Toy benchmark

struct ToyBenchmarkSpec {
  std::uint64_t seed = 1;
  int matching_pairs = 50;
  int nonmatching_pairs = 50;
  int height = 8;
  int width = 8;
  int channels = 3;
  double within_identity_noise = 0.03;
};

// Synthetic smooth "faces": matching pairs share an identity image plus
// independent noise; non-matching pairs use different identities. Images are
// quantized to 8 bits so PNG round trips are exact.
std::vector<FacePair> make_toy_pairs(const ToyBenchmarkSpec& spec);
// Writes the pairs as PNGs plus pairs.csv under dir; returns the CSV path.
std::filesystem::path write_toy_benchmark(const ToyBenchmarkSpec& spec,
                                          const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Sweep and report

using OracleFactory = std::function<std::unique_ptr<Oracle>()>;

struct SweepResult {
  std::string config_hash;
  double d_b = 0.0;
  std::vector<SummaryRow> rows;
  std::size_t eligible_pairs = 0;
  std::size_t skipped_pairs = 0;
  std::size_t computed_cells = 0;
  std::size_t resumed_cells = 0;
  std::filesystem::path summary_csv;
};

// Builds the oracle described by cfg for inputs of the given shape.
OracleFactory make_oracle_factory(const SweepConfig& cfg, const InputDims& dims);

SweepResult run_sweep(const SweepConfig& cfg);
// Same, with an explicit oracle source (tests inject failing oracles).
SweepResult run_sweep(const SweepConfig& cfg, const OracleFactory& factory);

struct ReportResult {
  std::vector<SummaryRow> rows;
  std::optional<double> magnitude_dssim_pearson;
  std::filesystem::path summary_csv;
};

// Rebuilds summary.csv and the figure-data CSVs from the trace files under
// output_dir (plus optional survey inputs). Used by run_sweep and `report`.
ReportResult write_report(const std::filesystem::path& output_dir,
                          const std::vector<SurveyInput>& surveys = {});

// Human accuracy for a (manifest, votes) pair.
double score_survey(const SurveyInput& survey);

// Survey packet from a sweep directory: successful traces of one attack at one
// epsilon, plus a calibration pair attacked at eps = 50 with NES.
struct SurveyPackRequest {
  std::filesystem::path sweep_dir;
  std::string attack;
  double epsilon_255 = 0.0;
  int images = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
};
std::size_t survey_pack(const SurveyPackRequest& req);

}  // namespace facebb
