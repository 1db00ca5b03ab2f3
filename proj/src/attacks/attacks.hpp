#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "core/image.hpp"
#include "oracle/oracle.hpp"

namespace facebb {

// Defaults follow each attack's original publication, rescaled to the [0, 1]
// pixel domain. docs/config.md lists them.

struct NesParams {
  int population = 50;  // antithetic probes, pairs x 2
  double sigma = 0.001;
};

struct BanditsParams {
  int tile_size = 0;  // 0: a quarter of the shorter image side
  double exploration = 0.01;
  double prior_step = 0.1;
  double finite_diff_probe = 0.1;
};

enum class SimbaBasis { Pixel, Dct };

struct SimbaParams {
  double step = 8.0 / 255.0;
  SimbaBasis basis = SimbaBasis::Pixel;
  std::int64_t budget_queries = 0;  // 0: use the attack's query limit
};

struct SquareParams {
  double p_init = 0.05;
};

struct AttackConfig {
  EpsilonBudget budget{20.0};
  std::int64_t query_limit = 10000;
  double step_rate = 0.1;  // eta: each signed step moves eta * eps per pixel
  double d_b = 1.14;
  std::uint64_t seed = 0;
  NesParams nes;
  BanditsParams bandits;
  SimbaParams simba;
  SquareParams square;

  void validate() const;
};

enum class Outcome { Success, Failure };

std::string_view to_string(Outcome o);

struct TraceStep {
  std::int64_t query_count = 0;
  double distance = 0.0;
  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct AttackTrace {
  std::string attack;
  AttackConfig config;
  std::vector<TraceStep> steps;  // steps[0] is d_0 on the unmodified image
  Outcome outcome = Outcome::Failure;
  Image final_image;
  std::int64_t queries_used = 0;
  std::optional<double> magnitude;
  std::optional<double> dssim;

  double final_distance() const { return steps.empty() ? 0.0 : steps.back().distance; }
};

// Feature distance of candidate from the cached source embedding; charges one
// query to the ledger.
double objective(Oracle& oracle, const Embedding& source_embedding, const Image& candidate,
                 QueryLedger& ledger);

AttackTrace attack_nes(const FacePair& pair, Oracle& oracle, const AttackConfig& cfg);
AttackTrace attack_bandits(const FacePair& pair, Oracle& oracle, const AttackConfig& cfg);
AttackTrace attack_simba(const FacePair& pair, Oracle& oracle, const AttackConfig& cfg);
AttackTrace attack_square(const FacePair& pair, Oracle& oracle, const AttackConfig& cfg);

// Dispatch on "nes" | "bandits" | "simba" | "square". Fills trace.magnitude.
AttackTrace run_attack(std::string_view name, const FacePair& pair, Oracle& oracle,
                       const AttackConfig& cfg);

const std::vector<std::string>& attack_names();
bool is_attack_name(std::string_view name);

// --- building blocks, exposed for tests ------------------------------------

using ObjectiveFn = std::function<double(const Image&)>;

// Antithetic NES estimate of the objective's gradient at x: population/2
// Gaussian directions u, each probed at clip(x + sigma u) and clip(x - sigma u).
// Returns sum((f+ - f-) u) / (population * sigma).
std::vector<double> nes_gradient_estimate(const ObjectiveFn& f, const Image& x, int population,
                                          double sigma, std::mt19937_64& rng);

// Low-resolution gradient prior for Bandits, nearest-neighbour upsampled.
class TilePrior {
 public:
  TilePrior(int height, int width, int channels, int tile_size);

  int tile_size() const noexcept { return tile_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  // Upsamples prior + scale * extra (extra may be empty) to full resolution.
  std::vector<double> upsample(const std::vector<double>& extra = {}, double scale = 0.0) const;

 private:
  int height_, width_, channels_, tile_;
  int tiles_y_, tiles_x_;
  std::vector<double> values_;
};

// Square's p schedule: p_init halved at fixed fractions of the query limit.
double square_p_selection(double p_init, std::int64_t iteration, std::int64_t query_limit);

// Orthonormal SimBA basis direction k as a dense vector (pixel or DCT).
std::vector<double> simba_direction(const Image& shape, SimbaBasis basis, std::size_t k);

}  // namespace facebb
