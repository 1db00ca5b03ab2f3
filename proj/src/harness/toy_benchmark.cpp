#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "harness/harness.hpp"

namespace facebb {

namespace {

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

// Sum of a few low-frequency plane waves around mid-grey.
Image identity_image(const ToyBenchmarkSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(0.0, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.04, 0.12);
  std::uniform_real_distribution<double> tint(-0.08, 0.08);
  Image img(spec.height, spec.width, spec.channels);
  struct Wave {
    double fy, fx, ph, a;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 4; ++k) waves.push_back({freq(rng), freq(rng), phase(rng), amp(rng)});
  std::vector<double> tints(spec.channels);
  for (double& t : tints) t = tint(rng);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      double v = 0.5;
      for (const auto& w : waves)
        v += w.a * std::cos(2.0 * std::numbers::pi *
                                (w.fy * y / spec.height + w.fx * x / spec.width) +
                            w.ph);
      for (int c = 0; c < spec.channels; ++c) img.at(y, x, c) = std::clamp(v + tints[c], 0.1, 0.9);
    }
  return img;
}

Image noisy_copy(const Image& base, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  Image out = base;
  for (double& v : out.data()) v = quantize(v + noise(rng));
  return out;
}

}  // namespace

std::vector<FacePair> make_toy_pairs(const ToyBenchmarkSpec& spec) {
  if (spec.matching_pairs < 0 || spec.nonmatching_pairs < 0)
    fail(ErrorCode::InvalidArgument, "pair counts must be >= 0");
  std::mt19937_64 rng(mix_seed(spec.seed, fnv1a("toy-benchmark")));
  std::vector<FacePair> pairs;
  for (int i = 0; i < spec.matching_pairs; ++i) {
    const Image base = identity_image(spec, rng);
    FacePair p;
    p.source = noisy_copy(base, spec.within_identity_noise, rng);
    p.target = noisy_copy(base, spec.within_identity_noise, rng);
    p.label = 1;
    pairs.push_back(std::move(p));
  }
  for (int i = 0; i < spec.nonmatching_pairs; ++i) {
    const Image a = identity_image(spec, rng);
    const Image b = identity_image(spec, rng);
    FacePair p;
    p.source = noisy_copy(a, spec.within_identity_noise, rng);
    p.target = noisy_copy(b, spec.within_identity_noise, rng);
    p.label = 0;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::filesystem::path write_toy_benchmark(const ToyBenchmarkSpec& spec,
                                          const std::filesystem::path& dir) {
  const auto pairs = make_toy_pairs(spec);
  std::filesystem::create_directories(dir / "images");
  const auto csv = dir / "pairs.csv";
  std::ofstream out(csv);
  if (!out) fail(ErrorCode::Io, "cannot write " + csv.string());
  out << "source,target,label\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string stem = "images/pair" + std::to_string(i);
    save_image(pairs[i].source, dir / (stem + "_a.png"));
    save_image(pairs[i].target, dir / (stem + "_b.png"));
    out << stem << "_a.png," << stem << "_b.png," << pairs[i].label << '\n';
  }
  if (!out) fail(ErrorCode::Io, "write failed: " + csv.string());
  return csv;
}

}  // namespace facebb
