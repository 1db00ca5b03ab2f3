#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "oracle/oracle.hpp"

namespace facebb {

namespace {

std::size_t flat_size(const InputDims& d) {
  return static_cast<std::size_t>(d.height) * d.width * d.channels;
}

void validate(const ToyEmbedderSpec& spec) {
  const auto& d = spec.input;
  if (d.height <= 0 || d.width <= 0 || (d.channels != 1 && d.channels != 3))
    fail(ErrorCode::InvalidArgument, "toy embedder: invalid input dims " + to_string(d));
  if (spec.embed_dim <= 0) fail(ErrorCode::InvalidArgument, "toy embedder: embed_dim must be > 0");
}

void check_input(const ToyEmbedderSpec& spec, const Image& img) {
  const InputDims got{img.height(), img.width(), img.channels()};
  if (got != spec.input)
    fail(ErrorCode::ShapeMismatch,
         "toy embedder expects " + to_string(spec.input) + ", got " + to_string(got));
}

}  // namespace

Embedding toy_embed_formula(const ToyEmbedderSpec& spec, const Image& img) {
  validate(spec);
  check_input(spec, img);
  const std::size_t n = flat_size(spec.input);
  const std::size_t dim = static_cast<std::size_t>(spec.embed_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));

  LcgNormalStream rng(spec.seed);
  std::vector<double> w(dim * n);
  for (double& v : w) v = rng.next_normal() * scale;
  std::vector<double> b(dim);
  for (double& v : b) v = rng.next_normal() * scale;

  auto x = img.data();
  std::vector<double> out(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += w[r * n + i] * x[i];
    out[r] = std::tanh(acc + b[r]);
  }
  return Embedding::normalized(std::move(out));
}

ToyOracle::ToyOracle(const ToyEmbedderSpec& spec) : spec_(spec) {
  validate(spec_);
  const std::size_t n = flat_size(spec_.input);
  const std::size_t dim = static_cast<std::size_t>(spec_.embed_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));

  LcgNormalStream rng(spec_.seed);
  weights_t_.resize(n * dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t i = 0; i < n; ++i) weights_t_[i * dim + r] = rng.next_normal() * scale;
  bias_.resize(dim);
  for (double& v : bias_) v = rng.next_normal() * scale;
}

Embedding ToyOracle::compute(const Image& img) {
  const std::size_t dim = bias_.size();
  const std::size_t n = img.size();
  auto x = img.data();
  // Same per-row summation order as toy_embed_formula, so results are
  // bit-identical; the inner loop runs over rows to vectorize.
  std::vector<double> acc(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double* wrow = weights_t_.data() + i * dim;
    for (std::size_t r = 0; r < dim; ++r) acc[r] += wrow[r] * xi;
  }
  for (std::size_t r = 0; r < dim; ++r) acc[r] = std::tanh(acc[r] + bias_[r]);
  return Embedding::normalized(std::move(acc));
}

}  // namespace facebb
