#include "oracle/oracle.hpp"

#include <cmath>

#include "core/error.hpp"

namespace facebb {

std::string to_string(const InputDims& dims) {
  return std::to_string(dims.height) + "x" + std::to_string(dims.width) + "x" +
         std::to_string(dims.channels);
}

Embedding Embedding::normalized(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::InvalidArgument, "embedding must be non-empty");
  double sq = 0.0;
  for (double v : values) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm))
    fail(ErrorCode::Oracle, "embedding has zero or non-finite norm");
  for (double& v : values) v /= norm;
  return Embedding(std::move(values));
}

double feature_distance(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim())
    fail(ErrorCode::ShapeMismatch, "feature_distance: dimension mismatch (" +
                                       std::to_string(a.dim()) + " vs " +
                                       std::to_string(b.dim()) + ")");
  const auto& x = a.values();
  const auto& y = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

Embedding Oracle::checked_compute(const Image& img) {
  const InputDims want = input_dims();
  const InputDims got{img.height(), img.width(), img.channels()};
  if (got != want)
    fail(ErrorCode::ShapeMismatch,
         "oracle expects " + to_string(want) + " input, got " + to_string(got));
  total_calls_.fetch_add(1);
  return compute(img);
}

Embedding Oracle::embed(const Image& img, QueryLedger& ledger) {
  Embedding e = checked_compute(img);
  ledger.charge();
  return e;
}

Embedding Oracle::embed_uncharged(const Image& img) { return checked_compute(img); }

void VerifierConfig::validate() const {
  if (!(d_b > 0.0 && d_b < 2.0))
    fail(ErrorCode::InvalidArgument, "d_b must lie in (0, 2), got " + std::to_string(d_b));
}

Verification verify(Oracle& oracle, const FacePair& pair, const VerifierConfig& cfg) {
  cfg.validate();
  require_same_shape(pair.source, pair.target, "verify");
  const Embedding a = oracle.embed_uncharged(pair.source);
  const Embedding b = oracle.embed_uncharged(pair.target);
  const double d = feature_distance(a, b);
  return {d < cfg.d_b, d};
}

}  // namespace facebb
