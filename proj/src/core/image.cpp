#include "core/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/error.hpp"

namespace facebb {

namespace {

void check_dims(int height, int width, int channels) {
  if (height <= 0 || width <= 0)
    fail(ErrorCode::InvalidArgument, "image dimensions must be positive");
  if (channels != 1 && channels != 3)
    fail(ErrorCode::InvalidArgument,
         "image must have 1 or 3 channels, got " + std::to_string(channels));
}

}  // namespace

Image::Image(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels)
    fail(ErrorCode::InvalidArgument, "image data length does not match H*W*C");
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0))
      fail(ErrorCode::InvalidArgument, "image sample outside [0, 1]");
  }
}

void Image::clamp01() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

EpsilonBudget::EpsilonBudget(double epsilon_255)
    : epsilon_255_(epsilon_255), epsilon_norm_(epsilon_255 / 255.0) {
  if (!(epsilon_255 >= 0.0) || !std::isfinite(epsilon_255))
    fail(ErrorCode::InvalidArgument, "epsilon must be a finite value >= 0");
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::ShapeMismatch,
         std::string(what) + ": shape mismatch (" + std::to_string(a.height()) + "x" +
             std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
             std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
             std::to_string(b.channels()) + ")");
  }
}

Image project(const Image& origin, const Image& candidate, const EpsilonBudget& budget) {
  require_same_shape(origin, candidate, "project");
  const double eps = budget.epsilon_norm();
  Image out = candidate;
  auto o = origin.data();
  auto c = out.data();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double lo = std::max(0.0, o[i] - eps);
    const double hi = std::min(1.0, o[i] + eps);
    c[i] = std::clamp(c[i], lo, hi);
  }
  return out;
}

double l2_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "l2_diff");
  auto x = a.data();
  auto y = b.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double linf_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "linf_diff");
  auto x = a.data();
  auto y = b.data();
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

Image broadcast_to_rgb(const Image& gray) {
  if (gray.channels() == 3) return gray;
  Image out(gray.height(), gray.width(), 3);
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = gray.at(y, x, 0);
  return out;
}

}  // namespace facebb
