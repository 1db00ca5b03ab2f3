#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace facebb {

// H x W x C raster, row-major with interleaved channels, every sample in
// [0, 1]. Stored in double so budget checks at 1e-9 are meaningful.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels);
  Image(int height, int width, int channels, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double at(int y, int x, int c) const {
    return data_[index(y, x, c)];
  }
  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  // Clamps every sample into [0, 1] in place.
  void clamp01();

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Perturbation bound. Accepted in 0-255 pixel units, used in [0, 1] units.
class EpsilonBudget {
 public:
  EpsilonBudget() = default;
  explicit EpsilonBudget(double epsilon_255);

  double epsilon_255() const noexcept { return epsilon_255_; }
  double epsilon_norm() const noexcept { return epsilon_norm_; }

 private:
  double epsilon_255_ = 0.0;
  double epsilon_norm_ = 0.0;
};

struct FacePair {
  Image source;
  Image target;
  int label = 1;
};

void require_same_shape(const Image& a, const Image& b, const char* what);

// Clamps candidate into [origin - eps, origin + eps] intersected with [0, 1].
Image project(const Image& origin, const Image& candidate, const EpsilonBudget& budget);

double l2_diff(const Image& a, const Image& b);
double linf_diff(const Image& a, const Image& b);

// Repeats a single-channel image across three channels.
Image broadcast_to_rgb(const Image& gray);

Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

}  // namespace facebb
