#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ice {

enum class Space { pixel, latent };

// Row-major H x W x C raster. Pixel-space values are confined to [0,1];
// latent-space values are unbounded.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int height, int width, int channels, Space space,
              std::vector<double> data);

  static ImageTensor zeros(int height, int width, int channels, Space space);
  static ImageTensor filled(int height, int width, int channels, Space space,
                            double value);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  Space space() const noexcept { return space_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }
  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }

  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  // Same values reinterpreted in the other space; pixel conversion validates the range.
  ImageTensor as_space(Space space) const;

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  Space space_ = Space::pixel;
  std::vector<double> data_;
};

}  // namespace ice
