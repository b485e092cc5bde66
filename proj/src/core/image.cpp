#include "ice/core/image.hpp"

#include <cmath>
#include <string>

#include "ice/core/error.hpp"

namespace ice {

namespace {

void validate_pixels(std::span<const double> data) {
  for (double v : data) {
    if (!(v >= 0.0 && v <= 1.0)) {
      fail(ErrorCode::contract_violation,
           "pixel-space value outside [0,1]: " + std::to_string(v));
    }
  }
}

}  // namespace

ImageTensor::ImageTensor(int height, int width, int channels, Space space,
                         std::vector<double> data)
    : height_(height), width_(width), channels_(channels), space_(space),
      data_(std::move(data)) {
  require(height >= 1 && width >= 1, "image dimensions must be >= 1");
  // Latent rasters may carry any number of feature channels (a diffusion
  // latent has 4); pixel images are gray or RGB.
  require(channels >= 1, "image must have at least one channel");
  if (space == Space::pixel) require(channels == 1 || channels == 3, "pixel images must have 1 or 3 channels");
  require(data_.size() == static_cast<std::size_t>(height) * width * channels,
          "image data length does not match height x width x channels");
  if (space_ == Space::pixel) validate_pixels(data_);
}

ImageTensor ImageTensor::zeros(int height, int width, int channels, Space space) {
  return filled(height, width, channels, space, 0.0);
}

ImageTensor ImageTensor::filled(int height, int width, int channels, Space space,
                                double value) {
  return ImageTensor(height, width, channels, space,
                     std::vector<double>(static_cast<std::size_t>(height) * width * channels, value));
}

ImageTensor ImageTensor::as_space(Space space) const {
  return ImageTensor(height_, width_, channels_, space, data_);
}

}  // namespace ice
