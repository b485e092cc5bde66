#include "ice/core/mask.hpp"

#include <algorithm>
#include <numeric>

#include "ice/core/error.hpp"

namespace ice {

BinaryMask::BinaryMask(int height, int width, bool value)
    : height_(height), width_(width),
      bits_(static_cast<std::size_t>(height) * width, value ? 1 : 0) {
  require(height >= 1 && width >= 1, "mask dimensions must be >= 1");
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  require(height >= 1 && width >= 1, "mask dimensions must be >= 1");
  require(bits_.size() == static_cast<std::size_t>(height) * width,
          "mask bit count does not match height x width");
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

BinaryMask BinaryMask::complement() const {
  BinaryMask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

BinaryMask BinaryMask::operator|(const BinaryMask& other) const {
  require(same_shape(other), "mask dimension mismatch");
  BinaryMask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] |= other.bits_[i];
  return out;
}

BinaryMask BinaryMask::operator&(const BinaryMask& other) const {
  require(same_shape(other), "mask dimension mismatch");
  BinaryMask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] &= other.bits_[i];
  return out;
}

BinaryMask BinaryMask::minus(const BinaryMask& other) const {
  require(same_shape(other), "mask dimension mismatch");
  BinaryMask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i)
    out.bits_[i] = (bits_[i] && !other.bits_[i]) ? 1 : 0;
  return out;
}

int nearest_source_index(int dst, int dst_size, int src_size) {
  // Sample the source at the destination cell centre.
  const double centre = (dst + 0.5) * static_cast<double>(src_size) / dst_size;
  return std::clamp(static_cast<int>(centre), 0, src_size - 1);
}

BinaryMask BinaryMask::resampled(int height, int width) const {
  if (height == height_ && width == width_) return *this;
  BinaryMask out(height, width);
  for (int y = 0; y < height; ++y) {
    const int sy = nearest_source_index(y, height, height_);
    for (int x = 0; x < width; ++x) {
      out.set(y, x, at(sy, nearest_source_index(x, width, width_)));
    }
  }
  return out;
}

BinaryMask BinaryMask::shifted(int dy, int dx) const {
  BinaryMask out(height_, width_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!at(y, x)) continue;
      const int ny = y + dy;
      const int nx = x + dx;
      if (ny >= 0 && ny < height_ && nx >= 0 && nx < width_) out.set(ny, nx, true);
    }
  }
  return out;
}

ImageTensor apply_mask(const ImageTensor& x, const BinaryMask& m, double fill) {
  require(x.height() == m.height() && x.width() == m.width(),
          "apply_mask: image and mask dimensions differ");
  ImageTensor out = x;
  auto data = out.data();
  const int c = x.channels();
  for (std::size_t p = 0; p < m.pixel_count(); ++p) {
    if (!m[p]) continue;
    for (int k = 0; k < c; ++k) data[p * c + k] = fill;
  }
  return out;
}

double mask_coverage(const BinaryMask& m) {
  if (m.pixel_count() == 0) return 0.0;
  return static_cast<double>(m.count()) / static_cast<double>(m.pixel_count());
}

SetCounts mask_intersection_union(const BinaryMask& a, const BinaryMask& b) {
  require(a.same_shape(b), "mask_intersection_union: dimension mismatch");
  SetCounts counts;
  const auto& ab = a.bits();
  const auto& bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    counts.intersection += (ab[i] & bb[i]);
    counts.union_count += (ab[i] | bb[i]);
  }
  return counts;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  const SetCounts c = mask_intersection_union(a, b);
  if (c.union_count == 0) return 0.0;
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_count);
}

}  // namespace ice
