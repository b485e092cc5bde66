#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ice/core/image.hpp"

namespace ice {

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, bool value = false);
  BinaryMask(int height, int width, std::vector<std::uint8_t> bits);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return bits_.size(); }

  bool at(int y, int x) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int y, int x, bool value) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0;
  }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }
  bool same_shape(const BinaryMask& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  BinaryMask complement() const;
  BinaryMask operator|(const BinaryMask& other) const;
  BinaryMask operator&(const BinaryMask& other) const;
  // Bits of *this that are not set in other.
  BinaryMask minus(const BinaryMask& other) const;

  // Nearest-neighbour resampling; keeps the mask binary.
  BinaryMask resampled(int height, int width) const;

  // Shift by (dy, dx); bits shifted off the canvas are dropped.
  BinaryMask shifted(int dy, int dx) const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct SetCounts {
  std::size_t intersection = 0;
  std::size_t union_count = 0;
};

// Pixels under true bits are replaced by fill; x ⊙ (1 − m) for fill = 0.
ImageTensor apply_mask(const ImageTensor& x, const BinaryMask& m, double fill = 0.0);

double mask_coverage(const BinaryMask& m);

SetCounts mask_intersection_union(const BinaryMask& a, const BinaryMask& b);

// IoU with the convention IoU(∅, ∅) = 0.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

// Source index for nearest-neighbour resampling of one axis.
int nearest_source_index(int dst, int dst_size, int src_size);

}  // namespace ice
