#pragma once

#include "ice/core/image.hpp"
#include "ice/core/types.hpp"

namespace ice {

double cumulative_alpha(const NoiseSchedule& schedule, int t);

// x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·eps. The noise sample is always supplied by the caller.
ImageTensor add_noise(const ImageTensor& x0, int t, const ImageTensor& eps,
                      const NoiseSchedule& schedule);

// Same map with ᾱ given directly; exposes the ᾱ → 0 and ᾱ → 1 limits.
ImageTensor add_noise_with_alpha_bar(const ImageTensor& x0, double alpha_bar,
                                     const ImageTensor& eps);

}  // namespace ice
