#include "ice/backends/schedule.hpp"

#include <cmath>

#include "ice/core/error.hpp"

namespace ice {

double cumulative_alpha(const NoiseSchedule& schedule, int t) {
  return schedule.cumulative_alpha(t);
}

ImageTensor add_noise_with_alpha_bar(const ImageTensor& x0, double alpha_bar,
                                     const ImageTensor& eps) {
  require(x0.same_shape(eps), "add_noise: x0 and eps shapes differ");
  require(alpha_bar >= 0.0 && alpha_bar <= 1.0, "add_noise: alpha_bar outside [0,1]");
  const double a = std::sqrt(alpha_bar);
  const double s = std::sqrt(1.0 - alpha_bar);
  std::vector<double> out(x0.size());
  const auto x = x0.data();
  const auto e = eps.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + s * e[i];
  return ImageTensor(x0.height(), x0.width(), x0.channels(), Space::latent, std::move(out));
}

ImageTensor add_noise(const ImageTensor& x0, int t, const ImageTensor& eps,
                      const NoiseSchedule& schedule) {
  return add_noise_with_alpha_bar(x0, schedule.cumulative_alpha(t), eps);
}

}  // namespace ice
