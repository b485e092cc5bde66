#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ice/core/mask.hpp"
#include "ice/core/types.hpp"

namespace ice {

struct SinkhornOptions {
  double epsilon = 0.01;
  int max_sweeps = 200;
  double sweep_tolerance = 1e-6;
  // Sweeps start at start_epsilon and shrink by `scaling` per sweep until epsilon.
  double start_epsilon = 1.0;
  double scaling = 0.7;
  // Newton steps on the entropic dual after the sweeps.
  bool newton_polish = true;
  int max_newton = 100;
  double newton_tolerance = 1e-12;
  double newton_step_cap = 5.0;  // max |Δ potential| per step, in units of epsilon
};

struct SinkhornResult {
  double value = 0.0;              // <P, C> of the entropic plan
  double marginal_residual = 0.0;  // ‖P1 − a‖₁ + ‖Pᵀ1 − b‖₁
  int sweeps = 0;
  int newton_steps = 0;
  std::vector<double> grad_a;      // d value / d a (a on the simplex); 0 off the support
};

// Entropic OT between probability vectors a (n) and b (m) with ground cost
// C (n×m). Zero-mass bins are removed before solving.
SinkhornResult sinkhorn(const std::vector<double>& a, const std::vector<double>& b,
                        const Eigen::MatrixXd& cost, const SinkhornOptions& options = {},
                        bool with_gradient = false);

// Euclidean distance between cell centres of an h×w grid mapped to the unit
// square (a side of one cell maps to 0.5).
Eigen::MatrixXd grid_cost(int h, int w);

struct AttentionLoss {
  double value = 0.0;
  std::vector<double> grad;  // d value / d raw attention weights
};

// OT cost between the normalized attention map and the mask resampled to the
// attention grid (nearest neighbour) and normalized.
AttentionLoss wasserstein_attention_loss(const AttentionMap& attention, const BinaryMask& mask,
                                         bool with_gradient = false,
                                         const SinkhornOptions& options = {});

}  // namespace ice
