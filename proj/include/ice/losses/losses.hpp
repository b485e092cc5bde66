#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ice/core/image.hpp"
#include "ice/core/mask.hpp"
#include "ice/core/vec.hpp"

namespace ice {

using AxisPair = std::pair<std::string, std::string>;

struct LossWeights {
  double lambda_att = 1e-5;
  double lambda_triplet = 1.0;
  double gamma_phase1 = 0.05;
  std::map<AxisPair, double> gamma_phase2;  // both orders stored, zero diagonal

  // Throws unless weights are nonnegative and gamma_phase2 is symmetric with a zero diagonal.
  void validate() const;
  double gamma(const std::string& j, const std::string& k) const;
};

struct LossBreakdown {
  double recon = 0.0;
  double att = 0.0;
  double triplet = 0.0;
  double prior = 0.0;
  double total = 0.0;
};

// Mean squared error over all elements, or over the elements of `region`
// (resampled to the tensor grid by nearest neighbour when sizes differ).
double recon_loss(const ImageTensor& eps_true, const ImageTensor& eps_pred,
                  const std::optional<BinaryMask>& region = std::nullopt);
// Same loss plus d loss / d eps_pred.
double recon_loss_grad(const ImageTensor& eps_true, const ImageTensor& eps_pred,
                       const std::optional<BinaryMask>& region, std::vector<double>& grad);

struct TripletGrad {
  double value = 0.0;
  Vector anchor, positive, negative;
};

// max(0, ‖a−p‖² − ‖a−n‖² + γ); the subgradient at the kink is 0.
double triplet_loss(const Vector& anchor, const Vector& positive, const Vector& negative,
                    double gamma);
TripletGrad triplet_loss_grad(const Vector& anchor, const Vector& positive,
                              const Vector& negative, double gamma);

struct NamedVector {
  std::string axis;
  Vector value;
};

struct IntrinsicTripletGrad {
  double value = 0.0;
  Vector own;
  std::vector<Vector> others;  // same order as the input
};

// Σ_k max(0, ‖anchor−own‖² − ‖anchor−other_k‖² + γ_k).
double intrinsic_triplet_loss(const Vector& anchor, const Vector& own,
                              const std::vector<NamedVector>& others,
                              const std::map<std::string, double>& gamma_row);
IntrinsicTripletGrad intrinsic_triplet_loss_grad(const Vector& anchor, const Vector& own,
                                                 const std::vector<NamedVector>& others,
                                                 const std::map<std::string, double>& gamma_row);

// recon + λ_att·att + λ_triplet·triplet, plus prior (weight 1) when enabled.
LossBreakdown total_loss(double recon, double att, double triplet, const LossWeights& w,
                         std::optional<double> prior = std::nullopt);

inline constexpr double prior_weight = 1.0;

double prior_preservation_loss(const ImageTensor& eps_true, const ImageTensor& eps_pred_on_prior);
// Mean of the per-image MSEs of a prior batch.
double prior_preservation_loss(const std::vector<ImageTensor>& eps_true,
                               const std::vector<ImageTensor>& eps_pred_on_prior);

struct FiniteDifferenceReport {
  double max_relative_error = 0.0;
  bool skipped = false;  // evaluation point is a known non-differentiable point
};

// Central differences per coordinate; relative error |fd−an| / max(1e-8, |fd|+|an|).
double finite_difference_check(const std::function<double(const Vector&)>& loss_fn,
                               const Vector& params, const Vector& analytic_grad, double h);

// As above, but skips the comparison when `at_kink(params)` holds.
FiniteDifferenceReport finite_difference_check(const std::function<double(const Vector&)>& loss_fn,
                                               const Vector& params, const Vector& analytic_grad,
                                               double h,
                                               const std::function<bool(const Vector&)>& at_kink);

}  // namespace ice
