#include "ice/losses/losses.hpp"

#include <cmath>

#include "ice/core/error.hpp"

namespace ice {

void LossWeights::validate() const {
  require(lambda_att >= 0.0 && lambda_triplet >= 0.0 && gamma_phase1 >= 0.0,
          "loss weights must be nonnegative");
  for (const auto& [key, value] : gamma_phase2) {
    require(value >= 0.0 && std::isfinite(value), "phase-two margins must be finite and nonnegative");
    if (key.first == key.second) require(value == 0.0, "phase-two margin diagonal must be zero");
    const auto it = gamma_phase2.find({key.second, key.first});
    require(it != gamma_phase2.end() && it->second == value, "phase-two margins must be symmetric");
  }
}

double LossWeights::gamma(const std::string& j, const std::string& k) const {
  if (j == k) return 0.0;
  const auto it = gamma_phase2.find({j, k});
  if (it == gamma_phase2.end())
    fail(ErrorCode::contract_violation, "no phase-two margin for (" + j + ", " + k + ")");
  return it->second;
}

namespace {

BinaryMask region_on_grid(const BinaryMask& region, const ImageTensor& like) {
  if (region.height() == like.height() && region.width() == like.width()) return region;
  return region.resampled(like.height(), like.width());
}

}  // namespace

double recon_loss_grad(const ImageTensor& eps_true, const ImageTensor& eps_pred,
                       const std::optional<BinaryMask>& region, std::vector<double>& grad) {
  require(eps_true.same_shape(eps_pred), "recon_loss: shapes differ");
  const auto t = eps_true.data(), p = eps_pred.data();
  const int ch = eps_true.channels();
  std::optional<BinaryMask> grid;
  if (region) grid = region_on_grid(*region, eps_true);
  std::size_t count = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (grid && !(*grid)[i / static_cast<std::size_t>(ch)]) continue;
    const double d = p[i] - t[i];
    sum += d * d;
    ++count;
  }
  if (count == 0) fail(ErrorCode::degenerate_region, "recon_loss: empty region");
  grad.assign(t.size(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (grid && !(*grid)[i / static_cast<std::size_t>(ch)]) continue;
    grad[i] = 2.0 * (p[i] - t[i]) / static_cast<double>(count);
  }
  return sum / static_cast<double>(count);
}

double recon_loss(const ImageTensor& eps_true, const ImageTensor& eps_pred,
                  const std::optional<BinaryMask>& region) {
  std::vector<double> unused;
  return recon_loss_grad(eps_true, eps_pred, region, unused);
}

TripletGrad triplet_loss_grad(const Vector& a, const Vector& p, const Vector& n, double gamma) {
  require(a.size() == p.size() && a.size() == n.size(), "triplet_loss: dimension mismatch");
  require(gamma >= 0.0, "triplet_loss: gamma must be nonnegative");
  const double inner = squared_distance(a, p) - squared_distance(a, n) + gamma;
  TripletGrad g{0.0, Vector(a.size(), 0.0), Vector(a.size(), 0.0), Vector(a.size(), 0.0)};
  if (inner <= 0.0) return g;
  g.value = inner;
  for (std::size_t i = 0; i < a.size(); ++i) {
    g.anchor[i] = 2.0 * (n[i] - p[i]);
    g.positive[i] = 2.0 * (p[i] - a[i]);
    g.negative[i] = 2.0 * (a[i] - n[i]);
  }
  return g;
}

double triplet_loss(const Vector& a, const Vector& p, const Vector& n, double gamma) {
  return triplet_loss_grad(a, p, n, gamma).value;
}

IntrinsicTripletGrad intrinsic_triplet_loss_grad(const Vector& anchor, const Vector& own,
                                                 const std::vector<NamedVector>& others,
                                                 const std::map<std::string, double>& gamma_row) {
  require(!others.empty(), "intrinsic_triplet_loss: needs at least one other token");
  IntrinsicTripletGrad out{0.0, Vector(own.size(), 0.0), {}};
  for (const auto& other : others) {
    const auto it = gamma_row.find(other.axis);
    if (it == gamma_row.end())
      fail(ErrorCode::contract_violation, "intrinsic_triplet_loss: no margin for axis " + other.axis);
    const auto g = triplet_loss_grad(anchor, own, other.value, it->second);
    out.value += g.value;
    axpy(1.0, g.positive, out.own);
    out.others.push_back(g.negative);
  }
  return out;
}

double intrinsic_triplet_loss(const Vector& anchor, const Vector& own,
                              const std::vector<NamedVector>& others,
                              const std::map<std::string, double>& gamma_row) {
  return intrinsic_triplet_loss_grad(anchor, own, others, gamma_row).value;
}

LossBreakdown total_loss(double recon, double att, double triplet, const LossWeights& w,
                         std::optional<double> prior) {
  for (double v : {recon, att, triplet, prior.value_or(0.0)})
    if (!std::isfinite(v)) fail(ErrorCode::numeric_failure, "total_loss: non-finite loss part");
  LossBreakdown b{recon, att, triplet, prior.value_or(0.0), 0.0};
  b.total = recon + w.lambda_att * att + w.lambda_triplet * triplet;
  if (prior) b.total += prior_weight * *prior;
  return b;
}

double prior_preservation_loss(const ImageTensor& eps_true, const ImageTensor& eps_pred_on_prior) {
  return recon_loss(eps_true, eps_pred_on_prior, std::nullopt);
}

double prior_preservation_loss(const std::vector<ImageTensor>& eps_true,
                               const std::vector<ImageTensor>& eps_pred_on_prior) {
  require(!eps_true.empty() && eps_true.size() == eps_pred_on_prior.size(),
          "prior batch sizes differ or are empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < eps_true.size(); ++i)
    sum += prior_preservation_loss(eps_true[i], eps_pred_on_prior[i]);
  return sum / static_cast<double>(eps_true.size());
}

double finite_difference_check(const std::function<double(const Vector&)>& loss_fn,
                               const Vector& params, const Vector& analytic_grad, double h) {
  require(h > 0.0, "finite_difference_check: h must be positive");
  require(params.size() == analytic_grad.size(), "finite_difference_check: gradient size mismatch");
  Vector x = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = loss_fn(x);
    x[i] = x0 - h;
    const double fm = loss_fn(x);
    x[i] = x0;
    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::abs(fd - analytic_grad[i]) /
                       std::max(1e-8, std::abs(fd) + std::abs(analytic_grad[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

FiniteDifferenceReport finite_difference_check(const std::function<double(const Vector&)>& loss_fn,
                                               const Vector& params, const Vector& analytic_grad,
                                               double h,
                                               const std::function<bool(const Vector&)>& at_kink) {
  if (at_kink && at_kink(params)) return {0.0, true};
  return {finite_difference_check(loss_fn, params, analytic_grad, h), false};
}

}  // namespace ice
