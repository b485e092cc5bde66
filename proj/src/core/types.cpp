#include "ice/core/types.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace ice {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  require(!betas_.empty(), "noise schedule needs at least one timestep");
  cumulative_.reserve(betas_.size());
  double running = 1.0;
  for (double b : betas_) {
    require(b > 0.0 && b < 1.0, "noise schedule beta must lie in (0,1)");
    running *= (1.0 - b);
    cumulative_.push_back(running);
  }
}

NoiseSchedule NoiseSchedule::linear(int timesteps, double beta_start, double beta_end) {
  require(timesteps >= 1, "noise schedule needs at least one timestep");
  std::vector<double> betas(static_cast<std::size_t>(timesteps));
  for (int i = 0; i < timesteps; ++i) {
    const double f = timesteps == 1 ? 0.0 : static_cast<double>(i) / (timesteps - 1);
    betas[static_cast<std::size_t>(i)] = beta_start + f * (beta_end - beta_start);
  }
  return NoiseSchedule(std::move(betas));
}

void NoiseSchedule::check_timestep(int t) const {
  if (t < 1 || t > timesteps()) {
    fail(ErrorCode::contract_violation,
         "timestep " + std::to_string(t) + " outside [1, " + std::to_string(timesteps()) + "]");
  }
}

double NoiseSchedule::beta(int t) const {
  check_timestep(t);
  return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha(int t) const { return 1.0 - beta(t); }

double NoiseSchedule::cumulative_alpha(int t) const {
  check_timestep(t);
  return cumulative_[static_cast<std::size_t>(t - 1)];
}

AttentionMap::AttentionMap(int height, int width, std::vector<double> weights)
    : height_(height), width_(width), weights_(std::move(weights)) {
  require(height >= 1 && width >= 1, "attention grid must be at least 1x1");
  require(weights_.size() == static_cast<std::size_t>(height) * width,
          "attention weight count does not match grid");
  for (double w : weights_)
    require(std::isfinite(w) && w >= 0.0, "attention weights must be finite and nonnegative");
}

double AttentionMap::total() const {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

AttentionMap AttentionMap::normalized() const {
  const double s = total();
  if (!(s > 0.0)) fail(ErrorCode::degenerate_distribution, "attention map has zero mass");
  std::vector<double> w = weights_;
  for (double& x : w) x /= s;
  return AttentionMap(height_, width_, std::move(w));
}

std::vector<float> to_float(std::span<const double> v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

const TokenEmbedding& LearnedConcept::intrinsic(const std::string& axis) const {
  for (const auto& t : intrinsics)
    if (t.axis.name == axis) return t.embedding;
  fail(ErrorCode::unknown_token, "concept has no intrinsic token for axis '" + axis + "'");
}

std::vector<std::string> LearnedConcept::token_ids() const {
  std::vector<std::string> ids{conspec.token_id, inspec.token_id};
  for (const auto& t : intrinsics) ids.push_back(t.embedding.token_id);
  return ids;
}

std::string conspec_id(int index) { return "<obj" + std::to_string(index) + "_conspec>"; }
std::string inspec_id(int index) { return "<obj" + std::to_string(index) + "_inspec>"; }
std::string intrinsic_id(int index, const std::string& axis) {
  return "<obj" + std::to_string(index) + "_" + axis + ">";
}

}  // namespace ice
