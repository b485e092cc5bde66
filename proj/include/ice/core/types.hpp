#pragma once

#include <map>
#include <string>
#include <vector>

#include "ice/core/mask.hpp"
#include "ice/core/vec.hpp"

namespace ice {

struct TextConcept {
  std::string label;
  double score = 0.0;
};

// One localized object: label, its mask, the extraction index and the
// fraction of the canvas the mask covers.
struct ConceptRecord {
  TextConcept text_concept;
  BinaryMask mask;
  int order = 0;
  double coverage = 0.0;
};

class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  explicit NoiseSchedule(std::vector<double> betas);

  static NoiseSchedule linear(int timesteps, double beta_start, double beta_end);

  int timesteps() const noexcept { return static_cast<int>(betas_.size()); }
  const std::vector<double>& betas() const noexcept { return betas_; }
  double beta(int t) const;
  double alpha(int t) const;
  // ᾱ_t = ∏_{s≤t} (1 − β_s), t in [1, T].
  double cumulative_alpha(int t) const;

 private:
  void check_timestep(int t) const;

  std::vector<double> betas_;
  std::vector<double> cumulative_;
};

class AttentionMap {
 public:
  AttentionMap() = default;
  AttentionMap(int height, int width, std::vector<double> weights);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return weights_.size(); }
  const std::vector<double>& weights() const noexcept { return weights_; }

  double total() const;
  // Throws degenerate_distribution when all weights are zero.
  AttentionMap normalized() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> weights_;
};

// Learnable token embeddings are stored in float32 so the on-disk store is
// lossless; arithmetic is done in double.
struct TokenEmbedding {
  std::string token_id;
  std::vector<float> values;

  std::size_t dim() const noexcept { return values.size(); }
  Vector as_vector() const { return Vector(values.begin(), values.end()); }
  friend bool operator==(const TokenEmbedding&, const TokenEmbedding&) = default;
};

std::vector<float> to_float(std::span<const double> v);

struct IntrinsicAxis {
  std::string name;

  std::string anchor_prompt() const { return "a " + name + " concept"; }
  friend bool operator==(const IntrinsicAxis&, const IntrinsicAxis&) = default;
};

struct IntrinsicToken {
  IntrinsicAxis axis;
  TokenEmbedding embedding;
};

struct LearnedConcept {
  ConceptRecord record;
  TokenEmbedding conspec;
  TokenEmbedding inspec;
  std::vector<IntrinsicToken> intrinsics;  // configured axis order
  std::string init_word;                   // vocabulary word conspec started from

  const TokenEmbedding& intrinsic(const std::string& axis) const;
  std::vector<std::string> token_ids() const;
};

std::string conspec_id(int index);
std::string inspec_id(int index);
std::string intrinsic_id(int index, const std::string& axis);

}  // namespace ice
