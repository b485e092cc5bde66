#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ice/backends/contracts.hpp"
#include "ice/backends/synthetic_world.hpp"

namespace ice::synthetic {

struct SyntheticOptions {
  int embedding_dim = 32;
  int attention_grid = 8;
  double decode_beta = 10.0;
  std::uint64_t embedding_seed = 7;
  int timesteps = 50;
  double beta_start = 0.05;
  double beta_end = 0.15;
  std::string placeholder = "sks";
  double attention_floor = 0.05;
  // Norm of embeddings for words outside the catalogue and axis names, so
  // filler words ("a", "photo", "concept") carry little signal.
  double function_word_scale = 0.1;
  // Height of the attribute indicator channels in the latent.
  double attribute_scale = 3.0;
};

// Nearest catalogue colour (by chroma) and material (by brightness, allowing
// the dark texel factor) of a pixel; false for background pixels.
struct PixelAttributes {
  int colour = 0;
  int material = 0;
  bool dark = false;
};
bool classify_pixel(double r, double g, double b, PixelAttributes& out);

// Attribute distributions decoded from one group of subject tokens.
struct Decoded {
  std::vector<double> category;
  std::vector<double> colour;
  std::vector<double> material;
};

class SyntheticBackend;

// Histogram-style encoder: an image embeds as (texture-matched category
// distribution, colour histogram, material histogram); text embeds as the
// soft-decoded attribute distributions of its subject tokens.
class SyntheticEncoder final : public EmbeddingEncoder {
 public:
  explicit SyntheticEncoder(const SyntheticBackend& backend) : backend_(backend) {}
  std::string id() const override { return "synthetic-toy-v1"; }
  Vector embed_image(const ImageTensor& image) const override;
  Vector embed_text(const std::string& text) const override;
  bool nonnegative() const override { return true; }

 private:
  const SyntheticBackend& backend_;
};

// Closed-form stand-in for a latent diffusion model. A latent pixel holds the
// RGB value followed by one indicator channel per catalogue colour and per
// material (scaled by attribute_scale); the denoiser predicts
// ε̂ = (x_t − √ᾱ·render(c)) / √(1−ᾱ) where render(c) paints every group of
// subject tokens with its soft-decoded category, colour and material over the
// world layout. The indicator channels make a blend of colours a worse
// reconstruction than the right colour, which RGB alone cannot do.
class SyntheticBackend final : public ModelBackend {
 public:
  explicit SyntheticBackend(SyntheticWorld world, SyntheticOptions options = {});
  SyntheticBackend(const SyntheticBackend&) = delete;
  SyntheticBackend& operator=(const SyntheticBackend&) = delete;

  const SyntheticWorld& world() const { return world_; }
  const SyntheticOptions& options() const { return options_; }
  const ImageTensor& world_image() const { return world_image_; }

  std::string name() const override { return "synthetic"; }

  // Scores each world shape by its visible-pixel fraction (pixels matching the
  // world appearance); shapes with no visible pixel are not returned.
  std::vector<TextConcept> retrieve_concepts(const ImageTensor& x, int k) const override;
  // Ground-truth region restricted to visible pixels.
  BinaryMask segment(const ImageTensor& x, const TextConcept& c) const override;
  bool concurrent_reads() const override { return true; }
  std::size_t embedding_dim() const override {
    return static_cast<std::size_t>(options_.embedding_dim);
  }

  void register_token(const TokenEmbedding& token) override;
  void set_token(const std::string& token_id, std::span<const float> values) override;
  const TokenEmbedding& token(const std::string& token_id) const override;
  bool has_token(const std::string& token_id) const override;
  std::vector<std::string> token_ids() const override;

  std::vector<std::string> vocabulary() const override { return world_.vocabulary; }
  bool in_vocabulary(const std::string& word) const override;
  Vector word_embedding(const std::string& word) const override;
  std::string placeholder_word() const override { return options_.placeholder; }

  Conditioning encode(const std::string& prompt) const override;

  const NoiseSchedule& schedule() const override { return schedule_; }
  ImageTensor to_latent(const ImageTensor& pixels) const override;
  int latent_channels() const;

  DenoisePrediction predict_noise(const ImageTensor& x_t, int t,
                                  const Conditioning& condition) const override;
  DenoiseGradient predict_noise_vjp(const ImageTensor& x_t, int t,
                                    const Conditioning& condition,
                                    const DenoiseCotangent& cotangent) const override;

  ImageTensor generate(const Conditioning& condition, std::uint64_t seed) const override;

  std::vector<double> trainable_parameters() const override;
  void set_trainable_parameters(std::span<const double> values) override;

  const EmbeddingEncoder& evaluation_encoder() const override { return encoder_; }

  // Subject-token groups of a conditioning (learnable tokens and catalogue
  // words, split at "and").
  std::vector<std::vector<const EncodedToken*>> subject_groups(const Conditioning& c) const;

  // p(w) ∝ Σ_s exp(β⟨τ_s, E(w)⟩) over the words of one axis.
  std::vector<double> soft_decode(Axis axis, const std::vector<const Vector*>& tokens) const;
  Decoded decode(const std::vector<const EncodedToken*>& group) const;

  // Renderer output (head applied, unclamped) for the conditioning.
  ImageTensor render(const Conditioning& condition) const;

  // Placement offset (dy, dx) used by generate for a seed; seed 0 → (0, 0).
  static std::pair<int, int> jitter(std::uint64_t seed);

  // Category region in the world, or a centred square for absent categories.
  const BinaryMask& category_region(int category) const { return regions_[static_cast<std::size_t>(category)]; }

 private:
  struct Words {
    std::vector<Vector> category, colour, material;
  };

  const std::vector<Vector>& axis_embeddings(Axis axis) const;
  std::vector<double> attention_field(const Vector& token) const;
  void check_latent(const ImageTensor& x_t) const;
  void check_pixels(const ImageTensor& x) const;

  SyntheticWorld world_;
  SyntheticOptions options_;
  NoiseSchedule schedule_;
  ImageTensor world_image_;
  std::vector<BinaryMask> regions_;
  std::vector<std::vector<double>> fields_;       // region · texture factor, per category
  std::vector<std::vector<double>> supports_;     // region indicator, per category
  std::vector<std::vector<double>> grid_regions_;  // region sampled at attention-cell centres
  Words words_;
  std::array<double, 3> gain_{1.0, 1.0, 1.0};
  std::array<double, 3> bias_{0.0, 0.0, 0.0};
  std::map<std::string, TokenEmbedding> tokens_;
  SyntheticEncoder encoder_;
};

}  // namespace ice::synthetic
