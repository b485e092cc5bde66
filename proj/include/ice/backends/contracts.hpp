#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ice/core/image.hpp"
#include "ice/core/mask.hpp"
#include "ice/core/types.hpp"
#include "ice/core/vec.hpp"

namespace ice {

struct PromptSpec {
  std::string template_text;
  std::string filler;
  std::string rendered;

  // Throws unless the template has exactly one "{}" slot.
  static PromptSpec make(std::string template_text, std::string filler);
};

// An encoded prompt. `pooled` is what encode_text returns; the per-position
// tokens are what a denoiser attends to.
struct EncodedToken {
  std::string text;
  bool learnable = false;
  Vector embedding;
};

struct Conditioning {
  std::string prompt;
  std::vector<EncodedToken> tokens;
  Vector pooled;
};

struct DenoisePrediction {
  ImageTensor noise_estimate;
  std::map<std::string, AttentionMap> attention;  // keyed by token text
};

// Upstream gradients for a vector-Jacobian product through predict_noise.
struct DenoiseCotangent {
  std::vector<double> noise_estimate;                    // empty = zero
  std::map<std::string, std::vector<double>> attention;  // per normalized map
};

struct DenoiseGradient {
  std::map<std::string, Vector> tokens;  // learnable token id → dL/dembedding
  std::vector<double> parameters;        // trainable head, same order as trainable_parameters()
};

class Retriever {
 public:
  virtual ~Retriever() = default;
  // At most k concepts in descending score order; empty when nothing clears the floor.
  virtual std::vector<TextConcept> retrieve_concepts(const ImageTensor& x, int k) const = 0;
};

class Segmentor {
 public:
  virtual ~Segmentor() = default;
  virtual BinaryMask segment(const ImageTensor& x, const TextConcept& c) const = 0;
};

// Image/text embedding provider used by the evaluation metrics.
class EmbeddingEncoder {
 public:
  virtual ~EmbeddingEncoder() = default;
  virtual std::string id() const = 0;
  virtual Vector embed_image(const ImageTensor& image) const = 0;
  virtual Vector embed_text(const std::string& text) const = 0;
  // True when every embedding is elementwise nonnegative, so raw cosine is in [0,1].
  virtual bool nonnegative() const = 0;
};

class ModelBackend : public Retriever, public Segmentor {
 public:
  virtual std::string name() const = 0;

  // False means callers must serialize every call on this backend.
  virtual bool concurrent_reads() const = 0;

  virtual std::size_t embedding_dim() const = 0;

  // Learnable-token table. Mutation is reserved for the training coordinator.
  virtual void register_token(const TokenEmbedding& token) = 0;
  virtual void set_token(const std::string& token_id, std::span<const float> values) = 0;
  virtual const TokenEmbedding& token(const std::string& token_id) const = 0;
  virtual bool has_token(const std::string& token_id) const = 0;
  virtual std::vector<std::string> token_ids() const = 0;

  virtual std::vector<std::string> vocabulary() const = 0;
  virtual bool in_vocabulary(const std::string& word) const = 0;
  virtual Vector word_embedding(const std::string& word) const = 0;
  virtual std::string placeholder_word() const = 0;

  virtual Conditioning encode(const std::string& prompt) const = 0;
  Vector encode_text(const std::string& prompt) const { return encode(prompt).pooled; }

  virtual const NoiseSchedule& schedule() const = 0;
  virtual ImageTensor to_latent(const ImageTensor& pixels) const = 0;

  virtual DenoisePrediction predict_noise(const ImageTensor& x_t, int t,
                                          const Conditioning& condition) const = 0;
  virtual DenoiseGradient predict_noise_vjp(const ImageTensor& x_t, int t,
                                            const Conditioning& condition,
                                            const DenoiseCotangent& cotangent) const = 0;

  virtual ImageTensor generate(const Conditioning& condition, std::uint64_t seed) const = 0;

  virtual std::vector<double> trainable_parameters() const = 0;
  virtual void set_trainable_parameters(std::span<const double> values) = 0;

  virtual const EmbeddingEncoder& evaluation_encoder() const = 0;
};

}  // namespace ice
