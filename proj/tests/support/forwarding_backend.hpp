#pragma once

#include <cmath>
#include <limits>

#include "ice/backends/contracts.hpp"

namespace ice::test_support {

// Delegates every call to an inner backend; switches alter single behaviours.
class ForwardingBackend : public ModelBackend {
 public:
  explicit ForwardingBackend(ModelBackend& inner) : inner_(inner) {}

  bool hide_parameters = false;
  bool nan_noise = false;

  std::vector<TextConcept> retrieve_concepts(const ImageTensor& x, int k) const override {
    return inner_.retrieve_concepts(x, k);
  }
  BinaryMask segment(const ImageTensor& x, const TextConcept& c) const override {
    return inner_.segment(x, c);
  }
  std::string name() const override { return inner_.name(); }
  bool concurrent_reads() const override { return inner_.concurrent_reads(); }
  std::size_t embedding_dim() const override { return inner_.embedding_dim(); }
  void register_token(const TokenEmbedding& t) override { inner_.register_token(t); }
  void set_token(const std::string& id, std::span<const float> v) override { inner_.set_token(id, v); }
  const TokenEmbedding& token(const std::string& id) const override { return inner_.token(id); }
  bool has_token(const std::string& id) const override { return inner_.has_token(id); }
  std::vector<std::string> token_ids() const override { return inner_.token_ids(); }
  std::vector<std::string> vocabulary() const override { return inner_.vocabulary(); }
  bool in_vocabulary(const std::string& w) const override { return inner_.in_vocabulary(w); }
  Vector word_embedding(const std::string& w) const override { return inner_.word_embedding(w); }
  std::string placeholder_word() const override { return inner_.placeholder_word(); }
  Conditioning encode(const std::string& p) const override { return inner_.encode(p); }
  const NoiseSchedule& schedule() const override { return inner_.schedule(); }
  ImageTensor to_latent(const ImageTensor& p) const override { return inner_.to_latent(p); }
  DenoisePrediction predict_noise(const ImageTensor& x, int t, const Conditioning& c) const override {
    auto out = inner_.predict_noise(x, t, c);
    if (nan_noise)
      for (double& v : out.noise_estimate.data()) v = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  DenoiseGradient predict_noise_vjp(const ImageTensor& x, int t, const Conditioning& c,
                                    const DenoiseCotangent& g) const override {
    auto out = inner_.predict_noise_vjp(x, t, c, g);
    if (hide_parameters) out.parameters.clear();
    return out;
  }
  ImageTensor generate(const Conditioning& c, std::uint64_t seed) const override {
    return inner_.generate(c, seed);
  }
  std::vector<double> trainable_parameters() const override {
    return hide_parameters ? std::vector<double>{} : inner_.trainable_parameters();
  }
  void set_trainable_parameters(std::span<const double> v) override {
    inner_.set_trainable_parameters(v);
  }
  const EmbeddingEncoder& evaluation_encoder() const override { return inner_.evaluation_encoder(); }

 private:
  ModelBackend& inner_;
};

}  // namespace ice::test_support
