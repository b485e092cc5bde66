#include "ice/evaluation/uce.hpp"

#include "ice/core/error.hpp"

namespace ice {

namespace {

std::string filler(const LearnedConcept& c) {
  std::string out;
  for (const auto& t : c.intrinsics) out += t.embedding.token_id + " & ";
  return out + c.conspec.token_id;
}

}  // namespace

std::string concept_prompt(const LearnedConcept& c, const UceProtocol& protocol) {
  return PromptSpec::make(protocol.prompt_template, filler(c)).rendered;
}

std::string composition_prompt(const std::vector<LearnedConcept>& concepts,
                               const UceProtocol& protocol) {
  std::string joined;
  for (std::size_t i = 0; i < concepts.size(); ++i)
    joined += (i ? protocol.composition_joiner : "") + filler(concepts[i]);
  return PromptSpec::make(protocol.prompt_template, joined).rendered;
}

ImageTensor ground_truth_crop(const ImageTensor& image, const BinaryMask& mask) {
  return apply_mask(image, mask.complement());
}

SimilarityReport uce_evaluate(const std::vector<LearnedConcept>& concepts,
                              const ImageTensor& original, const ModelBackend& backend,
                              SimilarityMode mode, const UceProtocol& protocol) {
  if (concepts.empty()) fail(ErrorCode::invalid_input, "uce: no concepts");
  require(protocol.images_per_concept >= 1, "uce: images_per_concept must be >= 1");
  const auto& encoder = backend.evaluation_encoder();
  SimilarityReport r;
  r.encoder_id = encoder.id();
  r.mode = mode;

  std::vector<std::vector<ImageTensor>> generated;
  std::vector<ImageTensor> crops;
  for (const auto& c : concepts) {
    const std::string prompt = concept_prompt(c, protocol);
    const Conditioning cond = backend.encode(prompt);
    std::vector<ImageTensor> imgs;
    for (int s = 0; s < protocol.images_per_concept; ++s)
      imgs.push_back(backend.generate(cond, static_cast<std::uint64_t>(s)));
    crops.push_back(ground_truth_crop(original, c.record.mask));
    r.per_concept.push_back({c.record.text_concept.label, prompt,
                             sim_identity({imgs}, {crops.back()}, encoder, mode)});
    generated.push_back(std::move(imgs));
  }
  r.sim_identity = sim_identity(generated, crops, encoder, mode);

  r.composition_prompt = composition_prompt(concepts, protocol);
  const Conditioning joint = backend.encode(r.composition_prompt);
  for (int s = 0; s < protocol.images_per_concept; ++s)
    r.sim_composition += sim_composition(backend.generate(joint, static_cast<std::uint64_t>(s)),
                                         original, encoder, mode);
  r.sim_composition /= protocol.images_per_concept;

  r.acc_top1 = acc_topk(generated, crops, 1, encoder);
  if (concepts.size() >= 3) r.acc_top3 = acc_topk(generated, crops, 3, encoder);
  return r;
}

}  // namespace ice
