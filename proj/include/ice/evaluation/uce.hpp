#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ice/evaluation/metrics.hpp"

namespace ice {

// How images are generated for the concept-similarity metrics. Every report
// carries these fields so runs stay comparable.
struct UceProtocol {
  int images_per_concept = 8;   // seeds 0 .. images_per_concept-1
  std::string prompt_template = "a photo of a {}";
  std::string composition_joiner = " and ";
};

struct ConceptSimilarity {
  std::string label;
  std::string prompt;
  double sim_identity = 0.0;
};

struct SimilarityReport {
  double sim_identity = 0.0;
  double sim_composition = 0.0;
  double acc_top1 = 0.0;
  std::optional<double> acc_top3;  // absent with fewer than three concepts
  std::string encoder_id;
  SimilarityMode mode = SimilarityMode::raw_cosine;
  std::vector<ConceptSimilarity> per_concept;
  std::string composition_prompt;
};

// Prompt that renders one concept from all of its tokens.
std::string concept_prompt(const LearnedConcept& c, const UceProtocol& protocol);
// Prompt that renders every concept jointly.
std::string composition_prompt(const std::vector<LearnedConcept>& concepts,
                               const UceProtocol& protocol);

// Image restricted to the concept region, zero elsewhere.
ImageTensor ground_truth_crop(const ImageTensor& image, const BinaryMask& mask);

// Generates images from the backend's current token table and scores them
// against crops of `original`.
SimilarityReport uce_evaluate(const std::vector<LearnedConcept>& concepts,
                              const ImageTensor& original, const ModelBackend& backend,
                              SimilarityMode mode, const UceProtocol& protocol = {});

}  // namespace ice
