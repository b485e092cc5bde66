#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ice/backends/contracts.hpp"
#include "ice/core/image.hpp"
#include "ice/core/mask.hpp"
#include "ice/core/types.hpp"

namespace ice {

using Matrix = std::vector<std::vector<double>>;

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), ascending row
  double total = 0.0;
};

// Maximum-similarity one-to-one matching of size min(n, m). Among optimal
// matchings the lexicographically smallest pair list wins.
Assignment hungarian_match(const Matrix& similarity);

struct PairScore {
  double iou = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

struct MatchReport {
  std::vector<std::pair<int, int>> assignment;  // (pred, gt)
  std::vector<PairScore> per_pair;
  PairScore aggregate;  // means over matched pairs
  int unmatched_pred = 0;
  int unmatched_gt = 0;
};

MatchReport evaluate_masks(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& gt);

// Raw cosine, or the affine map (1 + cos) / 2 onto [0, 1].
enum class SimilarityMode { raw_cosine, affine };

std::string_view to_string(SimilarityMode m);
SimilarityMode similarity_mode_from_string(std::string_view s);
// Raw cosine already lies in [0, 1] for nonnegative encoders; otherwise affine.
SimilarityMode default_mode(const EmbeddingEncoder& encoder);

double similarity(const Vector& a, const Vector& b, SimilarityMode mode);

// Mean over concepts of the mean similarity between each generated image and
// the concept's ground-truth crop.
double sim_identity(const std::vector<std::vector<ImageTensor>>& concept_images,
                    const std::vector<ImageTensor>& gt_crops, const EmbeddingEncoder& encoder,
                    SimilarityMode mode);

double sim_composition(const ImageTensor& composed, const ImageTensor& original,
                       const EmbeddingEncoder& encoder, SimilarityMode mode);

// Fraction of generated images whose own class ranks within the top k of the
// prototypes. Ties rank the lower class index first.
double acc_topk(const std::vector<std::vector<ImageTensor>>& generated,
                const std::vector<ImageTensor>& prototypes, int k, const EmbeddingEncoder& encoder);

// Descriptions of one image: concept label → axis → text. The "object" axis
// describes the conspec token.
using ConceptDescriptions = std::map<std::string, std::map<std::string, std::string>>;

inline constexpr int icbench_images = 8;

struct AxisScore {
  std::string label;
  std::string axis;
  std::string token_id;
  double sim_tt = 0.0;
  double sim_tv = 0.0;
};

struct IcbenchReport {
  std::vector<AxisScore> per_concept;
  std::map<std::string, std::pair<double, double>> per_axis;  // axis → (sim_tt, sim_tv) means
  SimilarityMode mode = SimilarityMode::raw_cosine;
};

// Prompt the token is embedded in for the text-text score.
std::string icbench_prompt(const std::string& token_id);

// Axes scored: "object" (conspec) then each intrinsic axis. Throws
// descriptions_missing when an entry is absent.
IcbenchReport icbench_scores(const std::vector<LearnedConcept>& concepts,
                             const ConceptDescriptions& descriptions, const ModelBackend& backend,
                             const EmbeddingEncoder& encoder, SimilarityMode mode);

struct LabelGrid {
  int height = 0;
  int width = 0;
  std::vector<int> labels;  // row-major
};

struct PixelMetrics {
  double acc = 0.0;
  double miou = 0.0;
  std::map<int, double> class_iou;  // every label present in either grid
};

// Labels are compared as given; use align_labels first for unaligned ids.
PixelMetrics pixel_label_metrics(const LabelGrid& pred, const LabelGrid& gt);

// Renames predicted ids to the ground-truth ids of maximum overlap; unmatched
// predicted ids become -1 - id.
LabelGrid align_labels(const LabelGrid& pred, const LabelGrid& gt);

}  // namespace ice
