#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ice/backends/contracts.hpp"
#include "ice/core/image.hpp"
#include "ice/core/mask.hpp"
#include "ice/core/types.hpp"

namespace ice {

struct LocalizationConfig {
  double tau = 0.05;
  int max_iterations = 16;
  double min_mask_coverage = 0.005;

  void validate() const;
};

enum class Termination { below_threshold, max_iterations, empty_retrieval, degenerate_mask };

std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view s);

struct LocalizationResult {
  std::vector<ConceptRecord> records;
  double final_proportion = 1.0;
  Termination termination = Termination::below_threshold;
};

// Fraction of pixels not yet attributed to an extracted concept.
double pixel_proportion(const ImageTensor& x, const BinaryMask& masked_so_far);

// Iterative retrieve → segment → record → mask-out. Each recorded mask is the
// segmentor output minus everything removed earlier, so records are disjoint
// even when a segmentor ignores the cut-out.
LocalizationResult localize(const ImageTensor& x, const Retriever& retriever,
                            const Segmentor& segmentor, const LocalizationConfig& cfg);

struct ManifestProvenance {
  std::string config_sha256;
  std::vector<std::string> extra_files;  // already in the directory; checksummed
};

// Stage One manifest: <dir>/concepts.json, image.png and mask_<order>.png per
// record, with a checksum per file and one over the manifest itself.
void write_localization(const std::filesystem::path& dir, const LocalizationResult& result,
                        const std::string& source_image, const ImageTensor& image,
                        const ManifestProvenance& provenance = {});

struct LocalizationManifest {
  LocalizationResult result;
  std::string source_image;
  std::string config_sha256;
  int height = 0;
  int width = 0;
  ImageTensor image;
  std::filesystem::path dir;
};

// Accepts the directory or its concepts.json; verifies every checksum.
LocalizationManifest read_localization(const std::filesystem::path& dir);

}  // namespace ice
