#pragma once

#include <filesystem>
#include <string>

#include "ice/evaluation/metrics.hpp"
#include "ice/evaluation/uce.hpp"
#include "json.hpp"

namespace ice {

// Evaluation report: {protocol, encoder_id, per_image, aggregate}. The CSV
// form has one row per per_image entry plus an aggregate row, nested keys
// flattened with '.'.
struct Report {
  std::string kind;  // masks, uce, icbench, pixels
  nlohmann::ordered_json protocol = nlohmann::ordered_json::object();
  std::string encoder_id;
  nlohmann::ordered_json per_image = nlohmann::ordered_json::array();
  nlohmann::ordered_json aggregate = nlohmann::ordered_json::object();
};

Report mask_report(const std::string& image, const MatchReport& r);
Report uce_report(const std::string& image, const SimilarityReport& r, const UceProtocol& protocol);
Report icbench_report(const std::string& image, const IcbenchReport& r, const std::string& encoder_id);
Report pixel_report(const std::string& image, const PixelMetrics& m, bool aligned);

std::string report_csv(const Report& r);

// Writes <stem>.json and <stem>.csv. The JSON records the config hash, the
// CSV checksum and its own content checksum.
// `extra_files` (already in `dir`, e.g. plots) are checksummed too.
void write_report(const std::filesystem::path& dir, const std::string& stem, const Report& r,
                  const std::string& config_sha256, const std::vector<std::string>& extra_files = {});

}  // namespace ice
