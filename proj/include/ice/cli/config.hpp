#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ice/backends/registry.hpp"
#include "ice/learning/learning.hpp"
#include "ice/localization/localize.hpp"
#include "ice/losses/losses.hpp"
#include "json.hpp"

namespace ice {

struct EvaluationConfig {
  std::string similarity_mode = "auto";  // auto, raw_cosine, affine
  int images_per_concept = 8;
};

struct PathsConfig {
  std::string input;
  std::string workdir;
};

// One JSON document. Every section and key is optional; unknown keys and
// wrong types are schema violations. schedule.seed always mirrors `seed`.
struct RunConfig {
  BackendConfig backend;
  LocalizationConfig localization;
  TrainSchedule schedule;
  LossWeights weights;  // phase-two margins are computed, never configured
  std::vector<IntrinsicAxis> axes{{"material"}, {"colour"}};
  PathsConfig paths;
  std::uint64_t seed = 0;
  EvaluationConfig evaluation;

  void validate() const;
  void set_seed(std::uint64_t s) {
    seed = s;
    schedule.seed = s;
  }
};

RunConfig parse_config(const nlohmann::ordered_json& doc);
RunConfig load_config(const std::filesystem::path& path);
// Canonical form: every key, fixed order.
nlohmann::ordered_json to_json(const RunConfig& cfg);
// Hash of the canonical form without `paths`, so relocating a run does not
// change it.
std::string config_sha256(const RunConfig& cfg);

}  // namespace ice
